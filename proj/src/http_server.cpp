#include <httplib.h>

#include "cbench/service.hpp"

namespace cbench::service {

using nlohmann::json;

struct HttpServer::Impl {
  explicit Impl(ExperimentService& s) : service(s) {}
  ExperimentService& service;
  httplib::Server server;
};

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, {{"error", message}, {"status", status}}, status);
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw ValidationError("request body must be a JSON object");
    return j;
  } catch (const json::exception&) {
    throw ValidationError("request body is not valid JSON");
  }
}

}  // namespace

HttpServer::HttpServer(ExperimentService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& svc = impl_->service;
  auto& srv = impl_->server;

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Conflict& e) {
      send_error(res, 409, e.what());
    } catch (const NotFound& e) {
      send_error(res, 404, e.what());
    } catch (const Unavailable& e) {
      send_error(res, 503, e.what());
    } catch (const ValidationError& e) {
      send_error(res, 400, e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, std::string("bad field: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });

  srv.Post("/api/session", [&svc](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    std::optional<Group> group;
    if (body.contains("group") && !body["group"].is_null()) group = group_from_string(body["group"].get<std::string>());
    send_json(res, svc.create_session(group), 201);
  });

  srv.Get(R"(/api/session/([0-9a-f]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    const auto st = svc.session(req.matches[1]);
    if (!st) throw NotFound("unknown session");
    send_json(res, {{"session_id", st->id}, {"group", to_string(st->group)}, {"cursor", st->cursor()},
                    {"total_trials", st->sequence.size()}, {"practice_done", st->practice_done},
                    {"status", st->complete() ? "complete" : "active"}, {"created_at_ms", st->created_at_ms}});
  });

  srv.Get(R"(/api/session/([0-9a-f]+)/trial)", [&svc](const httplib::Request& req, httplib::Response& res) {
    send_json(res, svc.next_trial(req.matches[1]));
  });

  srv.Post(R"(/api/session/([0-9a-f]+)/response)", [&svc](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    if (!body.contains("trial_index") || !body["trial_index"].is_number_integer())
      throw ValidationError("trial_index must be an integer");
    if (!body.contains("choice") || !body["choice"].is_string()) throw ValidationError("choice must be a string");
    if (!body.contains("rt_ms") || !body["rt_ms"].is_number()) throw ValidationError("rt_ms must be a number");
    send_json(res, svc.record_response(req.matches[1], body["trial_index"].get<int>(), body["choice"],
                                       body["rt_ms"].get<double>()));
  });

  srv.Get(R"(/api/session/([0-9a-f]+)/mask/(p?)(\d+)\.png)", [&svc](const httplib::Request& req,
                                                                   httplib::Response& res) {
    const auto png = svc.mask_png(req.matches[1], std::stoi(req.matches[3]), req.matches[2] == "p");
    res.set_content(reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
  });

  srv.Get("/api/export.csv", [&svc](const httplib::Request& req, httplib::Response& res) {
    const std::string flag = req.get_param_value("include_partial");
    res.set_content(svc.export_csv(flag == "1" || flag == "true"), "text/csv");
  });

  if (!svc.config().dataset_dir.empty()) srv.set_mount_point("/stimuli", svc.config().dataset_dir.string());
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p <= 0) throw RuntimeError("cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) throw RuntimeError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace cbench::service
