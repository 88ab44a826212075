#include <doctest.h>

#include <httplib.h>

#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "cbench/analysis.hpp"
#include "cbench/categories.hpp"
#include "cbench/service.hpp"

using namespace cbench;
using namespace cbench::service;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cbench_service_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// A replica-shaped manifest (12 categories x 4 objects) without image files.
stimulus::DatasetManifest fake_manifest(int per_category = 4) {
  stimulus::DatasetManifest m;
  m.toolkit_version = "test";
  m.global_seed = stimulus::kDefaultSeed;
  for (auto cat : kCategories)
    for (int k = 0; k < per_category; ++k) {
      const std::string src = category_slug(std::string(cat)) + "-obj0" + std::to_string(k);
      auto add = [&](stimulus::Condition c, std::optional<int> level) {
        stimulus::StimulusRecord r;
        r.spec.source_id = src;
        r.spec.condition = c;
        if (level) r.spec.level = fragment::FragmentLevel(*level);
        r.category = std::string(cat);
        r.path = "dataset/" + r.spec.id() + ".png";
        m.records.push_back(r);
      };
      add(stimulus::Condition::rgb, std::nullopt);
      add(stimulus::Condition::contour, std::nullopt);
      for (const auto& lv : fragment::fragmentation_levels()) {
        add(stimulus::Condition::phosphene, lv.percent());
        add(stimulus::Condition::segment, lv.percent());
      }
    }
  std::sort(m.records.begin(), m.records.end(),
            [](const auto& a, const auto& b) { return a.spec.id() < b.spec.id(); });
  return m;
}

ServiceConfig setup(const std::string& name, bool with_manifest = true) {
  const fs::path root = scratch(name);
  ServiceConfig cfg;
  cfg.dataset_dir = root / "data";
  cfg.log_dir = root / "logs";
  fs::create_directories(cfg.dataset_dir);
  if (with_manifest) stimulus::write_manifest(fake_manifest(), cfg.dataset_dir / "manifest.json");
  return cfg;
}

// Deterministic scripted participant: right on even indices, wrong on odd ones.
std::string scripted_choice(const SessionState& st, int i) {
  const std::string truth = st.sequence[i].truth;
  if (i % 2 == 0) return truth;
  return truth == "truck" ? "cup" : "truck";
}

std::string truth_of(ExperimentService& svc, const std::string& id, int i) { return svc.session(id)->sequence[i].truth; }

int csv_rows(const std::string& csv) { return static_cast<int>(std::count(csv.begin(), csv.end(), '\n')) - 1; }

}  // namespace

TEST_CASE("trial sequence") {
  const auto m = fake_manifest();
  for (Group g : {Group::phosphene, Group::segment}) {
    const auto seq = plan_sequence(m, g, 42);
    REQUIRE(seq.size() == 528);
    std::set<std::string> seen;
    int last_level = 0;
    for (int i = 0; i < 528; ++i) {
      seen.insert(seq[i].stimulus);
      if (i < 432) {
        CHECK(seq[i].condition == to_string(g));
        CHECK(*seq[i].level >= last_level);
        last_level = *seq[i].level;
      } else {
        CHECK(seq[i].condition == (i < 480 ? "contour" : "rgb"));
      }
    }
    CHECK(seen.size() == 528);
    CHECK(*seq.front().level == 12);
    CHECK(*seq[431].level == 100);
    CHECK(seq.front().path == "dataset/" + seq.front().stimulus + ".png");
  }
  const auto a = plan_sequence(m, Group::phosphene, 1), b = plan_sequence(m, Group::phosphene, 1),
             c = plan_sequence(m, Group::phosphene, 2);
  bool same = true, differ = false;
  for (int i = 0; i < 528; ++i) same &= a[i].stimulus == b[i].stimulus, differ |= a[i].stimulus != c[i].stimulus;
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("session lifecycle") {
  ExperimentService svc(setup("lifecycle"));
  const json s = svc.create_session(Group::segment);
  const std::string id = s["session_id"];
  CHECK(id.size() == 32);
  CHECK(s["total_trials"] == 528);
  CHECK(s["group"] == "segment");

  const json d0 = svc.next_trial(id);
  CHECK(d0["trial_index"] == 0);
  CHECK(d0["stimulus_duration_ms"] == 200);
  CHECK(d0["mask_duration_ms"] == 200);
  CHECK(d0["fixation_ms"] == 500);
  CHECK(d0["stimulus_url"].get<std::string>().rfind("/stimuli/dataset/segment/12/", 0) == 0);
  CHECK(d0["labels"] == json(std::vector<std::string>(kCategories.begin(), kCategories.end())));
  CHECK(!d0.contains("truth"));
  CHECK(svc.next_trial(id) == d0);  // reads do not advance

  const auto st = *svc.session(id);
  int correct = 0;
  for (int i = 0; i < 528; ++i) {
    const json ack = svc.record_response(id, i, scripted_choice(st, i), 400 + i);
    CHECK(ack["correct"] == (i % 2 == 0));
    correct += ack["correct"].get<bool>();
    CHECK(ack["complete"] == (i == 527));
    if (i < 527) CHECK(svc.next_trial(id)["trial_index"] == i + 1);
  }
  CHECK(correct == 264);
  CHECK(svc.next_trial(id)["complete"] == true);
  CHECK_THROWS_AS(svc.record_response(id, 528, "cup", 1), Conflict);

  std::istringstream csv(svc.export_csv());
  const auto table = analysis::read_responses_csv(csv);  // validates rows
  REQUIRE(table.records.size() == 528);
  CHECK(table.records[0].id == id);
  CHECK(*table.records[0].level == 12);
  CHECK(table.records[527].condition == "rgb");
  CHECK(table.records[5].rt_ms == 405);
}

TEST_CASE("response errors") {
  ExperimentService svc(setup("errors"));
  const std::string id = svc.create_session()["session_id"];
  const std::string t0 = truth_of(svc, id, 0);
  CHECK_THROWS_AS(svc.record_response(id, 1, t0, 300), Conflict);
  CHECK_THROWS_AS(svc.record_response(id, 0, "zebra", 300), ValidationError);
  CHECK_THROWS_AS(svc.record_response(id, 0, t0, -5), ValidationError);
  CHECK_THROWS_AS(svc.record_response("deadbeef", 0, t0, 300), NotFound);
  CHECK_THROWS_AS(svc.next_trial("deadbeef"), NotFound);
  CHECK(svc.session(id)->cursor() == 0);

  svc.record_response(id, 0, t0, 300);
  CHECK_THROWS_AS(svc.record_response(id, 0, t0, 300), Conflict);  // duplicate
  CHECK(svc.session(id)->cursor() == 1);
  std::ifstream log(svc.config().log_dir / (id + ".jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) ++lines;
  CHECK(lines == 2);  // header + one response

  ExperimentService empty(setup("nomanifest", false));
  CHECK(!empty.has_manifest());
  CHECK_THROWS_AS(empty.create_session(), Unavailable);
}

TEST_CASE("crash and replay") {
  const ServiceConfig cfg = setup("replay");
  std::string id;
  SessionState before;
  {
    ExperimentService svc(cfg);
    id = svc.create_session(Group::phosphene)["session_id"];
    const auto st = *svc.session(id);
    for (int i = 0; i < 100; ++i) svc.record_response(id, i, scripted_choice(st, i), 250 + i);
    before = *svc.session(id);
  }
  // A crash mid-append leaves a torn, unacknowledged tail.
  {
    std::ofstream f(cfg.log_dir / (id + ".jsonl"), std::ios::app);
    f << R"({"type":"response","trial_ind)";
  }
  {
    ExperimentService svc(cfg);
    CHECK(svc.replay_warnings() == 1);
    const auto st = *svc.session(id);
    CHECK(st.cursor() == 100);
    CHECK(st.seed == before.seed);
    for (int i = 0; i < 100; ++i) {
      CHECK(st.records[i].choice == before.records[i].choice);
      CHECK(st.records[i].correct == before.records[i].correct);
      CHECK(st.records[i].rt_ms == before.records[i].rt_ms);
    }
    CHECK(svc.next_trial(id)["trial_index"] == 100);
    CHECK_THROWS_AS(svc.record_response(id, 99, "cup", 1), Conflict);
    for (int i = 100; i < 528; ++i) svc.record_response(id, i, scripted_choice(st, i), 250 + i);
  }
  ExperimentService svc(cfg);
  CHECK(svc.replay_warnings() == 0);  // the torn tail was truncated
  const auto st = *svc.session(id);
  REQUIRE(st.cursor() == 528);
  for (int i = 0; i < 528; ++i) CHECK(st.records[i].trial_index == i);

  std::istringstream csv(svc.export_csv());
  const auto table = analysis::read_responses_csv(csv);
  REQUIRE(table.records.size() == 528);
  std::set<std::string> stimuli;
  for (const auto& r : table.records) stimuli.insert(r.stimulus);
  CHECK(stimuli.size() == 528);
}

TEST_CASE("group balance") {
  ExperimentService svc(setup("balance"));
  const std::string g1 = svc.create_session()["group"], g2 = svc.create_session()["group"];
  CHECK(g1 != g2);
  svc.create_session(Group::segment);
  svc.create_session(Group::segment);
  for (int i = 0; i < 7; ++i) {
    svc.create_session();
    int phos = 0, seg = 0;
    for (const auto& id : svc.session_ids()) (svc.session(id)->group == Group::phosphene ? phos : seg)++;
    if (i >= 1) CHECK(std::abs(phos - seg) <= 1);
  }
  const auto all = svc.session_ids();
  const std::set<std::string> ids(all.begin(), all.end());
  CHECK(ids.size() == 11);
}

TEST_CASE("export filtering") {
  ExperimentService svc(setup("export"));
  CHECK(svc.export_csv() == std::string(analysis::kResponseHeader) + "\n");
  const std::string id = svc.create_session()["session_id"];
  for (int i = 0; i < 10; ++i) svc.record_response(id, i, truth_of(svc, id, i), 300);
  CHECK(csv_rows(svc.export_csv()) == 0);
  CHECK(csv_rows(svc.export_csv(true)) == 10);
}

TEST_CASE("masks") {
  ExperimentService svc(setup("masks"));
  const std::string id = svc.create_session()["session_id"];
  const auto a = svc.mask_png(id, 0), b = svc.mask_png(id, 0), c = svc.mask_png(id, 1);
  REQUIRE(a.size() > 8);
  CHECK(a[1] == 'P');
  CHECK(a == b);
  CHECK(a != c);
  CHECK_THROWS_AS(svc.mask_png(id, 528), NotFound);
  CHECK(svc.next_trial(id)["mask_url"] == "/api/session/" + id + "/mask/0.png");
}

TEST_CASE("familiarization block") {
  ServiceConfig cfg = setup("practice");
  std::vector<std::string> labels = {"apple", "chair", "clock", "drum", "fork", "guitar",
                                     "kite",  "leaf",  "piano", "rope", "sock", "tent"};
  json practice = {{"trials", json::array()}};
  for (int i = 0; i < 2; ++i)
    practice["trials"].push_back({{"stimulus", "practice/p" + std::to_string(i) + ".png"}, {"truth", labels[i]},
                                  {"labels", labels}});
  cfg.practice_manifest = cfg.dataset_dir / "practice.json";
  std::ofstream(*cfg.practice_manifest) << practice.dump();

  ExperimentService svc(cfg);
  const std::string id = svc.create_session()["session_id"];
  json d = svc.next_trial(id);
  CHECK(d["phase"] == "practice");
  CHECK(d["labels"] == json(labels));
  CHECK_THROWS_AS(svc.record_response(id, 0, "truck", 300), ValidationError);
  CHECK(svc.record_response(id, 0, "apple", 300)["correct"] == true);
  CHECK(svc.record_response(id, 1, "apple", 300)["correct"] == false);
  d = svc.next_trial(id);
  CHECK(d["phase"] == "experiment");
  CHECK(d["trial_index"] == 0);
  svc.record_response(id, 0, truth_of(svc, id, 0), 300);
  CHECK(csv_rows(svc.export_csv(true)) == 1);

  ExperimentService again(cfg);
  CHECK(again.session(id)->practice_done == 2);
  CHECK(again.session(id)->cursor() == 1);
}

TEST_CASE("http api") {
  ServiceConfig cfg = setup("http");
  fs::create_directories(cfg.dataset_dir / "dataset");
  std::ofstream(cfg.dataset_dir / "dataset" / "probe.txt") << "ok";
  ExperimentService svc(cfg);
  HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  std::thread th([&] { server.listen(); });

  httplib::Client cli("127.0.0.1", port);
  auto post = [&](const std::string& path, const json& body) {
    return cli.Post(path, body.dump(), "application/json");
  };
  auto created = post("/api/session", {{"group", "phosphene"}});
  REQUIRE(created);
  CHECK(created->status == 201);
  const std::string id = json::parse(created->body)["session_id"];
  const std::string base = "/api/session/" + id;

  CHECK(post("/api/session", {{"group", "noise"}})->status == 400);
  CHECK(cli.Get("/api/session/0123/trial")->status == 404);
  CHECK(cli.Post(base + "/response", "{not json", "application/json")->status == 400);
  CHECK(post(base + "/response", {{"trial_index", 0}, {"choice", "zebra"}, {"rt_ms", 500}})->status == 400);
  CHECK(post(base + "/response", {{"trial_index", 3}, {"choice", "cup"}, {"rt_ms", 500}})->status == 409);
  CHECK(post(base + "/response", {{"trial_index", 0}, {"choice", "cup"}})->status == 400);

  for (int i = 0; i < 528; ++i) {
    auto tr = cli.Get(base + "/trial");
    REQUIRE(tr);
    const json d = json::parse(tr->body);
    REQUIRE(d["trial_index"] == i);
    if (i == 0) {
      auto mask = cli.Get(d["mask_url"].get<std::string>());
      CHECK(mask->status == 200);
      CHECK(mask->get_header_value("Content-Type") == "image/png");
    }
    auto ack = post(base + "/response", {{"trial_index", i}, {"choice", truth_of(svc, id, i)}, {"rt_ms", 321.5}});
    REQUIRE(ack->status == 200);
    CHECK(json::parse(ack->body)["correct"] == true);
  }
  CHECK(post(base + "/response", {{"trial_index", 527}, {"choice", "cup"}, {"rt_ms", 1}})->status == 409);
  CHECK(json::parse(cli.Get(base + "/trial")->body)["complete"] == true);
  CHECK(json::parse(cli.Get(base)->body)["status"] == "complete");

  auto csv = cli.Get("/api/export.csv");
  REQUIRE(csv);
  CHECK(csv->status == 200);
  CHECK(csv_rows(csv->body) == 528);
  CHECK(cli.Get("/stimuli/dataset/probe.txt")->body == "ok");

  server.stop();
  th.join();

  ExperimentService empty(setup("http_empty", false));
  HttpServer server2(empty);
  const int port2 = server2.bind("127.0.0.1", 0);
  std::thread th2([&] { server2.listen(); });
  httplib::Client cli2("127.0.0.1", port2);
  CHECK(cli2.Post("/api/session", "{}", "application/json")->status == 503);
  server2.stop();
  th2.join();
}
