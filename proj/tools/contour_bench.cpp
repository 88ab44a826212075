// contour_bench: stimulus generation, readout and analysis from one binary.

#include <omp.h>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <map>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "cbench/analysis.hpp"
#include "cbench/error.hpp"
#include "cbench/png_io.hpp"
#include "cbench/random.hpp"
#include "cbench/readout.hpp"
#include "cbench/report.hpp"
#include "cbench/service.hpp"
#include "cbench/stimulus.hpp"
#include "log.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cbench;

namespace {

cli::Log logger;

std::uint64_t parse_seed(const std::string& s) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos, 0);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw ValidationError("seed must be an integer (decimal or 0x hex), got '" + s + "'");
  }
}

void require_dir(const fs::path& p, const std::string& flag) {
  if (!fs::is_directory(p)) throw ValidationError(flag + ": not a directory: " + p.string());
}
void require_file(const fs::path& p, const std::string& flag) {
  if (!fs::is_regular_file(p)) throw ValidationError(flag + ": file not found: " + p.string());
}

int resolve_jobs(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("CONTOUR_BENCH_JOBS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::logic_error&) {
    }
    throw ValidationError(std::string("CONTOUR_BENCH_JOBS must be a positive integer, got '") + env + "'");
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw RuntimeError("cannot write " + path.string());
  f << text;
}

// ---- subcommands -------------------------------------------------------------

struct GenerateArgs {
  std::string src, out, seed = "0xB055", background = "black";
  double ppd = 32.0, jitter = 0.0;
  int orientations = 8;
  bool replica = false, no_sidecars = false;
};

void run_generate(const GenerateArgs& a, int jobs) {
  require_dir(a.src, "--src");
  stimulus::DatasetConfig cfg;
  cfg.global_seed = parse_seed(a.seed);
  if (a.background == "black") cfg.background = kBlack;
  else if (a.background == "red") cfg.background = kRed;
  else throw ValidationError("--background must be black or red");
  cfg.pixels_per_degree = a.ppd;
  cfg.jitter = a.jitter;
  cfg.orientations = a.orientations;
  cfg.replica = a.replica;
  cfg.write_sidecars = !a.no_sidecars;
  cfg.jobs = jobs;
  cfg.validate();
  const auto sources = stimulus::load_sources(a.src);
  if (sources.empty()) throw ValidationError("--src holds no <category>/<object>.png sources");
  logger.info("generating", {{"sources", sources.size()}, {"canvas", cfg.canvas_size()}, {"jobs", jobs}});
  const auto m = stimulus::build_dataset(sources, cfg, a.out);
  logger.info("done", {{"stimuli", m.records.size()},
                       {"datasets", m.generated_dataset_count()},
                       {"rgb", m.count(stimulus::Condition::rgb)},
                       {"manifest", (fs::path(a.out) / "manifest.json").string()}});
}

struct MaskArgs {
  std::string out, seed = "0xB055";
  int size = 256, count = 1;
  double exponent = 1.0;
};

void run_mask(const MaskArgs& a) {
  if (a.size < 8) throw ValidationError("--size must be at least 8");
  if (a.count < 1) throw ValidationError("--count must be positive");
  const std::uint64_t seed = parse_seed(a.seed);
  if (a.count == 1) {
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    write_png(a.out, stimulus::generate_noise_mask(a.size, seed, a.exponent));
  } else {
    fs::create_directories(a.out);
    for (int i = 0; i < a.count; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "mask_%04d.png", i);
      const auto s = StableHash(seed).add(static_cast<std::uint64_t>(i)).value();
      write_png(fs::path(a.out) / name, stimulus::generate_noise_mask(a.size, s, a.exponent));
    }
  }
  logger.info("masks written", {{"count", a.count}, {"out", a.out}});
}

struct ZeroShotArgs {
  std::string logits, mapping, out, model, aggregation = "max";
};

void run_zero_shot(const ZeroShotArgs& a) {
  require_file(a.logits, "--logits");
  require_file(a.mapping, "--mapping");
  readout::Aggregation agg;
  if (a.aggregation == "max") agg = readout::Aggregation::max;
  else if (a.aggregation == "sum") agg = readout::Aggregation::sum;
  else throw ValidationError("--aggregation must be max or sum");
  const auto mapping = readout::CategoryMapping::load(a.mapping);
  const auto set = readout::read_activations(a.logits);
  if (set.cols != readout::kImageNetClasses) throw ValidationError("logit files need 1000 columns");
  const std::string model = a.model.empty() ? fs::path(a.logits).stem().stem().string() : a.model;
  analysis::ResponseTable table;
  std::vector<double> row(set.cols);
  for (std::size_t i = 0; i < set.rows; ++i) {
    const auto r = set.row(i);
    std::copy(r.begin(), r.end(), row.begin());
    table.records.push_back(analysis::model_response(model, set.ids[i], readout::zero_shot_predict(row, mapping, agg)));
  }
  analysis::write_responses_csv(a.out, table);
  int hits = 0;
  for (const auto& r : table.records) hits += r.correct;
  logger.info("zero-shot responses written",
              {{"rows", table.records.size()}, {"accuracy", table.records.empty() ? 0.0 : double(hits) / table.records.size()},
               {"out", a.out}});
}

struct FitArgs {
  std::string train, test, out, model;
  readout::DecoderHyper hyper;
  bool no_standardize = false;
};

void run_fit_decoder(FitArgs a, int jobs) {
  require_file(a.train, "--train");
  require_file(a.test, "--test");
  a.hyper.standardize = !a.no_standardize;
  if (!(a.hyper.l2 >= 0) || a.hyper.max_iterations < 1 || !(a.hyper.tolerance > 0))
    throw ValidationError("decoder hyperparameters out of range");
  const auto train = readout::read_activations(a.train);
  const auto test = readout::read_activations(a.test);
  const std::string model = a.model.empty() ? fs::path(a.test).stem().string() : a.model;
  const auto cells = readout::decode_within_condition(train, test, a.hyper, jobs);
  analysis::ResponseTable table;
  json summary = {{"model", model}, {"l2", a.hyper.l2}, {"max_iterations", a.hyper.max_iterations},
                  {"tolerance", a.hyper.tolerance}, {"standardize", a.hyper.standardize}, {"cells", json::array()}};
  for (const auto& c : cells) {
    int hits = 0;
    for (std::size_t i = 0; i < c.ids.size(); ++i) {
      table.records.push_back(analysis::model_response(model, c.ids[i], c.predictions[i]));
      hits += table.records.back().correct;
    }
    json cell = {{"condition", c.condition}, {"train_rows", c.train_rows}, {"train_accuracy", c.train_accuracy},
                 {"test_rows", c.ids.size()}, {"test_accuracy", double(hits) / c.ids.size()},
                 {"converged", c.converged}, {"iterations", c.iterations}};
    if (c.level) cell["level"] = *c.level;
    summary["cells"].push_back(cell);
    if (!c.converged) logger.warn("decoder hit the iteration cap", {{"condition", c.condition}, {"level", c.level.value_or(0)}});
  }
  fs::create_directories(a.out);
  analysis::write_responses_csv((fs::path(a.out) / (model + ".responses.csv")).string(), table);
  write_text(fs::path(a.out) / (model + ".decoders.json"), summary.dump(1) + "\n");
  logger.info("decoders fitted", {{"cells", cells.size()}, {"rows", table.records.size()}, {"out", a.out}});
}

struct EvaluateArgs {
  std::string responses, out;
  int resamples = analysis::kBootstrapResamples;
};

void run_evaluate(const EvaluateArgs& a) {
  require_file(a.responses, "--responses");
  if (a.resamples < 100) throw ValidationError("--resamples must be at least 100");
  const auto table = analysis::read_responses_csv(a.responses);
  if (table.records.empty()) throw ValidationError("response table has no rows");
  const json eval = analysis::evaluate_responses(table, a.resamples);
  analysis::write_evaluation(eval, a.out);
  logger.info("evaluation written", {{"observers", eval["observers"].size()}, {"out", a.out}});
}

struct ReportArgs {
  std::string models, responses, human, out;
  int resamples = analysis::kBootstrapResamples;
};

void run_report(const ReportArgs& a) {
  require_file(a.models, "--models");
  if (!a.responses.empty()) require_file(a.responses, "--responses");
  if (!a.human.empty()) require_file(a.human, "--human");
  auto models = analysis::read_bias_csv(a.models);
  if (!a.responses.empty())
    models = analysis::join_metadata(analysis::summarize_models(analysis::read_responses_csv(a.responses)), models);
  std::optional<analysis::ResponseTable> human;
  if (!a.human.empty()) human = analysis::read_responses_csv(a.human);
  const json rep = analysis::scaling_report(models, human, a.resamples);
  analysis::write_scaling_report(rep, a.out);
  for (const auto& w : rep["warnings"]) logger.warn(w.get<std::string>());
  logger.info("report written", {{"models", models.size()}, {"out", a.out}});
}

struct ServeArgs {
  std::string dataset, logs, host = "127.0.0.1", practice;
  int port = 8080, fixation_ms = 500;
};

service::HttpServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

void run_serve(const ServeArgs& a) {
  require_dir(a.dataset, "--dataset");
  service::ServiceConfig cfg;
  cfg.dataset_dir = a.dataset;
  cfg.log_dir = a.logs;
  cfg.fixation_ms = a.fixation_ms;
  if (!a.practice.empty()) {
    require_file(a.practice, "--practice");
    cfg.practice_manifest = a.practice;
  }
  service::ExperimentService svc(cfg);
  if (!svc.has_manifest()) logger.warn("no manifest.json in --dataset; session creation will return 503");
  if (svc.replay_warnings()) logger.warn("session logs had torn tails", {{"count", svc.replay_warnings()}});
  service::HttpServer server(svc);
  const int port = server.bind(a.host, a.port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  logger.info("serving", {{"host", a.host}, {"port", port}, {"sessions", svc.session_ids().size()}});
  server.listen();
  g_server = nullptr;
  logger.info("stopped");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contour_bench: fragmented-contour stimuli, model readout and analysis"};
  app.require_subcommand(1);
  bool json_log = false;
  int jobs_flag = 0;
  app.add_flag("--json", json_log, "Log one JSON object per line on stderr");
  app.add_option("--jobs", jobs_flag, "Worker threads (default: CONTOUR_BENCH_JOBS, else logical cores)")
      ->check(CLI::PositiveNumber);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Build every stimulus condition plus manifest.json from source objects");
  g->add_option("--src", gen.src, "Directory of <category>/<object>.png cutouts")->required();
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--seed", gen.seed, "Global seed")->capture_default_str();
  g->add_option("--background", gen.background, "black or red")->capture_default_str();
  g->add_option("--pixels-per-degree", gen.ppd, "Canvas is 8 degrees on a side")->capture_default_str();
  g->add_option("--jitter", gen.jitter, "Element position jitter in pixels")->capture_default_str();
  g->add_option("--orientations", gen.orientations, "Gabor orientation bank size")->capture_default_str();
  g->add_flag("--replica", gen.replica, "Require exactly 4 objects for each of the 12 categories");
  g->add_flag("--no-sidecars", gen.no_sidecars, "Skip the per-stimulus element JSON");

  MaskArgs mask;
  auto* m = app.add_subcommand("mask", "Write 1/f noise masks");
  m->add_option("--out", mask.out, "PNG path, or a directory when --count > 1")->required();
  m->add_option("--seed", mask.seed, "Seed")->capture_default_str();
  m->add_option("--size", mask.size, "Side in pixels")->capture_default_str();
  m->add_option("--count", mask.count, "Number of masks")->capture_default_str();
  m->add_option("--exponent", mask.exponent, "Amplitude falls as 1/f^exponent")->capture_default_str();

  ZeroShotArgs zs;
  auto* z = app.add_subcommand("zero-shot", "Map 1000-way logits to the 12 categories");
  z->add_option("--logits", zs.logits, "ACTF logits file (1000 columns) with labels sidecar")->required();
  z->add_option("--mapping", zs.mapping, "ImageNet index -> category JSON")->required();
  z->add_option("--out", zs.out, "Response CSV")->required();
  z->add_option("--model", zs.model, "Model name for the id column (default: file stem)");
  z->add_option("--aggregation", zs.aggregation, "max or sum over member classes")->capture_default_str();

  FitArgs fit;
  auto* f = app.add_subcommand("fit-decoder", "Fit one linear decoder per (condition, level) and predict");
  f->add_option("--train", fit.train, "ACTF features of the decoder training stimuli")->required();
  f->add_option("--test", fit.test, "ACTF features of the evaluation stimuli")->required();
  f->add_option("--out", fit.out, "Output directory")->required();
  f->add_option("--model", fit.model, "Model name for the id column (default: test file stem)");
  f->add_option("--l2", fit.hyper.l2, "L2 strength")->capture_default_str();
  f->add_option("--max-iter", fit.hyper.max_iterations, "Iteration cap")->capture_default_str();
  f->add_option("--tolerance", fit.hyper.tolerance, "Gradient infinity-norm tolerance")->capture_default_str();
  f->add_flag("--no-standardize", fit.no_standardize, "Use raw features");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Accuracy curves, fits and integration bias from a response CSV");
  e->add_option("--responses", ev.responses, "Response CSV")->required();
  e->add_option("--out", ev.out, "Report directory")->required();
  e->add_option("--resamples", ev.resamples, "Bootstrap resamples")->capture_default_str();

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Scaling analysis across models");
  r->add_option("--models", rp.models, "Model CSV: model,arch_family,dataset_size,flops,acc_seg,acc_phos[,overall][,robustness]")
      ->required();
  r->add_option("--responses", rp.responses, "Model response CSV; accuracies are computed from it");
  r->add_option("--human", rp.human, "Human response CSV for the reference band");
  r->add_option("--out", rp.out, "Report directory")->required();
  r->add_option("--resamples", rp.resamples, "Bootstrap resamples")->capture_default_str();

  ServeArgs sv;
  auto* s = app.add_subcommand("serve", "Run the experiment service");
  s->add_option("--dataset", sv.dataset, "Generated dataset directory")->required();
  s->add_option("--logs", sv.logs, "Session log directory")->required();
  s->add_option("--host", sv.host, "Bind address")->capture_default_str();
  s->add_option("--port", sv.port, "Port (0 picks one)")->capture_default_str();
  s->add_option("--practice", sv.practice, "Familiarization manifest JSON");
  s->add_option("--fixation-ms", sv.fixation_ms, "Fixation cross duration")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    std::cerr << "error: " << ex.what() << "\n\n" << app.help();
    return 1;
  }

  logger.set_json(json_log);
  try {
    const int jobs = resolve_jobs(jobs_flag);
    omp_set_num_threads(jobs);
    if (*g) run_generate(gen, jobs);
    else if (*m) run_mask(mask);
    else if (*z) run_zero_shot(zs);
    else if (*f) run_fit_decoder(fit, jobs);
    else if (*e) run_evaluate(ev);
    else if (*r) run_report(rp);
    else if (*s) run_serve(sv);
    return 0;
  } catch (const ValidationError& ex) {
    logger.error(ex.what());
    return 1;
  } catch (const std::exception& ex) {
    logger.error(ex.what());
    return 2;
  }
}
