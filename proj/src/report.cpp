#include "cbench/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "cbench/error.hpp"
#include "cbench/random.hpp"
#include "csv.hpp"

namespace cbench::analysis {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<double> BiasSummary::integration_bias() const {
  if (!acc_segments || !acc_phosphenes) return std::nullopt;
  return analysis::integration_bias(*acc_segments, *acc_phosphenes);
}

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
json num(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }
json unavailable(const std::string& why) { return {{"unavailable", why}}; }

using detail::split_csv;

std::optional<double> cell(const std::vector<std::string>& f, int idx, const std::string& what, int lineno) {
  if (idx < 0 || idx >= static_cast<int>(f.size()) || f[idx].empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    const double v = std::stod(f[idx], &pos);
    if (pos != f[idx].size() || !std::isfinite(v)) throw std::invalid_argument(what);
    return v;
  } catch (const std::logic_error&) {
    throw ValidationError("line " + std::to_string(lineno) + ": bad " + what + " '" + f[idx] + "'");
  }
}

json fit_json(const FitResult& f) {
  return {{"a", num(f.a)}, {"b", num(f.b)}, {"r_squared", num(f.r_squared)}, {"p_value", num(f.p_value)},
          {"slope_se", num(f.slope_se)}, {"n", f.n}};
}

json group_json(const GroupAccuracy& g) {
  json j = {{"accuracy", num(g.accuracy)}, {"ci_low", num(g.ci_low)}, {"ci_high", num(g.ci_high)},
            {"trials", g.trials}, {"subjects", g.subjects}};
  if (g.level) j["level"] = *g.level;
  return j;
}

ResponseTable filter(const ResponseTable& t, const std::function<bool(const ResponseRecord&)>& keep) {
  ResponseTable out;
  for (const auto& r : t.records)
    if (keep(r)) out.records.push_back(r);
  return out;
}

// Curve points + fit for one fragmented condition (or both pooled).
json curve(const ResponseTable& t, int resamples, std::optional<FitResult>* fit_out) {
  const auto groups = condition_accuracy(t, {false, true, false}, resamples);
  json pts = json::array();
  std::vector<FitPoint> fp;
  for (const auto& g : groups) {
    pts.push_back(group_json(g));
    fp.push_back({static_cast<double>(*g.level), g.accuracy});
  }
  json j = {{"points", pts}};
  if (fp.size() >= 3) {
    const FitResult f = log_linear_fit(fp);
    j["fit"] = fit_json(f);
    if (fit_out) *fit_out = f;
  } else {
    j["fit"] = unavailable("fewer than 3 levels");
  }
  return j;
}

// Percentile CI of mean(b) - mean(a), resampling each group independently.
std::pair<double, double> bootstrap_difference(const std::vector<double>& a, const std::vector<double>& b,
                                               int resamples, std::uint64_t seed) {
  std::vector<double> d(resamples);
  Rng rng(seed);
  for (int i = 0; i < resamples; ++i) {
    double sa = 0, sb = 0;
    for (std::size_t k = 0; k < a.size(); ++k) sa += a[rng.below(a.size())];
    for (std::size_t k = 0; k < b.size(); ++k) sb += b[rng.below(b.size())];
    d[i] = sb / b.size() - sa / a.size();
  }
  std::sort(d.begin(), d.end());
  auto q = [&](double p) {
    const double h = (d.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(h);
    return d[lo] + (h - lo) * (d[std::min(lo + 1, d.size() - 1)] - d[lo]);
  };
  return {q(0.025), q(0.975)};
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

// ---- bias CSV ----------------------------------------------------------------

std::vector<BiasSummary> read_bias_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("summary CSV not found: " + path);
  std::string line;
  if (!std::getline(f, line)) throw ValidationError("empty summary CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  const std::vector<std::string> required = {"model", "arch_family", "dataset_size", "flops", "acc_seg", "acc_phos"};
  if (header.size() < required.size() || !std::equal(required.begin(), required.end(), header.begin()))
    throw ValidationError("summary CSV header must start with model,arch_family,dataset_size,flops,acc_seg,acc_phos");
  auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int overall = col("overall"), robustness = col("robustness");
  std::vector<BiasSummary> out;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) throw ValidationError("line " + std::to_string(lineno) + ": wrong field count");
    BiasSummary s;
    s.model = fields[0];
    s.arch_family = fields[1];
    s.dataset_size = cell(fields, 2, "dataset_size", lineno);
    s.flops = cell(fields, 3, "flops", lineno);
    s.acc_segments = cell(fields, 4, "acc_seg", lineno);
    s.acc_phosphenes = cell(fields, 5, "acc_phos", lineno);
    s.overall_accuracy = cell(fields, overall, "overall", lineno);
    s.robustness = cell(fields, robustness, "robustness", lineno);
    for (const auto& a : {s.acc_segments, s.acc_phosphenes, s.overall_accuracy})
      if (a && (*a < 0 || *a > 1)) throw ValidationError("line " + std::to_string(lineno) + ": accuracy outside [0, 1]");
    if (s.model.empty()) throw ValidationError("line " + std::to_string(lineno) + ": empty model name");
    out.push_back(std::move(s));
  }
  return out;
}

void write_bias_csv(const std::string& path, const std::vector<BiasSummary>& rows) {
  std::ofstream f(path);
  if (!f) throw RuntimeError("cannot write " + path);
  auto v = [](const std::optional<double>& x) {
    if (!x) return std::string();
    std::ostringstream os;
    os.precision(17);
    os << *x;
    return os.str();
  };
  f << "model,arch_family,dataset_size,flops,acc_seg,acc_phos,overall,robustness\n";
  for (const auto& r : rows)
    f << detail::csv_field(r.model) << ',' << detail::csv_field(r.arch_family) << ',' << v(r.dataset_size) << ',' << v(r.flops) << ',' << v(r.acc_segments)
      << ',' << v(r.acc_phosphenes) << ',' << v(r.overall_accuracy) << ',' << v(r.robustness) << "\n";
}

std::vector<BiasSummary> summarize_models(const ResponseTable& table) {
  struct Acc {
    double seg = 0, seg_n = 0, phos = 0, phos_n = 0, all = 0, all_n = 0;
  };
  std::map<std::string, Acc> by_id;
  for (const auto& r : table.records) {
    auto& a = by_id[r.id];
    a.all += r.correct, a.all_n += 1;
    if (r.condition == "segment") a.seg += r.correct, a.seg_n += 1;
    if (r.condition == "phosphene") a.phos += r.correct, a.phos_n += 1;
  }
  std::vector<BiasSummary> out;
  for (const auto& [id, a] : by_id) {
    BiasSummary s;
    s.model = id;
    if (a.seg_n) s.acc_segments = a.seg / a.seg_n;
    if (a.phos_n) s.acc_phosphenes = a.phos / a.phos_n;
    s.overall_accuracy = a.all / a.all_n;
    out.push_back(s);
  }
  return out;
}

std::vector<BiasSummary> join_metadata(std::vector<BiasSummary> measured, const std::vector<BiasSummary>& metadata) {
  for (auto& m : measured)
    for (const auto& meta : metadata)
      if (meta.model == m.model) {
        m.arch_family = meta.arch_family;
        m.dataset_size = meta.dataset_size;
        m.flops = meta.flops;
        m.robustness = meta.robustness;
      }
  return measured;
}

// ---- response summaries ------------------------------------------------------

json summarize_responses(const ResponseTable& table, int resamples) {
  if (table.records.empty()) throw ValidationError("empty response table");
  json j;
  std::optional<FitResult> fit_phos, fit_seg;
  json curves = json::object();
  for (const char* cond : {"phosphene", "segment"}) {
    const auto sub = filter(table, [&](const ResponseRecord& r) { return r.condition == cond; });
    if (sub.records.empty()) continue;
    curves[cond] = curve(sub, resamples, std::string(cond) == "phosphene" ? &fit_phos : &fit_seg);
  }
  j["curves"] = curves;

  const auto fragmented = filter(table, [](const ResponseRecord& r) { return r.level.has_value(); });
  if (!fragmented.records.empty())
    j["pooled"] = curve(fragmented, resamples, nullptr);
  else
    j["pooled"] = unavailable("no fragmented trials");

  if (fit_phos && fit_seg) {
    const TTest t = compare_slopes(*fit_seg, *fit_phos);
    j["slope_difference"] = {{"t", num(t.t)}, {"df", t.df}, {"p", num(t.p)}};
  } else {
    j["slope_difference"] = unavailable("needs fits for both phosphenes and segments");
  }

  for (const char* cond : {"contour", "rgb"}) {
    const auto sub = filter(table, [&](const ResponseRecord& r) { return r.condition == cond; });
    if (sub.records.empty()) {
      j[cond] = unavailable("no trials");
      continue;
    }
    j[cond] = group_json(condition_accuracy(sub, {false, false, false}, resamples).front());
  }

  // Per-subject fragmented accuracies by condition.
  std::map<std::string, std::pair<double, double>> phos, seg;
  for (const auto& r : fragmented.records) {
    auto& m = r.condition == "phosphene" ? phos : seg;
    m[r.id].first += r.correct, m[r.id].second += 1;
  }
  std::vector<double> phos_acc, seg_acc;
  for (const auto& [id, v] : phos) phos_acc.push_back(v.first / v.second);
  for (const auto& [id, v] : seg) seg_acc.push_back(v.first / v.second);

  if (phos_acc.empty() || seg_acc.empty()) {
    j["integration_bias"] = unavailable("needs both phosphene and segment trials");
    j["cohens_d"] = unavailable("needs both phosphene and segment trials");
  } else {
    const double bias = integration_bias(mean(seg_acc), mean(phos_acc));
    const auto ci = bootstrap_difference(phos_acc, seg_acc, resamples, kBootstrapSeed);
    j["integration_bias"] = {{"value", num(bias)}, {"ci_low", num(ci.first)}, {"ci_high", num(ci.second)},
                             {"phosphene_subjects", phos_acc.size()}, {"segment_subjects", seg_acc.size()}};
    try {
      const EffectSize e = cohens_d(phos_acc, seg_acc);
      j["cohens_d"] = {{"d", num(e.d)}, {"n_phosphene", e.n1}, {"n_segment", e.n2}, {"pooled_sd", num(e.pooled_sd)}};
    } catch (const ValidationError& e) {
      j["cohens_d"] = unavailable(e.what());
    }
  }
  return j;
}

json evaluate_responses(const ResponseTable& table, int resamples) {
  table.validate();
  json observers = json::array();
  std::set<std::string> ids;
  for (const auto& r : table.records) ids.insert(r.id);
  for (const auto& id : ids) {
    const auto sub = filter(table, [&](const ResponseRecord& r) { return r.id == id; });
    json o = {{"id", id}, {"trials", sub.records.size()}};
    json acc = json::array();
    for (const auto& g : condition_accuracy(sub, {true, true, false}, resamples)) {
      json e = group_json(g);
      e["condition"] = g.condition;
      acc.push_back(e);
    }
    o["accuracy"] = acc;
    const auto s = summarize_models(sub).front();
    o["acc_segments"] = num(s.acc_segments);
    o["acc_phosphenes"] = num(s.acc_phosphenes);
    o["overall_accuracy"] = num(s.overall_accuracy);
    o["integration_bias"] = num(s.integration_bias());
    observers.push_back(o);
  }
  return {{"observers", observers}, {"summary", summarize_responses(table, resamples)}};
}

// ---- scaling report ----------------------------------------------------------

json scaling_report(const std::vector<BiasSummary>& models, const std::optional<ResponseTable>& human, int resamples) {
  json warnings = json::array();
  json rows = json::array();
  std::vector<BiasSummary> usable;
  for (const auto& m : models) {
    const auto bias = m.integration_bias();
    rows.push_back({{"model", m.model}, {"arch_family", m.arch_family}, {"dataset_size", num(m.dataset_size)},
                    {"flops", num(m.flops)}, {"acc_seg", num(m.acc_segments)}, {"acc_phos", num(m.acc_phosphenes)},
                    {"integration_bias", num(bias)}, {"overall_accuracy", num(m.overall_accuracy)},
                    {"robustness", num(m.robustness)}});
    if (!bias)
      warnings.push_back(m.model + ": missing segment or phosphene accuracy, excluded");
    else
      usable.push_back(m);
  }

  auto correlate = [&](const std::string& what, auto x_of) -> json {
    std::vector<double> x, y;
    for (const auto& m : usable) {
      const std::optional<double> v = x_of(m);
      if (v && std::isfinite(*v)) x.push_back(*v), y.push_back(*m.integration_bias());
    }
    if (x.size() < 3) return unavailable("fewer than 3 models with " + what);
    try {
      const Correlation c = pearson(x, y);
      return {{"r", num(c.r)}, {"p", num(c.p)}, {"n", c.n}};
    } catch (const ValidationError&) {
      return unavailable("zero variance in " + what + " or integration bias");
    }
  };
  auto log10_of = [](const std::optional<double>& v) -> std::optional<double> {
    if (!v || !(*v > 0)) return std::nullopt;
    return std::log10(*v);
  };
  json corr;
  corr["bias_vs_overall_accuracy"] = correlate("overall accuracy", [](const BiasSummary& m) { return m.overall_accuracy; });
  corr["bias_vs_log10_dataset_size"] = correlate("dataset size", [&](const BiasSummary& m) { return log10_of(m.dataset_size); });
  corr["bias_vs_log10_flops"] = correlate("flops", [&](const BiasSummary& m) { return log10_of(m.flops); });
  corr["bias_vs_robustness"] = correlate("robustness", [](const BiasSummary& m) { return m.robustness; });

  // Bias ~ log10 dataset size + log10 FLOPs + architecture dummies.
  std::vector<BiasSummary> reg_rows;
  for (const auto& m : usable) {
    if (log10_of(m.dataset_size) && log10_of(m.flops) && !m.arch_family.empty())
      reg_rows.push_back(m);
    else
      warnings.push_back(m.model + ": missing dataset size, flops or family, excluded from regression");
  }
  json regression;
  try {
    std::set<std::string> families;
    for (const auto& m : reg_rows) families.insert(m.arch_family);
    std::vector<DesignColumn> design(2);
    design[0].name = "log10_dataset_size";
    design[1].name = "log10_flops";
    std::vector<double> y;
    for (const auto& m : reg_rows) {
      design[0].values.push_back(*log10_of(m.dataset_size));
      design[1].values.push_back(*log10_of(m.flops));
      y.push_back(*m.integration_bias());
    }
    // First family alphabetically is the reference level.
    for (auto it = std::next(families.begin(), families.empty() ? 0 : 1); it != families.end(); ++it) {
      DesignColumn c{"arch:" + *it, {}, true};
      for (const auto& m : reg_rows) c.values.push_back(m.arch_family == *it ? 1.0 : 0.0);
      design.push_back(std::move(c));
    }
    const RegressionResult r = multiple_regression(design, y);
    json coef = json::array();
    for (std::size_t i = 0; i < r.names.size(); ++i)
      coef.push_back({{"name", r.names[i]}, {"estimate", num(r.estimates[i])}, {"std_error", num(r.std_errors[i])},
                      {"t", num(r.t_values[i])}, {"p", num(r.p_values[i])}});
    regression = {{"coefficients", coef}, {"architecture_mean_abs_t", num(r.architecture_mean_abs_t)},
                  {"r_squared", num(r.r_squared)}, {"df", r.df}, {"n", y.size()}};
  } catch (const ValidationError& e) {
    regression = unavailable(e.what());
  }

  json report = {{"models", rows}, {"correlations", corr}, {"regression", regression}};
  if (human && !human->records.empty()) {
    human->validate();
    report["human"] = summarize_responses(*human, resamples);
    report["human_band"] = report["human"]["integration_bias"];
  } else {
    report["human"] = unavailable("no human responses supplied");
    report["human_band"] = unavailable("no human responses supplied");
  }
  report["warnings"] = warnings;
  return report;
}

// ---- SVG ---------------------------------------------------------------------

namespace {

class Svg {
 public:
  Svg(std::string title, std::string xlabel, std::string ylabel, double x0, double x1, double y0, double y1,
      bool log_x)
      : title_(std::move(title)), xl_(std::move(xlabel)), yl_(std::move(ylabel)), x0_(x0), x1_(x1), y0_(y0), y1_(y1),
        log_x_(log_x) {
    if (x1_ <= x0_) x1_ = x0_ + 1;
    if (y1_ <= y0_) y1_ = y0_ + 1;
  }

  void band(double ylo, double yhi, const std::string& color) {
    body_ << "<rect x='" << px(x0_) << "' y='" << py(yhi) << "' width='" << px(x1_) - px(x0_) << "' height='"
          << py(ylo) - py(yhi) << "' fill='" << color << "' opacity='0.25'/>\n";
  }
  void line(const std::vector<std::pair<double, double>>& pts, const std::string& color, bool dashed = false) {
    if (pts.size() < 2) return;
    body_ << "<polyline fill='none' stroke='" << color << "' stroke-width='2'" << (dashed ? " stroke-dasharray='5,4'" : "")
          << " points='";
    for (const auto& [x, y] : pts) body_ << px(x) << ',' << py(y) << ' ';
    body_ << "'/>\n";
  }
  void points(const std::vector<std::pair<double, double>>& pts, const std::string& color) {
    for (const auto& [x, y] : pts)
      body_ << "<circle cx='" << px(x) << "' cy='" << py(y) << "' r='3.5' fill='" << color << "'/>\n";
  }
  void error_bar(double x, double lo, double hi, const std::string& color) {
    body_ << "<line x1='" << px(x) << "' x2='" << px(x) << "' y1='" << py(lo) << "' y2='" << py(hi) << "' stroke='"
          << color << "'/>\n";
  }
  void legend(const std::string& text, const std::string& color) {
    body_ << "<text x='" << kLeft + 10 << "' y='" << kTop + 16 + 16 * legends_++ << "' fill='" << color
          << "' font-size='12'>" << text << "</text>\n";
  }

  std::string str() const {
    std::ostringstream os;
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH << "' font-family='sans-serif'>\n"
       << "<rect width='100%' height='100%' fill='white'/>\n"
       << "<text x='" << kW / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title_ << "</text>\n"
       << "<rect x='" << kLeft << "' y='" << kTop << "' width='" << kW - kLeft - kRight << "' height='"
       << kH - kTop - kBottom << "' fill='none' stroke='black'/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double y = y0_ + (y1_ - y0_) * i / 4;
      os << "<text x='" << kLeft - 6 << "' y='" << py(y) + 4 << "' text-anchor='end' font-size='11'>" << round2(y)
         << "</text>\n";
      const double xv = log_x_ ? std::exp(std::log(x0_) + (std::log(x1_) - std::log(x0_)) * i / 4) : x0_ + (x1_ - x0_) * i / 4;
      os << "<text x='" << px(xv) << "' y='" << kH - kBottom + 16 << "' text-anchor='middle' font-size='11'>"
         << round2(xv) << "</text>\n";
    }
    os << "<text x='" << kW / 2 << "' y='" << kH - 8 << "' text-anchor='middle' font-size='12'>" << xl_ << "</text>\n"
       << "<text x='14' y='" << kH / 2 << "' text-anchor='middle' font-size='12' transform='rotate(-90 14 " << kH / 2
       << ")'>" << yl_ << "</text>\n"
       << body_.str() << "</svg>\n";
    return os.str();
  }

 private:
  static constexpr int kW = 520, kH = 380, kLeft = 60, kRight = 20, kTop = 34, kBottom = 50;

  double px(double x) const {
    const double t = log_x_ ? (std::log(x) - std::log(x0_)) / (std::log(x1_) - std::log(x0_)) : (x - x0_) / (x1_ - x0_);
    return kLeft + t * (kW - kLeft - kRight);
  }
  double py(double y) const { return kH - kBottom - (y - y0_) / (y1_ - y0_) * (kH - kTop - kBottom); }
  static std::string round2(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
  }

  std::string title_, xl_, yl_;
  double x0_, x1_, y0_, y1_;
  bool log_x_;
  std::ostringstream body_;
  int legends_ = 0;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw RuntimeError("cannot write " + path.string());
  f << text;
}

std::string accuracy_svg(const json& summary, const std::string& title) {
  Svg svg(title, "elements retained (%)", "accuracy", 10, 100, 0, 1, true);
  const std::map<std::string, std::string> colors = {{"phosphene", "#1f77b4"}, {"segment", "#d62728"}};
  for (const auto& [cond, color] : colors) {
    if (!summary.at("curves").contains(cond)) continue;
    const json& c = summary["curves"][cond];
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : c["points"]) {
      if (p["accuracy"].is_null()) continue;
      pts.emplace_back(p["level"].get<double>(), p["accuracy"].get<double>());
      svg.error_bar(p["level"].get<double>(), p["ci_low"].get<double>(), p["ci_high"].get<double>(), color);
    }
    svg.points(pts, color);
    if (c["fit"].contains("a") && !c["fit"]["a"].is_null()) {
      std::vector<std::pair<double, double>> fit;
      const double a = c["fit"]["a"], b = c["fit"]["b"];
      for (int k = 0; k <= 20; ++k) {
        const double x = 12.0 * std::pow(100.0 / 12.0, k / 20.0);
        fit.emplace_back(x, std::clamp(a * std::log(x) + b, 0.0, 1.0));
      }
      svg.line(fit, color, true);
    }
    svg.legend(cond, color);
  }
  svg.line({{10, 1.0 / 12}, {100, 1.0 / 12}}, "#888888", true);
  return svg.str();
}

std::string scatter_svg(const json& report, const std::string& field, bool log_x, const std::string& title,
                        const std::string& xlabel) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& m : report["models"]) {
    if (m[field].is_null() || m["integration_bias"].is_null()) continue;
    double x = m[field].get<double>();
    if (log_x && !(x > 0)) continue;
    pts.emplace_back(x, m["integration_bias"].get<double>());
  }
  double x0 = 0, x1 = 1, y0 = -0.2, y1 = 0.4;
  if (!pts.empty()) {
    x0 = x1 = pts[0].first;
    for (const auto& [x, y] : pts) x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
    if (log_x) x0 /= 2, x1 *= 2;
    else {
      const double pad = 0.1 * (x1 - x0 + 1e-9);
      x0 -= pad, x1 += pad;
    }
  }
  if (report["human_band"].contains("ci_low")) {
    y0 = std::min(y0, report["human_band"]["ci_low"].get<double>());
    y1 = std::max(y1, report["human_band"]["ci_high"].get<double>());
  }
  Svg svg(title, xlabel, "integration bias", x0, x1, y0, y1, log_x);
  if (report["human_band"].contains("ci_low")) {
    svg.band(report["human_band"]["ci_low"], report["human_band"]["ci_high"], "#2ca02c");
    svg.legend("human 95% CI", "#2ca02c");
  }
  svg.line({{x0, 0.0}, {x1, 0.0}}, "#888888", true);
  svg.points(pts, "#9467bd");
  return svg.str();
}

}  // namespace

void write_evaluation(const json& evaluation, const fs::path& out) {
  fs::create_directories(out);
  write_text(out / "evaluation.json", evaluation.dump(1) + "\n");
  write_text(out / "accuracy.svg", accuracy_svg(evaluation.at("summary"), "Accuracy by fragmentation level"));
}

void write_scaling_report(const json& report, const fs::path& out) {
  fs::create_directories(out);
  write_text(out / "scaling_report.json", report.dump(1) + "\n");
  if (report.at("human").contains("curves"))
    write_text(out / "human_accuracy.svg", accuracy_svg(report["human"], "Human accuracy by fragmentation level"));
  write_text(out / "bias_vs_accuracy.svg",
             scatter_svg(report, "overall_accuracy", false, "Integration bias vs accuracy", "overall accuracy"));
  write_text(out / "bias_vs_dataset_size.svg",
             scatter_svg(report, "dataset_size", true, "Integration bias vs training set size", "training images"));
}

}  // namespace cbench::analysis
