#include "cbench/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "cbench/categories.hpp"
#include "cbench/error.hpp"
#include "cbench/fragmenter.hpp"
#include "cbench/random.hpp"
#include "cbench/stimulus.hpp"
#include "csv.hpp"

namespace cbench::analysis {

// ---- response tables ---------------------------------------------------------

void ResponseTable::validate() const {
  for (const auto& r : records) {
    const bool fragmented = r.condition == "phosphene" || r.condition == "segment";
    if (!fragmented && r.condition != "rgb" && r.condition != "contour")
      throw ValidationError("unknown condition '" + r.condition + "'");
    if (fragmented != r.level.has_value())
      throw ValidationError("level must be present exactly for fragmented conditions (" + r.stimulus + ")");
    if (r.level) fragment::FragmentLevel check(*r.level);
    if (!is_category(r.truth)) throw ValidationError("category not in the 12-label set: " + r.truth);
    if (!is_category(r.choice)) throw ValidationError("category not in the 12-label set: " + r.choice);
    if (r.correct != (r.choice == r.truth)) throw ValidationError("correct flag disagrees with choice for " + r.stimulus);
    if (r.id.empty()) throw ValidationError("response without an id");
  }
}

namespace {

using detail::csv_field;

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void write_responses_csv(std::ostream& os, const ResponseTable& table) {
  os << kResponseHeader << "\n";
  for (const auto& r : table.records) {
    os << csv_field(r.id) << ',' << r.condition << ',' << (r.level ? std::to_string(*r.level) : "") << ','
       << csv_field(r.stimulus) << ',' << csv_field(r.truth) << ',' << csv_field(r.choice) << ','
       << (r.correct ? 1 : 0) << ',' << (r.rt_ms ? format_double(*r.rt_ms) : "") << "\n";
  }
}

ResponseTable read_responses_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("empty response CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResponseHeader) throw ValidationError("response CSV header must be '" + std::string(kResponseHeader) + "'");
  ResponseTable t;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = detail::split_csv(line);
    if (f.size() != 8) throw ValidationError("line " + std::to_string(lineno) + ": expected 8 fields");
    ResponseRecord r;
    r.id = f[0];
    r.condition = f[1];
    try {
      if (!f[2].empty()) r.level = std::stoi(f[2]);
      if (f[6] == "1" || f[6] == "true") r.correct = true;
      else if (f[6] == "0" || f[6] == "false") r.correct = false;
      else throw ValidationError("bad correct flag");
      if (!f[7].empty()) r.rt_ms = std::stod(f[7]);
    } catch (const std::logic_error&) {
      throw ValidationError("line " + std::to_string(lineno) + ": malformed number");
    }
    r.stimulus = f[3];
    r.truth = f[4];
    r.choice = f[5];
    t.records.push_back(std::move(r));
  }
  t.validate();
  return t;
}

ResponseTable read_responses_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("response CSV not found: " + path);
  return read_responses_csv(f);
}

void write_responses_csv(const std::string& path, const ResponseTable& table) {
  std::ofstream f(path);
  if (!f) throw RuntimeError("cannot write " + path);
  write_responses_csv(f, table);
}

std::string category_of_stimulus(const std::string& stimulus_id) {
  const auto spec = stimulus::parse_stimulus_id(stimulus_id);
  const auto dash = spec.source_id.find('-');
  if (dash == std::string::npos) throw ValidationError("source id without a category prefix: " + spec.source_id);
  const auto cat = category_from_slug(spec.source_id.substr(0, dash));
  if (!cat) throw ValidationError("category not in the 12-label set: " + spec.source_id.substr(0, dash));
  return *cat;
}

ResponseRecord model_response(const std::string& model, const std::string& stimulus_id, const std::string& choice) {
  const auto spec = stimulus::parse_stimulus_id(stimulus_id);
  ResponseRecord r;
  r.id = model;
  r.condition = stimulus::to_string(spec.condition);
  if (spec.level) r.level = spec.level->percent();
  r.stimulus = stimulus_id;
  r.truth = category_of_stimulus(stimulus_id);
  r.choice = choice;
  r.correct = choice == r.truth;
  return r;
}

// ---- accuracy ----------------------------------------------------------------

namespace {

// Type-7 quantile of sorted data.
double quantile(const std::vector<double>& sorted, double p) {
  const double h = (sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

constexpr int kChunk = 500;

// Resampled pooled ratios sum(num) / sum(den) over units drawn with replacement.
std::vector<double> bootstrap_ratio(const std::vector<double>& num, const std::vector<double>& den, int resamples,
                                    std::uint64_t seed) {
  std::vector<double> out(resamples);
  const int chunks = (resamples + kChunk - 1) / kChunk;
  const auto n = static_cast<std::uint64_t>(num.size());
#pragma omp parallel for schedule(static)
  for (int c = 0; c < chunks; ++c) {
    Rng rng(StableHash(seed).add(static_cast<std::uint64_t>(c)).value());
    for (int i = c * kChunk; i < std::min(resamples, (c + 1) * kChunk); ++i) {
      double a = 0, b = 0;
      for (std::uint64_t k = 0; k < n; ++k) {
        const auto j = rng.below(n);
        a += num[j], b += den[j];
      }
      out[i] = a / b;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::pair<double, double> bootstrap_mean_ci(std::span<const double> values, int resamples, std::uint64_t seed,
                                            double level) {
  if (values.empty()) throw ValidationError("bootstrap of an empty sample");
  if (resamples < 1 || !(level > 0 && level < 1)) throw ValidationError("invalid bootstrap settings");
  const auto boot = bootstrap_ratio(std::vector<double>(values.begin(), values.end()),
                                    std::vector<double>(values.size(), 1.0), resamples, seed);
  return {quantile(boot, (1 - level) / 2), quantile(boot, 1 - (1 - level) / 2)};
}

std::vector<GroupAccuracy> condition_accuracy(const ResponseTable& table, GroupBy by, int resamples,
                                              std::uint64_t seed) {
  if (table.records.empty()) throw ValidationError("empty response table");
  struct Key {
    std::string condition;
    int level;
    std::string id;
    auto operator<=>(const Key&) const = default;
  };
  std::map<Key, std::map<std::string, std::pair<double, double>>> groups;  // key -> subject -> (correct, trials)
  for (const auto& r : table.records) {
    Key k{by.condition ? r.condition : "", by.level && r.level ? *r.level : -1, by.subject ? r.id : ""};
    auto& s = groups[k][r.id];
    s.first += r.correct, s.second += 1;
  }
  std::vector<GroupAccuracy> out;
  for (const auto& [key, subjects] : groups) {
    GroupAccuracy g;
    g.condition = key.condition;
    if (key.level >= 0) g.level = key.level;
    g.id = key.id;
    std::vector<double> num, den;
    for (const auto& [id, s] : subjects) num.push_back(s.first), den.push_back(s.second);
    const double c = std::accumulate(num.begin(), num.end(), 0.0), n = std::accumulate(den.begin(), den.end(), 0.0);
    g.trials = static_cast<int>(n);
    g.subjects = static_cast<int>(subjects.size());
    g.accuracy = c / n;
    const auto boot = bootstrap_ratio(
        num, den, resamples,
        StableHash(seed).add(key.condition).add(static_cast<std::uint64_t>(key.level + 1)).add(key.id).value());
    g.ci_low = quantile(boot, 0.025);
    g.ci_high = quantile(boot, 0.975);
    out.push_back(g);
  }
  return out;
}

// ---- fits and tests ----------------------------------------------------------

double t_two_sided_p(double t, double df) {
  if (std::isnan(t) || !(df > 0)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

double FitResult::predict(double percent) const { return a * std::log(percent) + b; }

FitResult log_linear_fit(std::span<const FitPoint> points) {
  if (points.size() < 3) throw ValidationError("log-linear fit needs at least 3 points");
  const double n = static_cast<double>(points.size());
  double mx = 0, my = 0;
  for (const auto& p : points) {
    if (!(p.percent > 0)) throw ValidationError("fit percents must be positive");
    if (!std::isfinite(p.accuracy)) throw ValidationError("non-finite accuracy");
    mx += std::log(p.percent), my += p.accuracy;
  }
  mx /= n, my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : points) {
    const double dx = std::log(p.percent) - mx, dy = p.accuracy - my;
    sxx += dx * dx, sxy += dx * dy, syy += dy * dy;
  }
  if (!(sxx > 0)) throw ValidationError("log-linear fit needs at least two distinct percents");
  FitResult f;
  f.n = static_cast<int>(points.size());
  f.a = sxy / sxx;
  f.b = my - f.a * mx;
  double sse = 0;
  for (const auto& p : points) {
    const double e = p.accuracy - f.predict(p.percent);
    sse += e * e;
  }
  f.r_squared = syy > 0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 0.0;
  f.slope_se = std::sqrt(sse / (n - 2) / sxx);
  if (syy == 0) {
    f.p_value = 1.0;
  } else {
    f.p_value = f.slope_se > 0 ? t_two_sided_p(f.a / f.slope_se, n - 2) : 0.0;
  }
  return f;
}

TTest compare_slopes(const FitResult& first, const FitResult& second) {
  TTest t;
  t.df = first.n + second.n - 4;
  const double se = std::hypot(first.slope_se, second.slope_se);
  if (!(t.df > 0)) throw ValidationError("slope comparison needs at least 5 points in total");
  t.t = se > 0 ? (first.a - second.a) / se : (first.a == second.a ? 0.0 : std::copysign(INFINITY, first.a - second.a));
  t.p = first.a == second.a ? 1.0 : t_two_sided_p(t.t, t.df);
  return t;
}

namespace {

std::pair<double, double> mean_var(std::span<const double> v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, v.size() > 1 ? s / static_cast<double>(v.size() - 1) : 0.0};
}

}  // namespace

TTest welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ValidationError("Welch test needs at least 2 values per group");
  const auto [ma, va] = mean_var(a);
  const auto [mb, vb] = mean_var(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;
  if (!(sa + sb > 0)) throw ValidationError("degenerate groups");
  TTest t;
  t.t = (ma - mb) / std::sqrt(sa + sb);
  t.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1) + sb * sb / (nb - 1));
  t.p = t_two_sided_p(t.t, t.df);
  return t;
}

double integration_bias(double acc_segments, double acc_phosphenes) {
  if (!(acc_segments >= 0 && acc_segments <= 1) || !(acc_phosphenes >= 0 && acc_phosphenes <= 1))
    throw ValidationError("accuracies must lie in [0, 1]");
  return acc_segments - acc_phosphenes;
}

EffectSize cohens_d(std::span<const double> phos, std::span<const double> seg) {
  if (phos.size() < 2 || seg.size() < 2) throw ValidationError("Cohen's d needs at least 2 values per group");
  const auto [m1, v1] = mean_var(phos);
  const auto [m2, v2] = mean_var(seg);
  EffectSize e;
  e.n1 = static_cast<int>(phos.size());
  e.n2 = static_cast<int>(seg.size());
  e.pooled_sd = std::sqrt(((e.n1 - 1) * v1 + (e.n2 - 1) * v2) / (e.n1 + e.n2 - 2));
  if (!(e.pooled_sd > 0)) throw ValidationError("degenerate groups");
  e.d = (m1 - m2) / e.pooled_sd;
  return e;
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("pearson inputs differ in length");
  if (x.size() < 3) throw ValidationError("pearson needs at least 3 points");
  const auto [mx, vx] = mean_var(x);
  const auto [my, vy] = mean_var(y);
  if (!(vx > 0) || !(vy > 0)) throw ValidationError("pearson input is constant");
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy, sxx += dx * dx, syy += dy * dy;
  }
  Correlation c;
  c.n = static_cast<int>(x.size());
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = c.n - 2;
  c.p = std::abs(c.r) == 1.0 ? 0.0 : t_two_sided_p(c.r * std::sqrt(df / (1 - c.r * c.r)), df);
  return c;
}

// ---- regression --------------------------------------------------------------

double mean_abs(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0;
  for (double x : v) s += std::abs(x);
  return s / static_cast<double>(v.size());
}

RegressionResult multiple_regression(const std::vector<DesignColumn>& design, std::span<const double> y) {
  const auto n = static_cast<Eigen::Index>(y.size());
  const auto p = static_cast<Eigen::Index>(design.size()) + 1;
  if (n <= p) throw ValidationError("regression needs more observations than columns + 1");
  Eigen::MatrixXd x(n, p);
  x.col(0).setOnes();
  std::vector<std::string> names = {"intercept"};
  for (Eigen::Index j = 1; j < p; ++j) {
    const auto& c = design[j - 1];
    if (static_cast<Eigen::Index>(c.values.size()) != n) throw ValidationError("column '" + c.name + "' has the wrong length");
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = c.values[i];
    names.push_back(c.name);
  }
  if (!x.allFinite()) throw ValidationError("non-finite design value");
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  if (!yv.allFinite()) throw ValidationError("non-finite response value");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    // Columns past the rank in pivot order are explained by the others; name
    // each together with the columns it depends on.
    const auto perm = qr.colsPermutation().indices();
    const Eigen::Index rank = qr.rank();
    Eigen::MatrixXd basis(n, rank);
    for (Eigen::Index k = 0; k < rank; ++k) basis.col(k) = x.col(perm[k]);
    std::vector<std::string> involved;
    auto note = [&](const std::string& s) {
      if (std::find(involved.begin(), involved.end(), s) == involved.end()) involved.push_back(s);
    };
    for (Eigen::Index k = rank; k < p; ++k) {
      note(names[perm[k]]);
      const Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(x.col(perm[k]));
      for (Eigen::Index m = 0; m < rank; ++m)
        if (std::abs(coef[m]) > 1e-8) note(names[perm[m]]);
    }
    std::string list;
    for (const auto& s : involved) list += (list.empty() ? "" : ", ") + s;
    throw ValidationError("design is rank deficient; collinear columns: " + list);
  }

  const Eigen::VectorXd beta = qr.solve(yv);
  const Eigen::VectorXd resid = yv - x * beta;
  RegressionResult r;
  r.names = names;
  r.df = static_cast<int>(n - p);
  r.sigma2 = resid.squaredNorm() / r.df;
  const double sst = (yv.array() - yv.mean()).square().sum();
  r.r_squared = sst > 0 ? 1.0 - resid.squaredNorm() / sst : 0.0;

  // (X'X)^-1 = P R^-1 R^-T P'.
  const Eigen::MatrixXd rr = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd rinv = rr.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd inv_perm = rinv * rinv.transpose();
  Eigen::MatrixXd cov(p, p);
  const auto perm = qr.colsPermutation().indices();
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) cov(perm[i], perm[j]) = inv_perm(i, j);

  std::vector<double> arch_t;
  for (Eigen::Index j = 0; j < p; ++j) {
    r.estimates.push_back(beta[j]);
    const double se = std::sqrt(std::max(0.0, r.sigma2 * cov(j, j)));
    r.std_errors.push_back(se);
    const double t = se > 0 ? beta[j] / se
                            : (beta[j] == 0 ? std::numeric_limits<double>::quiet_NaN()
                                            : std::copysign(std::numeric_limits<double>::infinity(), beta[j]));
    r.t_values.push_back(t);
    r.p_values.push_back(t_two_sided_p(t, r.df));
    if (j > 0 && design[j - 1].architecture) arch_t.push_back(t);
  }
  r.architecture_mean_abs_t = mean_abs(arch_t);
  return r;
}

}  // namespace cbench::analysis
