#include "cbench/readout.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>
#include <omp.h>

#include "cbench/error.hpp"
#include "cbench/stimulus.hpp"

namespace cbench::readout {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- mapping -----------------------------------------------------------------

CategoryMapping::CategoryMapping(std::array<std::optional<int>, kImageNetClasses> entries) : entries_(entries) {
  validate();
}

CategoryMapping CategoryMapping::parse(const std::string& text) {
  std::array<std::optional<int>, kImageNetClasses> entries{};
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("mapping is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("mapping must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    std::size_t pos = 0;
    int idx = -1;
    try {
      idx = std::stoi(key, &pos);
    } catch (const std::logic_error&) {
    }
    if (pos != key.size() || idx < 0 || idx >= kImageNetClasses)
      throw ValidationError("mapping key '" + key + "' is not a class index below 1000");
    if (value.is_null()) continue;
    if (!value.is_string()) throw ValidationError("mapping value for " + key + " must be a string or null");
    const auto cat = category_index(value.get<std::string>());
    if (!cat) throw ValidationError("category not in the 12-label set: " + value.get<std::string>());
    entries[idx] = *cat;
  }
  return CategoryMapping(entries);
}

CategoryMapping CategoryMapping::load(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("mapping not found: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

std::vector<int> CategoryMapping::members(int category) const {
  std::vector<int> out;
  for (int i = 0; i < kImageNetClasses; ++i)
    if (entries_[i] == category) out.push_back(i);
  return out;
}

void CategoryMapping::validate() const {
  std::array<int, kCategoryCount> seen{};
  for (const auto& e : entries_) {
    if (!e) continue;
    if (*e < 0 || *e >= kCategoryCount) throw ValidationError("mapping entry outside the 12 categories");
    ++seen[*e];
  }
  std::string missing;
  for (int c = 0; c < kCategoryCount; ++c)
    if (!seen[c]) missing += (missing.empty() ? "" : ", ") + std::string(kCategories[c]);
  if (!missing.empty()) throw ValidationError("mapping has no classes for: " + missing);
}

// ---- zero-shot ---------------------------------------------------------------

std::array<double, kCategoryCount> zero_shot_scores(std::span<const double> logits, const CategoryMapping& mapping,
                                                    Aggregation agg) {
  if (logits.size() != kImageNetClasses) throw ValidationError("zero-shot needs exactly 1000 logits");
  double top = -std::numeric_limits<double>::infinity();
  for (double v : logits) {
    if (!std::isfinite(v)) throw ValidationError("non-finite logit");
    top = std::max(top, v);
  }
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(logits[i] - top);
  for (double& v : p) v /= z;
  return aggregate_probabilities(p, mapping, agg);
}

std::array<double, kCategoryCount> aggregate_probabilities(std::span<const double> probabilities,
                                                           const CategoryMapping& mapping, Aggregation agg) {
  if (probabilities.size() != kImageNetClasses) throw ValidationError("expected 1000 class probabilities");
  std::array<double, kCategoryCount> score{};
  for (int i = 0; i < kImageNetClasses; ++i) {
    const auto c = mapping.category_of(i);
    if (!c) continue;
    score[*c] = agg == Aggregation::max ? std::max(score[*c], probabilities[i]) : score[*c] + probabilities[i];
  }
  return score;
}

std::string best_category(const std::array<double, kCategoryCount>& score) {
  std::string_view best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (auto label : categories_alphabetical()) {
    const double s = score[*category_index(label)];
    if (s > best_score) best = label, best_score = s;
  }
  return std::string(best);
}

std::string zero_shot_predict(std::span<const double> logits, const CategoryMapping& mapping, Aggregation agg) {
  return best_category(zero_shot_scores(logits, mapping, agg));
}

// ---- activations -------------------------------------------------------------

void ActivationSet::validate() const {
  if (static_cast<std::uint64_t>(rows) * cols != values.size())
    throw ValidationError("activation value count does not match rows x cols");
  for (float v : values)
    if (!std::isfinite(v)) throw ValidationError("non-finite activation");
  if (!ids.empty() && ids.size() != rows) throw ValidationError("ids length does not match rows");
  if (labels && labels->size() != rows) throw ValidationError("labels length does not match rows");
}

ActivationSet ActivationSet::select(const std::vector<std::size_t>& indices) const {
  ActivationSet out;
  out.rows = static_cast<std::uint32_t>(indices.size());
  out.cols = cols;
  if (labels) out.labels.emplace();
  for (std::size_t i : indices) {
    if (i >= rows) throw ValidationError("row index out of range");
    const auto r = row(i);
    out.values.insert(out.values.end(), r.begin(), r.end());
    if (!ids.empty()) out.ids.push_back(ids[i]);
    if (labels) out.labels->push_back((*labels)[i]);
  }
  return out;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

}  // namespace

void write_actf(const fs::path& path, const ActivationSet& set) {
  if (static_cast<std::uint64_t>(set.rows) * set.cols != set.values.size())
    throw ValidationError("activation value count does not match rows x cols");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeError("cannot write " + path.string());
  f.write("ACTF", 4);
  put_u32(f, 1);
  put_u32(f, set.rows);
  put_u32(f, set.cols);
  for (float v : set.values) put_u32(f, std::bit_cast<std::uint32_t>(v));
  if (!f) throw RuntimeError("write failed: " + path.string());
}

ActivationSet read_actf_matrix(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("activation file not found: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::string(bytes.begin(), bytes.begin() + 4) != "ACTF")
    throw ValidationError("not an ACTF file: " + path.string());
  if (get_u32(&bytes[4]) != 1) throw ValidationError("unsupported ACTF version in " + path.string());
  ActivationSet set;
  set.rows = get_u32(&bytes[8]);
  set.cols = get_u32(&bytes[12]);
  const std::uint64_t n = static_cast<std::uint64_t>(set.rows) * set.cols;
  if (bytes.size() != 16 + 4 * n) throw ValidationError("ACTF payload size mismatch in " + path.string());
  set.values.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) set.values[i] = std::bit_cast<float>(get_u32(&bytes[16 + 4 * i]));
  return set;
}

fs::path labels_path_for(const fs::path& actf) {
  std::string name = actf.filename().string();
  for (const std::string suffix : {".actf", ".logits"})
    if (name.size() > suffix.size() && name.ends_with(suffix)) name.resize(name.size() - suffix.size());
  return actf.parent_path() / (name + ".labels.json");
}

void write_labels(const fs::path& path, const ActivationSet& set) {
  json j = {{"ids", set.ids}, {"labels", set.labels ? json(*set.labels) : json(nullptr)}};
  std::ofstream f(path);
  if (!f) throw RuntimeError("cannot write " + path.string());
  f << j.dump(1) << "\n";
}

ActivationSet read_activations(const fs::path& actf) {
  ActivationSet set = read_actf_matrix(actf);
  const fs::path side = labels_path_for(actf);
  std::ifstream f(side);
  if (!f) throw ValidationError("labels sidecar not found: " + side.string());
  try {
    const json j = json::parse(f);
    set.ids = j.at("ids").get<std::vector<std::string>>();
    if (!j.at("labels").is_null()) set.labels = j.at("labels").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ValidationError("malformed labels sidecar " + side.string() + ": " + e.what());
  }
  if (set.ids.size() != set.rows) throw ValidationError("sidecar ids do not match ACTF rows in " + side.string());
  set.validate();
  return set;
}

Eigen::MatrixXd to_matrix(const ActivationSet& set) {
  Eigen::MatrixXd x(set.rows, set.cols);
  for (std::uint32_t i = 0; i < set.rows; ++i)
    for (std::uint32_t j = 0; j < set.cols; ++j) x(i, j) = set.values[static_cast<std::size_t>(i) * set.cols + j];
  return x;
}

// ---- decoder -----------------------------------------------------------------

void DecoderModel::validate() const {
  const auto k = static_cast<Eigen::Index>(classes.size());
  if (k < 2) throw ValidationError("decoder needs at least two classes");
  if (weights.rows() != k || biases.size() != k || mean.size() != weights.cols() || scale.size() != weights.cols())
    throw ValidationError("decoder dimensions are inconsistent");
  for (Eigen::Index i = 0; i < scale.size(); ++i)
    if (!(scale[i] > 0)) throw ValidationError("decoder scales must be positive");
  if (!std::is_sorted(classes.begin(), classes.end())) throw ValidationError("decoder classes must be sorted");
}

double decoder_objective(const Eigen::MatrixXd& x, const std::vector<int>& y, int classes, double l2,
                         const Eigen::VectorXd& theta, Eigen::VectorXd* gradient) {
  const Eigen::Index n = x.rows(), d = x.cols(), k = classes;
  const Eigen::Map<const Eigen::MatrixXd> w(theta.data(), k, d);
  const Eigen::Map<const Eigen::VectorXd> b(theta.data() + k * d, k);
  Eigen::MatrixXd z = x * w.transpose();
  z.rowwise() += b.transpose();

  double loss = 0.0;
  Eigen::MatrixXd p(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double top = z.row(i).maxCoeff();
    p.row(i) = (z.row(i).array() - top).exp();
    const double s = p.row(i).sum();
    p.row(i) /= s;
    loss -= z(i, y[i]) - top - std::log(s);
  }
  loss = loss / static_cast<double>(n) + 0.5 * l2 * w.squaredNorm();

  if (gradient) {
    for (Eigen::Index i = 0; i < n; ++i) p(i, y[i]) -= 1.0;
    gradient->resize(theta.size());
    Eigen::Map<Eigen::MatrixXd> gw(gradient->data(), k, d);
    gw = p.transpose() * x / static_cast<double>(n) + l2 * w;
    gradient->tail(k) = p.colwise().sum().transpose() / static_cast<double>(n);
  }
  return loss;
}

DecoderModel fit_multinomial(const Eigen::MatrixXd& x_raw, const std::vector<int>& y,
                             const std::vector<std::string>& classes, const DecoderHyper& hyper) {
  const Eigen::Index n = x_raw.rows(), d = x_raw.cols();
  const int k = static_cast<int>(classes.size());
  if (k < 2) throw ValidationError("decoder needs at least two classes");
  if (static_cast<Eigen::Index>(y.size()) != n || n == 0) throw ValidationError("label count does not match rows");
  if (!(hyper.l2 >= 0) || hyper.max_iterations < 0 || !(hyper.tolerance > 0))
    throw ValidationError("invalid decoder hyperparameters");
  if (!x_raw.allFinite()) throw ValidationError("non-finite features");
  for (int v : y)
    if (v < 0 || v >= k) throw ValidationError("label outside the class list");

  DecoderModel m;
  m.classes = classes;
  m.hyper = hyper;
  m.mean = Eigen::VectorXd::Zero(d);
  m.scale = Eigen::VectorXd::Ones(d);
  if (hyper.standardize) {
    m.mean = x_raw.colwise().mean().transpose();
    for (Eigen::Index j = 0; j < d; ++j) {
      const double sd = std::sqrt((x_raw.col(j).array() - m.mean[j]).square().mean());
      m.scale[j] = sd > 0 && std::isfinite(sd) ? sd : 1.0;
    }
  }
  const Eigen::MatrixXd x = (x_raw.rowwise() - m.mean.transpose()).array().rowwise() / m.scale.transpose().array();

  // L-BFGS (memory 10) with Armijo backtracking, from zero.
  constexpr int kMemory = 10;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(k * d + k), g, g_new;
  double f = decoder_objective(x, y, k, hyper.l2, theta, &g);
  m.loss_history.push_back(f);
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> mem;
  int it = 0;
  for (; it < hyper.max_iterations; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= hyper.tolerance) {
      m.converged = true;
      break;
    }
    Eigen::VectorXd q = g;
    std::vector<double> alpha(mem.size());
    for (int i = static_cast<int>(mem.size()) - 1; i >= 0; --i) {
      const auto& [s, yv] = mem[i];
      alpha[i] = s.dot(q) / yv.dot(s);
      q -= alpha[i] * yv;
    }
    if (!mem.empty()) q *= mem.back().first.dot(mem.back().second) / mem.back().second.squaredNorm();
    for (std::size_t i = 0; i < mem.size(); ++i) {
      const auto& [s, yv] = mem[i];
      q += s * (alpha[i] - yv.dot(q) / yv.dot(s));
    }
    Eigen::VectorXd dir = -q;
    double slope = g.dot(dir);
    if (!(slope < 0)) {
      mem.clear();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double t = mem.empty() ? std::min(1.0, 1.0 / g.lpNorm<Eigen::Infinity>()) : 1.0;
    double f_new = f;
    bool accepted = false;
    for (int back = 0; back < 60; ++back, t *= 0.5) {
      f_new = decoder_objective(x, y, k, hyper.l2, theta + t * dir, &g_new);
      if (f_new <= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no descent possible at double precision
    const Eigen::VectorXd s = t * dir, yv = g_new - g;
    theta += s;
    f = f_new;
    g = g_new;
    m.loss_history.push_back(f);
    if (s.dot(yv) > 1e-12 * yv.squaredNorm()) {
      mem.emplace_back(s, yv);
      if (static_cast<int>(mem.size()) > kMemory) mem.pop_front();
    }
  }
  if (!m.converged && g.lpNorm<Eigen::Infinity>() <= hyper.tolerance) m.converged = true;
  m.iterations = it;
  m.weights = Eigen::Map<const Eigen::MatrixXd>(theta.data(), k, d);
  m.biases = theta.tail(k);
  return m;
}

DecoderModel fit_decoder(const ActivationSet& train, const DecoderHyper& hyper) {
  train.validate();
  if (!train.labels) throw ValidationError("training set has no labels");
  if (train.rows < 24) throw ValidationError("decoder needs at least 24 training rows");
  std::vector<std::string> classes;
  for (auto c : categories_alphabetical()) classes.emplace_back(c);
  std::vector<int> y;
  std::vector<int> seen(classes.size(), 0);
  for (const auto& label : *train.labels) {
    const auto it = std::find(classes.begin(), classes.end(), label);
    if (it == classes.end()) throw ValidationError("label not in the 12-label set: " + label);
    y.push_back(static_cast<int>(it - classes.begin()));
    ++seen[y.back()];
  }
  std::string missing;
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (!seen[c]) missing += (missing.empty() ? "" : ", ") + classes[c];
  if (!missing.empty()) throw ValidationError("incomplete label coverage: " + missing);
  return fit_multinomial(to_matrix(train), y, classes, hyper);
}

std::vector<std::string> decoder_predict(const DecoderModel& model, const Eigen::MatrixXd& x) {
  model.validate();
  if (x.cols() != model.features()) throw ValidationError("activation width does not match the decoder");
  const Eigen::MatrixXd xs = (x.rowwise() - model.mean.transpose()).array().rowwise() / model.scale.transpose().array();
  Eigen::MatrixXd z = xs * model.weights.transpose();
  z.rowwise() += model.biases.transpose();
  std::vector<std::string> out;
  out.reserve(x.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < z.cols(); ++c)
      if (z(i, c) > z(i, best)) best = c;
    out.push_back(model.classes[best]);
  }
  return out;
}

std::vector<std::string> decoder_predict(const DecoderModel& model, const ActivationSet& activations) {
  activations.validate();
  return decoder_predict(model, to_matrix(activations));
}

std::string decoder_to_json(const DecoderModel& m) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json w = json::array();
  for (Eigen::Index r = 0; r < m.weights.rows(); ++r) w.push_back(vec(m.weights.row(r).transpose()));
  json j = {{"classes", m.classes},
            {"weights", w},
            {"biases", vec(m.biases)},
            {"mean", vec(m.mean)},
            {"scale", vec(m.scale)},
            {"hyper",
             {{"l2", m.hyper.l2},
              {"max_iterations", m.hyper.max_iterations},
              {"tolerance", m.hyper.tolerance},
              {"standardize", m.hyper.standardize}}},
            {"iterations", m.iterations},
            {"converged", m.converged},
            {"final_loss", m.loss_history.empty() ? 0.0 : m.loss_history.back()}};
  return j.dump(1);
}

DecoderModel decoder_from_json(const std::string& text) {
  DecoderModel m;
  try {
    const json j = json::parse(text);
    m.classes = j.at("classes").get<std::vector<std::string>>();
    auto vec = [](const json& a) {
      const auto v = a.get<std::vector<double>>();
      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    m.biases = vec(j.at("biases"));
    m.mean = vec(j.at("mean"));
    m.scale = vec(j.at("scale"));
    const auto& w = j.at("weights");
    m.weights.resize(static_cast<Eigen::Index>(w.size()), m.mean.size());
    for (std::size_t r = 0; r < w.size(); ++r) {
      const auto row = vec(w[r]);
      if (row.size() != m.mean.size()) throw ValidationError("decoder weight row has the wrong width");
      m.weights.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    const auto& h = j.at("hyper");
    m.hyper = {h.at("l2").get<double>(), h.at("max_iterations").get<int>(), h.at("tolerance").get<double>(),
               h.at("standardize").get<bool>()};
    m.iterations = j.at("iterations").get<int>();
    m.converged = j.at("converged").get<bool>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed decoder model: ") + e.what());
  }
  m.validate();
  return m;
}

std::vector<DecodedCell> decode_within_condition(const ActivationSet& train, const ActivationSet& test,
                                                 const DecoderHyper& hyper, int jobs) {
  train.validate();
  test.validate();
  if (train.cols != test.cols) throw ValidationError("train and test feature widths differ");
  using Key = std::pair<std::string, int>;
  auto group = [](const ActivationSet& set) {
    std::map<Key, std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < set.ids.size(); ++i) {
      const auto spec = stimulus::parse_stimulus_id(set.ids[i]);
      cells[{stimulus::to_string(spec.condition), spec.level ? spec.level->percent() : 0}].push_back(i);
    }
    return cells;
  };
  const auto train_cells = group(train), test_cells = group(test);
  std::vector<std::pair<Key, const std::vector<std::size_t>*>> work;
  for (const auto& [key, rows] : test_cells) {
    if (!train_cells.count(key))
      throw ValidationError("no training rows for " + key.first + (key.second ? "/" + std::to_string(key.second) : ""));
    work.emplace_back(key, &rows);
  }

  std::vector<DecodedCell> out(work.size());
  std::vector<std::string> errors(work.size());
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::size_t w = 0; w < work.size(); ++w) {
    try {
      const auto& [key, rows] = work[w];
      const ActivationSet tr = train.select(train_cells.at(key));
      const ActivationSet te = test.select(*rows);
      const DecoderModel model = fit_decoder(tr, hyper);
      const auto fitted = decoder_predict(model, tr);
      int hits = 0;
      for (std::size_t i = 0; i < fitted.size(); ++i) hits += fitted[i] == (*tr.labels)[i];
      DecodedCell& c = out[w];
      c.condition = key.first;
      if (key.second) c.level = key.second;
      c.train_rows = static_cast<int>(tr.rows);
      c.train_accuracy = static_cast<double>(hits) / tr.rows;
      c.converged = model.converged;
      c.iterations = model.iterations;
      c.ids = te.ids;
      c.predictions = decoder_predict(model, te);
    } catch (const std::exception& e) {
      errors[w] = e.what();
    }
  }
  for (std::size_t w = 0; w < work.size(); ++w)
    if (!errors[w].empty()) throw ValidationError(work[w].first.first + ": " + errors[w]);
  return out;
}

}  // namespace cbench::readout
