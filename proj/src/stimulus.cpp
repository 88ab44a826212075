#include "cbench/stimulus.hpp"

#include <openssl/evp.h>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cbench/categories.hpp"
#include "cbench/png_io.hpp"
#include "cbench/random.hpp"
#include "fft.hpp"

namespace cbench::stimulus {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- sources -----------------------------------------------------------------

void validate_source(const SourceImage& s) {
  if (!is_category(s.category)) throw ValidationError("category not in the 12-label set: " + s.category);
  if (!s.rgba.has_alpha()) throw ValidationError("background not removed: " + s.id);
  const std::size_t n = static_cast<std::size_t>(s.rgba.width()) * s.rgba.height();
  if (n == 0) throw ValidationError("empty source image: " + s.id);
  std::size_t opaque = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (s.rgba.data()[i * 4 + 3] >= 0.5f) ++opaque;
  const double frac = static_cast<double>(opaque) / static_cast<double>(n);
  if (frac > 0.90) throw ValidationError("background not removed: " + s.id);
  if (frac < 0.01) throw ValidationError("object covers less than 1% of the image: " + s.id);
}

SourceImage load_source(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("source not found: " + path.string());
  const std::string dir = path.parent_path().filename().string();
  const auto category = category_from_slug(dir);
  if (!category) throw ValidationError("category not in the 12-label set: " + dir);

  SourceImage s;
  s.category = *category;
  s.id = category_slug(*category) + "-" + path.stem().string();
  s.provenance = path.string();
  DecodedPng png = read_png(path);
  if (auto* c = std::get_if<ColorImage>(&png); c && c->has_alpha())
    s.rgba = std::move(*c);
  else
    throw ValidationError("background not removed: " + path.string());
  validate_source(s);
  return s;
}

std::vector<SourceImage> load_sources(const fs::path& root) {
  if (!fs::is_directory(root)) throw ValidationError("source directory not found: " + root.string());
  std::vector<fs::path> files;
  for (const auto& dir : fs::directory_iterator(root)) {
    if (!dir.is_directory()) continue;
    for (const auto& f : fs::directory_iterator(dir.path()))
      if (f.is_regular_file() && f.path().extension() == ".png") files.push_back(f.path());
  }
  std::vector<SourceImage> out;
  for (const auto& f : files) out.push_back(load_source(f));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].id == out[i - 1].id) throw ValidationError("duplicate source id " + out[i].id);
  return out;
}

void check_replica_coverage(const std::vector<SourceImage>& sources) {
  std::map<std::string, int> counts;
  for (const auto& s : sources) ++counts[s.category];
  std::string gaps;
  for (auto label : kCategories) {
    const int n = counts[std::string(label)];
    if (n != 4) gaps += (gaps.empty() ? "" : ", ") + std::string(label) + " has " + std::to_string(n);
  }
  if (!gaps.empty()) throw ValidationError("replica mode needs 4 objects per category: " + gaps);
}

// ---- specs -------------------------------------------------------------------

std::string to_string(Condition c) {
  switch (c) {
    case Condition::rgb: return "rgb";
    case Condition::contour: return "contour";
    case Condition::phosphene: return "phosphene";
    case Condition::segment: return "segment";
  }
  return "?";
}

Condition condition_from_string(const std::string& s) {
  if (s == "rgb") return Condition::rgb;
  if (s == "contour") return Condition::contour;
  if (s == "phosphene") return Condition::phosphene;
  if (s == "segment") return Condition::segment;
  throw ValidationError("unknown condition '" + s + "'");
}

bool is_fragmented(Condition c) { return c == Condition::phosphene || c == Condition::segment; }

void StimulusSpec::validate() const {
  if (is_fragmented(condition) != level.has_value())
    throw ValidationError("level must be present exactly for fragmented conditions");
  if (source_id.empty() || source_id.find('/') != std::string::npos)
    throw ValidationError("invalid source id '" + source_id + "'");
}

std::string StimulusSpec::id() const {
  if (level) return to_string(condition) + "/" + std::to_string(level->percent()) + "/" + source_id;
  return to_string(condition) + "/" + source_id;
}

StimulusSpec parse_stimulus_id(const std::string& id) {
  std::vector<std::string> parts;
  std::stringstream ss(id);
  for (std::string p; std::getline(ss, p, '/');) parts.push_back(p);
  StimulusSpec spec;
  if (parts.size() == 3) {
    spec.condition = condition_from_string(parts[0]);
    try {
      spec.level = fragment::FragmentLevel(std::stoi(parts[1]));
    } catch (const std::logic_error&) {
      throw ValidationError("bad level in stimulus id '" + id + "'");
    }
    spec.source_id = parts[2];
  } else if (parts.size() == 2) {
    spec.condition = condition_from_string(parts[0]);
    spec.source_id = parts[1];
  } else {
    throw ValidationError("malformed stimulus id '" + id + "'");
  }
  spec.validate();
  return spec;
}

std::uint64_t stimulus_seed(std::uint64_t global_seed, const std::string& source_id, Condition c,
                            std::optional<fragment::FragmentLevel> level) {
  return StableHash(global_seed)
      .add(source_id)
      .add(to_string(c))
      .add(static_cast<std::uint64_t>(level ? level->percent() : 0))
      .value();
}

// ---- config ------------------------------------------------------------------

int DatasetConfig::canvas_size() const { return static_cast<int>(std::lround(field_degrees * pixels_per_degree)); }

contour::GaborParams DatasetConfig::gabor() const {
  return contour::GaborParams::make(0.06, 0.12, pixels_per_degree);
}

fragment::PlacementConfig DatasetConfig::placement() const {
  auto p = fragment::PlacementConfig::for_resolution(pixels_per_degree);
  p.jitter = jitter;
  return p;
}

void DatasetConfig::validate() const {
  if (!(pixels_per_degree > 0) || !(field_degrees > 0)) throw ValidationError("pixels_per_degree must be positive");
  if (!(object_fraction > 0 && object_fraction <= 1)) throw ValidationError("object_fraction must be in (0, 1]");
  if (background == foreground) throw ValidationError("zero-contrast stimulus");
  if (canvas_size() < 16) throw ValidationError("canvas smaller than 16 px");
  gabor().validate();
  placement().validate();
  contour::OrientationBank check(orientations);
  (void)check;
}

int DatasetManifest::count(Condition c) const {
  return static_cast<int>(std::count_if(records.begin(), records.end(),
                                        [c](const StimulusRecord& r) { return r.spec.condition == c; }));
}

int DatasetManifest::generated_dataset_count() const {
  std::vector<std::pair<int, int>> keys;
  for (const auto& r : records)
    if (r.spec.condition != Condition::rgb)
      keys.emplace_back(static_cast<int>(r.spec.condition), r.spec.level ? r.spec.level->percent() : 0);
  std::sort(keys.begin(), keys.end());
  return static_cast<int>(std::unique(keys.begin(), keys.end()) - keys.begin());
}

// ---- object placement --------------------------------------------------------

PlacedObject place_object(const SourceImage& source, const DatasetConfig& config) {
  const ColorImage& src = source.rgba;
  if (!src.has_alpha()) throw ValidationError("background not removed: " + source.id);
  int x0 = src.width(), y0 = src.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      if (src.at(x, y, 3) > 0.0f) x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
  if (x1 < 0) throw ValidationError("source is fully transparent: " + source.id);

  const int n = config.canvas_size();
  // Bounding box measured edge to edge, so a 1-px object still has extent 1.
  const double scale = config.object_fraction * n / std::max(x1 - x0 + 1, y1 - y0 + 1);
  const double bcx = (x0 + x1) / 2.0, bcy = (y0 + y1) / 2.0, ccx = (n - 1) / 2.0;
  const int ss = std::max(1, static_cast<int>(std::ceil(1.0 / scale)));

  auto premul = [&](int x, int y, int c) -> double {
    if (x < 0 || y < 0 || x >= src.width() || y >= src.height()) return 0.0;
    const double a = src.at(x, y, 3);
    return c == 3 ? a : a * src.at(x, y, c);
  };
  auto bilinear = [&](double u, double v, int c) {
    const int ix = static_cast<int>(std::floor(u)), iy = static_cast<int>(std::floor(v));
    const double fx = u - ix, fy = v - iy;
    return (1 - fy) * ((1 - fx) * premul(ix, iy, c) + fx * premul(ix + 1, iy, c)) +
           fy * ((1 - fx) * premul(ix, iy + 1, c) + fx * premul(ix + 1, iy + 1, c));
  };

  PlacedObject out{ColorImage(n, n, 3), GrayImage(n, n, 0.0f)};
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double acc[4] = {0, 0, 0, 0};
      for (int j = 0; j < ss; ++j)
        for (int i = 0; i < ss; ++i) {
          const double ox = x + (i + 0.5) / ss - 0.5, oy = y + (j + 0.5) / ss - 0.5;
          const double u = bcx + (ox - ccx) / scale, v = bcy + (oy - ccx) / scale;
          for (int c = 0; c < 4; ++c) acc[c] += bilinear(u, v, c);
        }
      const double inv = 1.0 / (ss * ss);
      const float a = static_cast<float>(std::clamp(acc[3] * inv, 0.0, 1.0));
      out.alpha(x, y) = a;
      for (int c = 0; c < 3; ++c) out.premultiplied.at(x, y, c) = static_cast<float>(std::clamp(acc[c] * inv, 0.0, double(a)));
    }
  return out;
}

GrayImage object_luminance(const PlacedObject& object) {
  const ColorImage& p = object.premultiplied;
  GrayImage g(p.width(), p.height());
  for (int y = 0; y < p.height(); ++y)
    for (int x = 0; x < p.width(); ++x) g(x, y) = std::clamp(luminance(p.at(x, y, 0), p.at(x, y, 1), p.at(x, y, 2)), 0.0f, 1.0f);
  return g;
}

namespace {

Raster rgb_stimulus(const PlacedObject& object, Color bg) {
  const int n = object.alpha.width();
  ColorImage out(n, n, 3);
  const float bgc[3] = {bg.r, bg.g, bg.b};
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const float a = object.alpha(x, y);
      for (int c = 0; c < 3; ++c)
        out.at(x, y, c) = a == 0.0f ? bgc[c] : object.premultiplied.at(x, y, c) + (1.0f - a) * bgc[c];
    }
  return out;
}

json color_json(Color c) { return json::array({c.r, c.g, c.b}); }
Color color_from_json(const json& j) { return Color{j.at(0).get<float>(), j.at(1).get<float>(), j.at(2).get<float>()}; }

void write_sidecar(const fs::path& path, const std::string& id, int n_max, std::span<const fragment::Element> els) {
  json arr = json::array();
  for (const auto& e : els)
    arr.push_back({{"x", e.x}, {"y", e.y}, {"orientation", e.orientation}, {"priority", e.priority}, {"index", e.index}});
  std::ofstream f(path);
  if (!f) throw RuntimeError("cannot write " + path.string());
  f << json{{"id", id}, {"n_max", n_max}, {"elements", arr}}.dump(1) << "\n";
}

// Renders and writes every stimulus of one source.
std::vector<StimulusRecord> build_source(const SourceImage& src, const DatasetConfig& cfg, const fs::path& out) {
  const PlacedObject object = place_object(src, cfg);
  const GrayImage gray = object_luminance(object);
  const auto map = contour::contour_energy(gray, cfg.gabor(), contour::OrientationBank(cfg.orientations));

  // One placement per source, shared by every level and both element kinds,
  // so levels nest and the two conditions differ only in element shape.
  auto placement = cfg.placement();
  placement.seed = StableHash(cfg.global_seed).add(src.id).add("placement").value();
  const auto saturated = fragment::saturate_place(map, placement);
  const int n_max = static_cast<int>(saturated.size());
  const int n = cfg.canvas_size();

  std::vector<StimulusRecord> records;
  auto emit = [&](Condition c, std::optional<fragment::FragmentLevel> level, const Raster& raster, int count,
                  std::span<const fragment::Element> els) {
    StimulusRecord r;
    r.spec.source_id = src.id;
    r.spec.condition = c;
    r.spec.level = level;
    r.spec.background = cfg.background;
    r.spec.seed = stimulus_seed(cfg.global_seed, src.id, c, level);
    r.category = src.category;
    r.path = "dataset/" + r.spec.id() + ".png";
    r.element_count = count;
    r.n_max = n_max;
    write_png(out / r.path, raster);
    r.sha256 = sha256_file(out / r.path);
    if (is_fragmented(c) && cfg.write_sidecars)
      write_sidecar(out / ("dataset/" + r.spec.id() + ".elements.json"), r.spec.id(), n_max, els);
    records.push_back(std::move(r));
  };

  for (const auto level : fragment::fragmentation_levels()) {
    const auto kept = fragment::subsample(saturated, level);
    for (auto kind : {fragment::ElementKind::phosphene, fragment::ElementKind::segment}) {
      const Raster r = fragment::render_elements(kept, kind, n, n, cfg.background, cfg.foreground, placement);
      emit(kind == fragment::ElementKind::phosphene ? Condition::phosphene : Condition::segment, level, r,
           static_cast<int>(kept.size()), kept);
    }
  }
  emit(Condition::contour, std::nullopt, composite(contour::contour_image(map), cfg.background, cfg.foreground), 0, {});
  emit(Condition::rgb, std::nullopt, rgb_stimulus(object, cfg.background), 0, {});
  return records;
}

}  // namespace

DatasetManifest build_dataset(const std::vector<SourceImage>& sources, const DatasetConfig& config,
                              const fs::path& out_dir) {
  config.validate();
  if (config.replica) check_replica_coverage(sources);
  for (const auto& s : sources) validate_source(s);
  {
    std::vector<std::string> ids;
    for (const auto& s : sources) ids.push_back(s.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ValidationError("duplicate source ids");
  }

  for (auto c : {"phosphene", "segment"})
    for (const auto level : fragment::fragmentation_levels())
      fs::create_directories(out_dir / "dataset" / c / std::to_string(level.percent()));
  fs::create_directories(out_dir / "dataset" / "contour");
  fs::create_directories(out_dir / "dataset" / "rgb");

  std::vector<std::vector<StimulusRecord>> per_source(sources.size());
  std::exception_ptr failure;
  const int jobs = config.jobs > 0 ? config.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (std::size_t i = 0; i < sources.size(); ++i) {
    try {
      per_source[i] = build_source(sources[i], config, out_dir);
    } catch (...) {
#pragma omp critical(cbench_build_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  DatasetManifest m;
  m.toolkit_version = CBENCH_VERSION;
  m.global_seed = config.global_seed;
  m.config = config;
  for (auto& v : per_source)
    for (auto& r : v) m.records.push_back(std::move(r));
  std::sort(m.records.begin(), m.records.end(),
            [](const StimulusRecord& a, const StimulusRecord& b) { return a.spec.id() < b.spec.id(); });
  write_manifest(m, out_dir / "manifest.json");
  return m;
}

// ---- noise mask --------------------------------------------------------------

GrayImage generate_noise_mask(int size, std::uint64_t seed, double exponent) {
  if (size <= 0) throw ValidationError("mask size must be positive");
  detail::Fft2d fft(size, size);
  detail::ComplexBuffer buf(fft.size()), spec(fft.size());
  Rng rng(seed);
  auto* b = buf.as_complex();
  for (std::size_t i = 0; i < fft.size(); ++i) b[i] = rng.normal();
  fft.forward(buf, spec);
  auto* s = spec.as_complex();
  for (int y = 0; y < size; ++y) {
    const double fy = y <= size / 2 ? y : y - size;
    for (int x = 0; x < size; ++x) {
      const double fx = x <= size / 2 ? x : x - size;
      const double f = std::hypot(fx, fy);
      s[static_cast<std::size_t>(y) * size + x] *= f == 0.0 ? 0.0 : std::pow(f, -exponent);
    }
  }
  fft.backward(spec, buf);

  GrayImage out(size, size);
  double lo = b[0].real(), hi = b[0].real();
  for (std::size_t i = 0; i < fft.size(); ++i) lo = std::min(lo, b[i].real()), hi = std::max(hi, b[i].real());
  for (std::size_t i = 0; i < fft.size(); ++i)
    out.data()[i] = hi > lo ? static_cast<float>(std::clamp((b[i].real() - lo) / (hi - lo), 0.0, 1.0)) : 0.5f;
  return out;
}

// ---- digests and manifest ----------------------------------------------------

std::string sha256_hex(const std::vector<unsigned char>& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw RuntimeError("SHA-256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw RuntimeError("cannot read " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
  const DatasetConfig& c = m.config;
  json records = json::array();
  for (const auto& r : m.records) {
    records.push_back({{"id", r.spec.id()},
                       {"source_id", r.spec.source_id},
                       {"category", r.category},
                       {"condition", to_string(r.spec.condition)},
                       {"level", r.spec.level ? json(r.spec.level->percent()) : json(nullptr)},
                       {"background", color_json(r.spec.background)},
                       {"seed", r.spec.seed},
                       {"path", r.path},
                       {"element_count", r.element_count},
                       {"n_max", r.n_max},
                       {"sha256", r.sha256}});
  }
  json j = {{"toolkit_version", m.toolkit_version},
            {"global_seed", m.global_seed},
            {"config",
             {{"pixels_per_degree", c.pixels_per_degree},
              {"field_degrees", c.field_degrees},
              {"canvas_size", c.canvas_size()},
              {"object_fraction", c.object_fraction},
              {"background", color_json(c.background)},
              {"foreground", color_json(c.foreground)},
              {"orientations", c.orientations},
              {"jitter", c.jitter},
              {"replica", c.replica}}},
            {"records", records}};
  std::ofstream f(path);
  if (!f) throw RuntimeError("cannot write " + path.string());
  f << j.dump(1) << "\n";
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("manifest not found: " + path.string());
  DatasetManifest m;
  try {
    const json j = json::parse(f);
    m.toolkit_version = j.at("toolkit_version").get<std::string>();
    m.global_seed = j.at("global_seed").get<std::uint64_t>();
    const json& c = j.at("config");
    m.config.pixels_per_degree = c.at("pixels_per_degree").get<double>();
    m.config.field_degrees = c.at("field_degrees").get<double>();
    m.config.object_fraction = c.at("object_fraction").get<double>();
    m.config.background = color_from_json(c.at("background"));
    m.config.foreground = color_from_json(c.at("foreground"));
    m.config.orientations = c.at("orientations").get<int>();
    m.config.jitter = c.at("jitter").get<double>();
    m.config.replica = c.at("replica").get<bool>();
    m.config.global_seed = m.global_seed;
    for (const json& r : j.at("records")) {
      StimulusRecord rec;
      rec.spec = parse_stimulus_id(r.at("id").get<std::string>());
      rec.spec.background = color_from_json(r.at("background"));
      rec.spec.seed = r.at("seed").get<std::uint64_t>();
      rec.category = r.at("category").get<std::string>();
      rec.path = r.at("path").get<std::string>();
      rec.element_count = r.at("element_count").get<int>();
      rec.n_max = r.at("n_max").get<int>();
      rec.sha256 = r.at("sha256").get<std::string>();
      if (!is_category(rec.category)) throw ValidationError("manifest category not in the 12-label set: " + rec.category);
      m.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw ValidationError("malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

std::vector<std::string> verify_manifest(const DatasetManifest& m, const fs::path& root) {
  std::vector<std::string> bad;
  for (const auto& r : m.records)
    if (!fs::exists(root / r.path) || sha256_file(root / r.path) != r.sha256) bad.push_back(r.spec.id());
  return bad;
}

}  // namespace cbench::stimulus
