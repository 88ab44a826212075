#include "cbench/fragmenter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "cbench/random.hpp"

namespace cbench::fragment {

using std::numbers::pi;

namespace {
constexpr int kCanonicalLevels[] = {12, 16, 20, 27, 35, 45, 59, 77, 100};
}  // namespace

PlacementConfig PlacementConfig::for_resolution(double pixels_per_degree) {
  PlacementConfig c;
  c.element_length = 0.25 * pixels_per_degree;
  c.element_width = 0.05 * pixels_per_degree;
  c.min_spacing = c.element_length;
  return c;
}

void PlacementConfig::validate() const {
  if (!(element_width > 0) || !(element_length > element_width))
    throw ValidationError("element geometry requires element_length > element_width > 0");
  if (!(min_spacing >= 0.8 * element_length))
    throw ValidationError("min_spacing must be at least 0.8 * element_length");
  if (!(jitter >= 0)) throw ValidationError("jitter must be non-negative");
  if (!(phosphene_peak > 0 && phosphene_peak <= 1)) throw ValidationError("phosphene_peak must be in (0, 1]");
}

double PlacementConfig::phosphene_sigma() const {
  // Mass of a peak-p Gaussian truncated at radius 2 sigma: 2 pi sigma^2 p (1 - e^-2).
  return std::sqrt(element_mass() / (2.0 * pi * phosphene_peak * (1.0 - std::exp(-2.0))));
}

FragmentLevel::FragmentLevel(int percent) : percent_(percent) {
  if (std::find(std::begin(kCanonicalLevels), std::end(kCanonicalLevels), percent) == std::end(kCanonicalLevels))
    throw ValidationError("fragmentation level " + std::to_string(percent) + " is not one of the nine levels");
}

std::vector<FragmentLevel> fragmentation_levels() {
  const double ratio = std::pow(100.0 / 12.0, 1.0 / 8.0);
  std::vector<FragmentLevel> levels;
  for (int k = 0; k < 9; ++k)
    levels.emplace_back(static_cast<int>(std::lround(12.0 * std::pow(ratio, k))));
  return levels;
}

std::vector<Element> saturate_place(const contour::ContourMap& map, const PlacementConfig& config) {
  config.validate();
  const int w = map.width(), h = map.height();
  std::vector<int> order;
  for (int i = 0; i < w * h; ++i)
    if (map.valid_mask.data()[i]) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return map.strength.data()[a] > map.strength.data()[b]; });

  // Each jittered center moves by at most jitter * sqrt(2).
  const double radius = config.min_spacing + 2.0 * std::sqrt(2.0) * config.jitter;
  const int reach = static_cast<int>(std::ceil(radius));
  std::vector<std::uint8_t> suppressed(static_cast<std::size_t>(w) * h, 0);
  Rng rng(config.seed);
  std::vector<Element> out;

  for (int idx : order) {
    if (suppressed[idx]) continue;
    const int px = idx % w, py = idx / w;
    Element e;
    e.x = px;
    e.y = py;
    if (config.jitter > 0) {
      e.x = std::clamp(px + rng.uniform(-config.jitter, config.jitter), 0.0, w - 1.0);
      e.y = std::clamp(py + rng.uniform(-config.jitter, config.jitter), 0.0, h - 1.0);
    }
    e.orientation = map.orientation.data()[idx];
    e.priority = map.strength.data()[idx];
    e.index = static_cast<int>(out.size());
    out.push_back(e);

    for (int y = std::max(0, py - reach); y <= std::min(h - 1, py + reach); ++y)
      for (int x = std::max(0, px - reach); x <= std::min(w - 1, px + reach); ++x)
        if (std::hypot(x - px, y - py) < radius) suppressed[static_cast<std::size_t>(y) * w + x] = 1;
  }
  return out;
}

std::vector<Element> subsample(std::span<const Element> elements, FragmentLevel level) {
  const auto keep = static_cast<std::size_t>(std::lround(level.percent() / 100.0 * static_cast<double>(elements.size())));
  std::vector<Element> sorted(elements.begin(), elements.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const Element& a, const Element& b) { return a.index < b.index; });
  sorted.resize(std::min(keep, sorted.size()));
  return sorted;
}

std::string to_string(ElementKind kind) { return kind == ElementKind::phosphene ? "phosphene" : "segment"; }

namespace {

void check_inside(std::span<const Element> elements, int width, int height) {
  for (const Element& e : elements)
    if (!(e.x >= -0.5 && e.y >= -0.5 && e.x < width - 0.5 && e.y < height - 0.5))
      throw ValidationError("element outside the canvas");
}

void stamp_phosphene(GrayImage& cov, const Element& e, double sigma, double mass) {
  const double cutoff = 2.0 * sigma;
  const int x0 = std::max(0, static_cast<int>(std::floor(e.x - cutoff)));
  const int x1 = std::min(cov.width() - 1, static_cast<int>(std::ceil(e.x + cutoff)));
  const int y0 = std::max(0, static_cast<int>(std::floor(e.y - cutoff)));
  const int y1 = std::min(cov.height() - 1, static_cast<int>(std::ceil(e.y + cutoff)));
  auto unit = [&](int x, int y) {
    const double d2 = (x - e.x) * (x - e.x) + (y - e.y) * (y - e.y);
    return d2 <= cutoff * cutoff ? std::exp(-d2 / (2.0 * sigma * sigma)) : 0.0;
  };
  // Normalize on the sampled grid so every blob carries exactly `mass`,
  // wherever its center falls between pixels.
  double total = 0.0;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) total += unit(x, y);
  if (total <= 0.0) return;
  const double amp = mass / total;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const float v = static_cast<float>(amp * unit(x, y));
      cov(x, y) = std::max(cov(x, y), v);
    }
}

struct Pt {
  double x, y;
};

// Sutherland-Hodgman clip of a convex polygon against one axis-aligned half-plane.
template <typename Inside, typename Cross>
std::vector<Pt> clip(const std::vector<Pt>& poly, Inside inside, Cross cross) {
  std::vector<Pt> out;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Pt& a = poly[i];
    const Pt& b = poly[(i + 1) % poly.size()];
    const bool ia = inside(a), ib = inside(b);
    if (ia) out.push_back(a);
    if (ia != ib) out.push_back(cross(a, b));
  }
  return out;
}

double polygon_area(const std::vector<Pt>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Pt& p = poly[i];
    const Pt& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return std::abs(a) / 2.0;
}

// Exact area of the bar inside the unit pixel square centered at (px, py).
double pixel_overlap(const std::vector<Pt>& bar, double px, double py) {
  const double lo_x = px - 0.5, hi_x = px + 0.5, lo_y = py - 0.5, hi_y = py + 0.5;
  auto at_x = [](double x) {
    return [x](const Pt& a, const Pt& b) { return Pt{x, a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x)}; };
  };
  auto at_y = [](double y) {
    return [y](const Pt& a, const Pt& b) { return Pt{a.x + (b.x - a.x) * (y - a.y) / (b.y - a.y), y}; };
  };
  std::vector<Pt> poly = bar;
  poly = clip(poly, [&](const Pt& p) { return p.x >= lo_x; }, at_x(lo_x));
  if (poly.empty()) return 0.0;
  poly = clip(poly, [&](const Pt& p) { return p.x <= hi_x; }, at_x(hi_x));
  if (poly.empty()) return 0.0;
  poly = clip(poly, [&](const Pt& p) { return p.y >= lo_y; }, at_y(lo_y));
  if (poly.empty()) return 0.0;
  poly = clip(poly, [&](const Pt& p) { return p.y <= hi_y; }, at_y(hi_y));
  return poly.size() < 3 ? 0.0 : polygon_area(poly);
}

void stamp_segment(GrayImage& cov, const Element& e, double length, double width) {
  const double c = std::cos(e.orientation), s = std::sin(e.orientation);
  const double hl = length / 2.0, hw = width / 2.0;
  const std::vector<Pt> bar = {{e.x + c * hl - s * hw, e.y + s * hl + c * hw},
                               {e.x - c * hl - s * hw, e.y - s * hl + c * hw},
                               {e.x - c * hl + s * hw, e.y - s * hl - c * hw},
                               {e.x + c * hl + s * hw, e.y + s * hl - c * hw}};
  double min_x = bar[0].x, max_x = bar[0].x, min_y = bar[0].y, max_y = bar[0].y;
  for (const Pt& p : bar) {
    min_x = std::min(min_x, p.x), max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y), max_y = std::max(max_y, p.y);
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(min_x + 0.5)));
  const int x1 = std::min(cov.width() - 1, static_cast<int>(std::ceil(max_x - 0.5)));
  const int y0 = std::max(0, static_cast<int>(std::floor(min_y + 0.5)));
  const int y1 = std::min(cov.height() - 1, static_cast<int>(std::ceil(max_y - 0.5)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const float v = static_cast<float>(pixel_overlap(bar, x, y));
      if (v > 0.0f) cov(x, y) = std::max(cov(x, y), v);
    }
}

}  // namespace

GrayImage render_coverage(std::span<const Element> elements, ElementKind kind, int width, int height,
                          const PlacementConfig& config) {
  config.validate();
  if (width <= 0 || height <= 0) throw ValidationError("canvas must be non-empty");
  check_inside(elements, width, height);
  GrayImage cov(width, height, 0.0f);
  const double sigma = config.phosphene_sigma();
  for (const Element& e : elements) {
    if (kind == ElementKind::phosphene)
      stamp_phosphene(cov, e, sigma, config.element_mass());
    else
      stamp_segment(cov, e, config.element_length, config.element_width);
  }
  for (float& v : cov.data()) v = std::min(v, 1.0f);
  return cov;
}

Raster render_elements(std::span<const Element> elements, ElementKind kind, int width, int height,
                       Color background, Color foreground, const PlacementConfig& config) {
  if (background == foreground) throw ValidationError("zero-contrast stimulus");
  return composite(render_coverage(elements, kind, width, height, config), background, foreground);
}

}  // namespace cbench::fragment
