#include "cbench/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <variant>

#include "cbench/categories.hpp"
#include "cbench/png_io.hpp"
#include "cbench/random.hpp"

namespace cbench::synthetic {

namespace {

using std::numbers::pi;

struct Pt {
  double x, y;
};

// Shapes live in the unit square, y down.
struct Ellipse {
  double cx, cy, rx, ry, rot = 0.0;
};
struct Box {
  double cx, cy, w, h, rot = 0.0;
};
struct Capsule {
  Pt a, b;
  double r;
};
struct Poly {
  std::vector<Pt> pts;
};
using Shape = std::variant<Ellipse, Box, Capsule, Poly>;

struct Op {
  Shape shape;
  Color color;
  bool erase = false;
};

bool inside(const Ellipse& e, Pt p) {
  const double c = std::cos(e.rot), s = std::sin(e.rot);
  const double dx = p.x - e.cx, dy = p.y - e.cy;
  const double u = (c * dx + s * dy) / e.rx, v = (-s * dx + c * dy) / e.ry;
  return u * u + v * v <= 1.0;
}
bool inside(const Box& b, Pt p) {
  const double c = std::cos(b.rot), s = std::sin(b.rot);
  const double dx = p.x - b.cx, dy = p.y - b.cy;
  return std::abs(c * dx + s * dy) <= b.w / 2 && std::abs(-s * dx + c * dy) <= b.h / 2;
}
bool inside(const Capsule& k, Pt p) {
  const double vx = k.b.x - k.a.x, vy = k.b.y - k.a.y;
  const double len2 = vx * vx + vy * vy;
  const double t = len2 > 0 ? std::clamp(((p.x - k.a.x) * vx + (p.y - k.a.y) * vy) / len2, 0.0, 1.0) : 0.0;
  return std::hypot(p.x - (k.a.x + t * vx), p.y - (k.a.y + t * vy)) <= k.r;
}
bool inside(const Poly& poly, Pt p) {
  bool in = false;
  const auto& v = poly.pts;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++)
    if ((v[i].y > p.y) != (v[j].y > p.y) && p.x < (v[j].x - v[i].x) * (p.y - v[i].y) / (v[j].y - v[i].y) + v[i].x)
      in = !in;
  return in;
}

Color hsv(double h, double s, double v) {
  h = std::fmod(h, 1.0) * 6.0;
  const int i = static_cast<int>(h);
  const double f = h - i, p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r, g, b;
  switch (i % 6) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  return Color{float(r), float(g), float(b)};
}

Color scaled(Color c, double k) {
  return Color{float(std::min(1.0, c.r * k)), float(std::min(1.0, c.g * k)), float(std::min(1.0, c.b * k))};
}

struct Palette {
  Color main, dark, light;
};

std::vector<Op> design(const std::string& cat, Rng& rng, const Palette& pal) {
  auto j = [&](double v, double amt) { return v + rng.uniform(-amt, amt); };
  const Color m = pal.main, d = pal.dark, l = pal.light;
  std::vector<Op> ops;
  auto add = [&](Shape s, Color c) { ops.push_back({std::move(s), c, false}); };
  auto erase = [&](Shape s) { ops.push_back({std::move(s), kBlack, true}); };

  if (cat == "truck") {
    const double cargo_w = j(0.5, 0.06), cargo_h = j(0.3, 0.05);
    add(Box{0.37, 0.62 - cargo_h / 2, cargo_w, cargo_h}, m);
    const double cab_h = j(0.22, 0.04);
    add(Box{0.37 + cargo_w / 2 + 0.11, 0.62 - cab_h / 2, 0.2, cab_h}, l);
    add(Box{0.37 + cargo_w / 2 + 0.14, 0.62 - cab_h * 0.7, 0.1, cab_h * 0.35}, d);
    add(Box{0.5, 0.64, 0.78, 0.05}, d);
    const double wr = j(0.075, 0.015);
    for (double x : {0.25, 0.45, 0.72}) {
      add(Ellipse{x, 0.68, wr, wr}, d);
      add(Ellipse{x, 0.68, wr * 0.4, wr * 0.4}, l);
    }
  } else if (cat == "cup") {
    const double top = j(0.28, 0.04), bottom = j(0.74, 0.04), hw = j(0.2, 0.03), taper = j(0.05, 0.03);
    add(Ellipse{0.5 + hw + 0.02, (top + bottom) / 2, j(0.12, 0.02), j(0.14, 0.02)}, m);
    erase(Ellipse{0.5 + hw + 0.02, (top + bottom) / 2, 0.065, 0.08});
    add(Poly{{{0.5 - hw, top}, {0.5 + hw, top}, {0.5 + hw - taper, bottom}, {0.5 - hw + taper, bottom}}}, m);
    add(Box{0.5, top + 0.015, 2 * hw, 0.03}, l);
  } else if (cat == "bowl") {
    const double rim = j(0.42, 0.04), rx = j(0.4, 0.04), depth = j(0.28, 0.05);
    add(Ellipse{0.5, rim, rx, depth}, m);
    erase(Box{0.5, rim / 2 - 0.001, 1.0, rim});
    add(Ellipse{0.5, rim, rx, j(0.05, 0.015)}, l);
    add(Box{0.5, rim + depth - 0.01, rx * 0.5, 0.05}, d);
  } else if (cat == "binoculars") {
    const double sep = j(0.18, 0.03), r = j(0.12, 0.02), len = j(0.36, 0.05);
    for (double sx : {-1.0, 1.0}) {
      const double x = 0.5 + sx * sep;
      add(Capsule{{x, 0.5 - len / 2}, {x, 0.5 + len / 2}, r}, m);
      add(Ellipse{x, 0.5 + len / 2 + r * 0.2, r * 0.9, r * 0.45}, d);
      add(Capsule{{x, 0.5 - len / 2 - r * 0.6}, {x, 0.5 - len / 2 - r * 0.9}, r * 0.7}, d);
    }
    add(Box{0.5, 0.5 - len / 4, 2 * sep - r, j(0.08, 0.02)}, l);
  } else if (cat == "glasses") {
    const double sep = j(0.2, 0.03), rx = j(0.15, 0.02), ry = j(0.11, 0.025);
    for (double sx : {-1.0, 1.0}) {
      const double x = 0.5 + sx * sep;
      add(Ellipse{x, 0.5, rx, ry}, m);
      add(Ellipse{x, 0.5, rx * 0.8, ry * 0.75}, d);
      add(Capsule{{x + sx * rx * 0.95, 0.47}, {x + sx * (rx + 0.09), 0.43}, 0.018}, m);
    }
    add(Capsule{{0.5 - sep + rx * 0.9, 0.46}, {0.5 + sep - rx * 0.9, 0.46}, 0.02}, m);
  } else if (cat == "hat") {
    const double brim_y = j(0.64, 0.04), brim_rx = j(0.44, 0.03), crown_w = j(0.4, 0.05), crown_h = j(0.32, 0.06);
    add(Box{0.5, brim_y - crown_h / 2, crown_w, crown_h}, m);
    add(Ellipse{0.5, brim_y - crown_h, crown_w / 2, j(0.07, 0.03)}, m);
    add(Box{0.5, brim_y - 0.05, crown_w, 0.06}, d);
    add(Ellipse{0.5, brim_y, brim_rx, j(0.08, 0.02)}, l);
  } else if (cat == "pan") {
    const double r = j(0.26, 0.03), cx = j(0.36, 0.03);
    add(Ellipse{cx, 0.5, r, r * j(0.95, 0.05)}, d);
    add(Ellipse{cx, 0.5, r * 0.82, r * 0.78}, m);
    add(Capsule{{cx + r * 0.9, 0.5}, {j(0.94, 0.03), j(0.44, 0.05)}, j(0.035, 0.008)}, d);
  } else if (cat == "sewing machine") {
    const double arm_y = j(0.32, 0.04), base_y = j(0.76, 0.03);
    add(Box{0.5, base_y, j(0.82, 0.05), 0.1}, d);
    add(Box{0.76, (arm_y + base_y) / 2, j(0.16, 0.03), base_y - arm_y}, m);
    add(Box{0.5, arm_y, j(0.64, 0.05), j(0.17, 0.03)}, m);
    add(Box{0.22, arm_y + 0.11, 0.1, 0.2}, m);
    add(Capsule{{0.22, arm_y + 0.2}, {0.22, base_y - 0.07}, 0.012}, d);
    add(Ellipse{0.88, arm_y + 0.02, 0.04, j(0.1, 0.02)}, l);
  } else if (cat == "shovel") {
    const double blade_top = j(0.58, 0.04), bw = j(0.13, 0.025);
    add(Capsule{{0.5, 0.1}, {0.5, blade_top}, j(0.025, 0.006)}, d);
    add(Box{0.5, 0.08, j(0.14, 0.03), 0.04}, d);
    add(Poly{{{0.5 - bw, blade_top}, {0.5 + bw, blade_top}, {0.5 + bw * 0.95, blade_top + 0.24},
              {0.5, blade_top + j(0.36, 0.04)}, {0.5 - bw * 0.95, blade_top + 0.24}}},
        m);
  } else if (cat == "banana") {
    const double thick = j(0.12, 0.03);
    add(Ellipse{0.5, 0.5, j(0.42, 0.03), 0.26}, m);
    erase(Ellipse{0.5, 0.5 - thick, 0.4, 0.24});
    add(Capsule{{0.1, 0.44}, {0.07, 0.38}, 0.025}, d);
  } else if (cat == "boot") {
    const double shaft_w = j(0.22, 0.03), top = j(0.14, 0.05), toe = j(0.82, 0.04);
    add(Box{0.38, (top + 0.7) / 2, shaft_w, 0.7 - top}, m);
    add(Poly{{{0.38 - shaft_w / 2, 0.6}, {0.38 + shaft_w / 2, 0.6}, {toe - 0.06, 0.68}, {toe, 0.76},
              {toe, 0.8}, {0.38 - shaft_w / 2, 0.8}}},
        m);
    add(Box{(0.38 - shaft_w / 2 + toe) / 2, 0.82, toe - 0.38 + shaft_w / 2, 0.04}, d);
    add(Box{0.38 - shaft_w / 2 + 0.05, 0.84, 0.1, 0.06}, d);
    add(Box{0.38, top + 0.03, shaft_w, 0.05}, l);
  } else if (cat == "lamp") {
    const double st = j(0.14, 0.03), sb = j(0.42, 0.04), tw = j(0.14, 0.03), bw = j(0.26, 0.04);
    add(Box{0.5, (sb + 0.82) / 2, j(0.035, 0.01), 0.82 - sb}, d);
    add(Ellipse{0.5, 0.83, j(0.2, 0.03), 0.05}, d);
    add(Poly{{{0.5 - tw, st}, {0.5 + tw, st}, {0.5 + bw, sb}, {0.5 - bw, sb}}}, l);
  } else {
    throw ValidationError("category not in the 12-label set: " + cat);
  }
  return ops;
}

}  // namespace

stimulus::SourceImage make_source(const std::string& category, int variant, int size, std::uint64_t seed) {
  if (!is_category(category)) throw ValidationError("category not in the 12-label set: " + category);
  if (size < 32) throw ValidationError("synthetic source size must be at least 32");
  Rng rng(StableHash(seed).add(category).add(static_cast<std::uint64_t>(variant)).value());

  Palette pal;
  pal.main = hsv(rng.uniform(), rng.uniform(0.3, 0.8), rng.uniform(0.6, 0.95));
  pal.dark = scaled(pal.main, rng.uniform(0.45, 0.6));
  pal.light = scaled(hsv(rng.uniform(), rng.uniform(0.1, 0.4), 1.0), rng.uniform(0.75, 1.0));
  const auto ops = design(category, rng, pal);

  // Pose: small rotation (larger for elongated tools), mirror, mild stretch.
  const double max_rot = category == "shovel" ? 0.8 : 0.2;
  const double rot = rng.uniform(-max_rot, max_rot);
  const bool mirror = rng.uniform() < 0.5;
  const double stretch = rng.uniform(0.88, 1.12);
  const double c = std::cos(rot), s = std::sin(rot);

  stimulus::SourceImage out;
  out.category = category;
  char stem[32];
  std::snprintf(stem, sizeof stem, "obj%02d", variant);
  out.id = category_slug(category) + "-" + stem;
  out.provenance = "synthetic:" + std::to_string(seed) + ":" + std::to_string(variant);
  out.rgba = ColorImage(size, size, 4);

  constexpr int kSub = 4;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double acc[4] = {0, 0, 0, 0};
      for (int sy = 0; sy < kSub; ++sy)
        for (int sx = 0; sx < kSub; ++sx) {
          // Canvas -> design coordinates: undo pose about the center.
          double u = (x + (sx + 0.5) / kSub) / size - 0.5, v = (y + (sy + 0.5) / kSub) / size - 0.5;
          if (mirror) u = -u;
          const double ru = (c * u + s * v) / stretch, rv = -s * u + c * v;
          const Pt p{ru + 0.5, rv + 0.5};
          bool hit = false;
          Color col;
          for (const Op& op : ops)
            if (std::visit([&](const auto& sh) { return inside(sh, p); }, op.shape)) {
              hit = !op.erase;
              col = op.color;
            }
          if (hit) acc[0] += col.r, acc[1] += col.g, acc[2] += col.b, acc[3] += 1.0;
        }
      const double a = acc[3] / (kSub * kSub);
      out.rgba.at(x, y, 3) = static_cast<float>(a);
      for (int k = 0; k < 3; ++k)
        out.rgba.at(x, y, k) = acc[3] > 0 ? static_cast<float>(acc[k] / acc[3]) : 0.0f;
    }
  stimulus::validate_source(out);
  return out;
}

std::vector<stimulus::SourceImage> make_library(int per_category, int size, std::uint64_t seed) {
  if (per_category < 1) throw ValidationError("per_category must be at least 1");
  std::vector<stimulus::SourceImage> out(static_cast<std::size_t>(per_category) * kCategoryCount);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < static_cast<int>(out.size()); ++i)
    out[i] = make_source(std::string(kCategories[i / per_category]), i % per_category, size, seed);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

void write_library(const std::vector<stimulus::SourceImage>& sources, const std::filesystem::path& root) {
  for (const auto& s : sources) {
    const std::string slug = category_slug(s.category);
    const auto dir = root / slug;
    std::filesystem::create_directories(dir);
    write_png(dir / (s.id.substr(slug.size() + 1) + ".png"), s.rgba);
  }
}

}  // namespace cbench::synthetic
