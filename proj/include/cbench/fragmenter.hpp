#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cbench/contour.hpp"
#include "cbench/image.hpp"

namespace cbench::fragment {

// One placed fragment. Coordinates are pixel-center units on the canvas.
struct Element {
  double x = 0.0;
  double y = 0.0;
  double orientation = 0.0;  // contour tangent in [0, pi)
  double priority = 0.0;     // contour strength at placement
  int index = 0;             // placement order

  bool operator==(const Element&) const = default;
};

struct PlacementConfig {
  double min_spacing = 8.0;     // center-to-center exclusion, px
  double element_length = 8.0;  // segment bar length, px
  double element_width = 1.6;   // segment bar thickness, px
  double jitter = 0.0;          // uniform per-axis displacement bound, px
  std::uint64_t seed = 0;
  // Peak of a phosphene blob; its sigma follows from matching the bar's
  // luminous mass, see phosphene_sigma().
  double phosphene_peak = 0.9;

  // Bars of 0.25 x 0.05 deg with spacing equal to the bar length.
  static PlacementConfig for_resolution(double pixels_per_degree);

  void validate() const;
  double phosphene_sigma() const;
  double element_mass() const { return element_length * element_width; }
};

// One of the nine canonical fragmentation percentages.
class FragmentLevel {
 public:
  explicit FragmentLevel(int percent);
  int percent() const { return percent_; }
  auto operator<=>(const FragmentLevel&) const = default;

 private:
  int percent_;
};

// {12, 16, 20, 27, 35, 45, 59, 77, 100}: 12 * r^k with r = (100/12)^(1/8), rounded.
std::vector<FragmentLevel> fragmentation_levels();

// Greedy saturation: take the strongest unsuppressed valid pixel (row-major
// on ties), place an element there, suppress everything closer than
// min_spacing (+ twice the worst-case jitter), repeat until nothing is left.
std::vector<Element> saturate_place(const contour::ContourMap& map, const PlacementConfig& config);

// The round(percent / 100 * N_max) lowest-index elements, so levels nest.
std::vector<Element> subsample(std::span<const Element> elements, FragmentLevel level);

enum class ElementKind { phosphene, segment };

std::string to_string(ElementKind kind);

// Per-pixel element coverage in [0, 1] (max-composited). Phosphenes are
// isotropic Gaussian blobs truncated at 2 sigma, segments are anti-aliased
// bars; both carry element_mass() of luminance.
GrayImage render_coverage(std::span<const Element> elements, ElementKind kind, int width, int height,
                          const PlacementConfig& config);

// Coverage composited over the background. Throws "zero-contrast stimulus"
// when the two colors coincide and on elements outside the canvas.
Raster render_elements(std::span<const Element> elements, ElementKind kind, int width, int height,
                       Color background, Color foreground, const PlacementConfig& config);

}  // namespace cbench::fragment
