#pragma once

#include <vector>

#include "cbench/image.hpp"

namespace cbench::contour {

// Quadrature Gabor filter geometry. Sizes are in degrees of visual angle and
// converted to pixels through pixels_per_degree.
struct GaborParams {
  double sigma_deg = 0.06;
  double lambda_deg = 0.12;
  double pixels_per_degree = 32.0;
  int kernel_radius = 12;

  // Radius is ceil(truncation_sigmas * sigma in pixels).
  static GaborParams make(double sigma_deg, double lambda_deg, double pixels_per_degree,
                          double truncation_sigmas = 6.0);

  double sigma_px() const { return sigma_deg * pixels_per_degree; }
  double lambda_px() const { return lambda_deg * pixels_per_degree; }
  int kernel_side() const { return 2 * kernel_radius + 1; }

  // Throws ValidationError on sigma, lambda or ppd <= 0 and on a radius below
  // ceil(3 sigma); a zero radius reports "kernel too small".
  void validate() const;
};

// Filter angles evenly spaced on [0, pi).
class OrientationBank {
 public:
  explicit OrientationBank(int count = 8);

  int size() const { return static_cast<int>(angles_.size()); }
  double angle(int i) const { return angles_[i]; }
  const std::vector<double>& angles() const { return angles_; }
  double step() const;

 private:
  std::vector<double> angles_;
};

// How the image is extended past its border before convolution. The FFT path
// always pads to a composite-friendly size; this only controls the fill.
enum class BorderMode { replicate, zero };

// Per-orientation quadrature energy plus the dominant-orientation fields.
// energy[k] belongs to bank.angle(k), the filter carrier direction (contour
// normal). orientation holds the contour tangent, (normal + pi/2) mod pi, and
// is meaningful only where valid_mask is set.
struct ContourMap {
  OrientationBank bank = OrientationBank(8);
  std::vector<GrayImage> energy;
  Plane<float> strength;
  Plane<float> orientation;
  BinaryImage valid_mask;
  double floor = 0.0;
  // Round-off level of the filtering (1e-6 of the even kernel's L1 norm times
  // the image max). Energies at or below it never count as valid.
  double noise_floor = 0.0;

  int width() const { return strength.width(); }
  int height() const { return strength.height(); }
  float max_strength() const;
};

// Validity floor used by default: 5% of the image-wide maximum strength.
inline constexpr double kDefaultFloorFraction = 0.05;

double dc_constant(const GaborParams& params);

// Samples the kernel at integer offsets in [-R, R]^2, row-major by y then x.
Plane<double> make_gabor_kernel(const GaborParams& params, double theta, double phi);

// FFT path, orientations processed in parallel with OpenMP. strength and
// orientation are populated and valid_mask uses the default relative floor.
ContourMap contour_energy(const GrayImage& image, const GaborParams& params,
                          const OrientationBank& bank, BorderMode border = BorderMode::replicate);

// Recomputes strength, orientation and valid_mask with an absolute floor
// (raised to map.noise_floor if lower). Ties between orientations resolve to
// the smallest filter angle.
ContourMap dominant_orientation(ContourMap map, double floor);

double relative_floor(const ContourMap& map, double fraction = kDefaultFloorFraction);

// Strength scaled into [0, 1]; divided by the image max when normalize is set,
// clamped otherwise.
GrayImage contour_image(const ContourMap& map, bool normalize = true);

struct BinarizeResult {
  BinaryImage mask;
  double threshold = 0.0;  // in [0, 1]; mask is value > threshold
  int level = 0;           // Otsu level on the 256-bin histogram
  bool degenerate = false; // zero-variance input, mask all false
};

// 3x3 Gaussian (sigma 0.8 px, replicated border) followed by Otsu.
BinarizeResult binarize_contours(const GrayImage& image);

// Exact Otsu level over a 256-bin histogram of 8-bit levels: the first level t
// maximizing between-class variance for classes {<= t} and {> t}. Returns -1
// when the histogram has a single occupied bin.
int otsu_level(const std::vector<std::uint64_t>& histogram);

// The 3x3 smoothing step alone, exposed for tests.
GrayImage gaussian_smooth_3x3(const GrayImage& image, double sigma = 0.8);

}  // namespace cbench::contour

namespace cbench::reference {

// Serial direct-space evaluation of the quadrature energy. Same border
// semantics as the FFT path; kept as the test oracle and benchmark baseline.
contour::ContourMap contour_energy_direct(const GrayImage& image, const contour::GaborParams& params,
                                          const contour::OrientationBank& bank,
                                          contour::BorderMode border = contour::BorderMode::replicate);

}  // namespace cbench::reference
