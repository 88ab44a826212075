#include "cbench/contour.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fft.hpp"

namespace cbench::contour {

using std::numbers::pi;

GaborParams GaborParams::make(double sigma_deg, double lambda_deg, double pixels_per_degree,
                              double truncation_sigmas) {
  GaborParams p;
  p.sigma_deg = sigma_deg;
  p.lambda_deg = lambda_deg;
  p.pixels_per_degree = pixels_per_degree;
  p.kernel_radius = static_cast<int>(std::ceil(truncation_sigmas * sigma_deg * pixels_per_degree - 1e-9));
  p.validate();
  return p;
}

void GaborParams::validate() const {
  if (!(sigma_deg > 0) || !(lambda_deg > 0) || !(pixels_per_degree > 0))
    throw ValidationError("gabor sigma, lambda and pixels_per_degree must be positive");
  if (kernel_radius <= 0) throw ValidationError("kernel too small");
  const int min_radius = static_cast<int>(std::ceil(3.0 * sigma_px() - 1e-9));
  if (kernel_radius < min_radius) throw ValidationError("kernel_radius must be at least ceil(3 sigma) pixels");
}

OrientationBank::OrientationBank(int count) {
  if (count < 2) throw ValidationError("orientation bank needs at least 2 angles");
  angles_.resize(count);
  for (int i = 0; i < count; ++i) angles_[i] = pi * i / count;
}

double OrientationBank::step() const { return pi / size(); }

float ContourMap::max_strength() const {
  float m = 0.0f;
  for (float v : strength.data()) m = std::max(m, v);
  return m;
}

double dc_constant(const GaborParams& params) {
  const double r = pi * params.sigma_deg / params.lambda_deg;
  return std::exp(-2.0 * r * r);
}

Plane<double> make_gabor_kernel(const GaborParams& params, double theta, double phi) {
  params.validate();
  const int r = params.kernel_radius;
  const double sigma = params.sigma_px();
  const double lambda = params.lambda_px();
  const double c0 = dc_constant(params);
  const double c = std::cos(phi), s = std::sin(phi);
  Plane<double> k(2 * r + 1, 2 * r + 1);
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      const double envelope = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      const double carrier = std::cos(2.0 * pi * (x * c + y * s) / lambda - theta) - c0 * std::cos(theta);
      k(x + r, y + r) = envelope * carrier;
    }
  }
  return k;
}

namespace {

void check_fits(const GrayImage& image, const GaborParams& params) {
  if (image.empty()) throw ValidationError("image is empty");
  if (image.width() < params.kernel_side() || image.height() < params.kernel_side())
    throw ValidationError("image too small for filter");
}

float extended(const GrayImage& image, int x, int y, BorderMode border) {
  if (image.contains(x, y)) return image(x, y);
  if (border == BorderMode::zero) return 0.0f;
  return image(std::clamp(x, 0, image.width() - 1), std::clamp(y, 0, image.height() - 1));
}

ContourMap empty_map(const GrayImage& image, const GaborParams& params, const OrientationBank& bank) {
  ContourMap map{bank, {}, Plane<float>(image.width(), image.height()),
                 Plane<float>(image.width(), image.height()),
                 BinaryImage(image.width(), image.height()), 0.0, 0.0};
  map.energy.assign(bank.size(), GrayImage(image.width(), image.height()));
  double l1 = 0.0;
  for (double v : make_gabor_kernel(params, 0.0, 0.0).data()) l1 += std::abs(v);
  float peak = 0.0f;
  for (float v : image.data()) peak = std::max(peak, std::abs(v));
  map.noise_floor = 1e-6 * l1 * peak;
  return map;
}

}  // namespace

ContourMap contour_energy(const GrayImage& image, const GaborParams& params, const OrientationBank& bank,
                          BorderMode border) {
  params.validate();
  check_fits(image, params);
  const int w = image.width(), h = image.height(), r = params.kernel_radius;
  const int cols = detail::next_fast_size(w + 2 * r);
  const int rows = detail::next_fast_size(h + 2 * r);
  const detail::Fft2d fft(rows, cols);
  const double norm = 1.0 / static_cast<double>(fft.size());

  // Extended image occupies [0, w+2r) x [0, h+2r); the rest stays zero.
  detail::ComplexBuffer spatial(fft.size()), image_hat(fft.size());
  spatial.zero();
  auto* sp = spatial.as_complex();
  for (int y = 0; y < h + 2 * r; ++y)
    for (int x = 0; x < w + 2 * r; ++x)
      sp[static_cast<std::size_t>(y) * cols + x] = extended(image, x - r, y - r, border);
  fft.forward(spatial, image_hat);

  ContourMap map = empty_map(image, params, bank);
  const int n = bank.size();

#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < n; ++k) {
    // Even + i*odd: for a real image the complex response's modulus is the
    // quadrature energy.
    const Plane<double> even = make_gabor_kernel(params, 0.0, bank.angle(k));
    const Plane<double> odd = make_gabor_kernel(params, pi / 2.0, bank.angle(k));
    detail::ComplexBuffer kernel(fft.size()), kernel_hat(fft.size()), result(fft.size());
    kernel.zero();
    auto* kp = kernel.as_complex();
    for (int dy = -r; dy <= r; ++dy) {
      const int yy = (dy + rows) % rows;
      for (int dx = -r; dx <= r; ++dx) {
        const int xx = (dx + cols) % cols;
        kp[static_cast<std::size_t>(yy) * cols + xx] = {even(dx + r, dy + r), odd(dx + r, dy + r)};
      }
    }
    fft.forward(kernel, kernel_hat);
    auto* kh = kernel_hat.as_complex();
    const auto* ih = image_hat.as_complex();
    for (std::size_t i = 0; i < fft.size(); ++i) kh[i] *= ih[i];
    fft.backward(kernel_hat, result);
    const auto* out = result.as_complex();
    GrayImage& e = map.energy[k];
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        e(x, y) = static_cast<float>(std::abs(out[static_cast<std::size_t>(y + r) * cols + (x + r)]) * norm);
  }

  map = dominant_orientation(std::move(map), 0.0);
  const double floor = relative_floor(map);
  return dominant_orientation(std::move(map), floor);
}

ContourMap dominant_orientation(ContourMap map, double floor) {
  if (floor < 0) throw ValidationError("orientation floor must be non-negative");
  const int n = map.bank.size();
  const int w = map.width(), h = map.height();
  const double quarter = pi / 2.0;
  map.floor = floor;
  const double effective = std::max(floor, map.noise_floor);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int best = 0;
      float best_e = map.energy[0](x, y);
      for (int k = 1; k < n; ++k) {
        if (map.energy[k](x, y) > best_e) {
          best_e = map.energy[k](x, y);
          best = k;
        }
      }
      map.strength(x, y) = best_e;
      map.orientation(x, y) = static_cast<float>(std::fmod(map.bank.angle(best) + quarter, pi));
      map.valid_mask(x, y) = best_e > effective ? 1 : 0;
    }
  }
  return map;
}

double relative_floor(const ContourMap& map, double fraction) {
  return fraction * static_cast<double>(map.max_strength());
}

GrayImage contour_image(const ContourMap& map, bool normalize) {
  GrayImage out(map.width(), map.height());
  const float m = map.max_strength();
  const float scale = normalize && m > 0.0f ? 1.0f / m : 1.0f;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = std::clamp(map.strength.data()[i] * scale, 0.0f, 1.0f);
  return out;
}

GrayImage gaussian_smooth_3x3(const GrayImage& image, double sigma) {
  double w[3];
  for (int i = 0; i < 3; ++i) w[i] = std::exp(-((i - 1) * (i - 1)) / (2.0 * sigma * sigma));
  double total = 0.0;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) total += w[i] * w[j];

  GrayImage out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      double acc = 0.0;
      for (int j = -1; j <= 1; ++j)
        for (int i = -1; i <= 1; ++i)
          acc += w[i + 1] * w[j + 1] * extended(image, x + i, y + j, BorderMode::replicate);
      out(x, y) = static_cast<float>(acc / total);
    }
  }
  return out;
}

int otsu_level(const std::vector<std::uint64_t>& histogram) {
  using u128 = unsigned __int128;
  std::uint64_t n = 0, sum = 0;
  for (std::size_t k = 0; k < histogram.size(); ++k) {
    n += histogram[k];
    sum += histogram[k] * k;
  }
  // Between-class variance is proportional to (sum*n0 - s0*n)^2 / (n0*(n-n0));
  // compared as exact cross-multiplied integers so plateaus tie exactly.
  int best = -1;
  u128 best_num = 0, best_den = 1;
  std::uint64_t n0 = 0, s0 = 0;
  for (std::size_t t = 0; t + 1 < histogram.size(); ++t) {
    n0 += histogram[t];
    s0 += histogram[t] * t;
    if (n0 == 0 || n0 == n) continue;
    const __int128 diff = static_cast<__int128>(sum) * n0 - static_cast<__int128>(s0) * n;
    const u128 num = static_cast<u128>(diff < 0 ? -diff : diff);
    const u128 num2 = num * num;
    const u128 den = static_cast<u128>(n0) * (n - n0);
    // num2 < 2^82 and den < 2^33 for images up to 2^16 x 2^16 / 255 levels.
    if (best < 0 || num2 * best_den > best_num * den) {
      best = static_cast<int>(t);
      best_num = num2;
      best_den = den;
    }
  }
  if (best >= 0 && best_num == 0) return -1;
  return best;
}

BinarizeResult binarize_contours(const GrayImage& image) {
  if (image.empty()) throw ValidationError("image is empty");
  const GrayImage smooth = gaussian_smooth_3x3(image);
  std::vector<std::uint64_t> hist(256, 0);
  std::vector<int> levels(smooth.size());
  for (std::size_t i = 0; i < smooth.size(); ++i) {
    const float v = std::clamp(smooth.data()[i], 0.0f, 1.0f);
    levels[i] = static_cast<int>(std::lround(v * 255.0f));
    ++hist[levels[i]];
  }
  BinarizeResult result{BinaryImage(image.width(), image.height()), 0.0, 0, false};
  const int t = otsu_level(hist);
  if (t < 0) {
    result.degenerate = true;
    return result;
  }
  result.level = t;
  result.threshold = t / 255.0;
  for (std::size_t i = 0; i < levels.size(); ++i) result.mask.data()[i] = levels[i] > t ? 1 : 0;
  return result;
}

}  // namespace cbench::contour

namespace cbench::reference {

using namespace contour;

ContourMap contour_energy_direct(const GrayImage& image, const GaborParams& params, const OrientationBank& bank,
                                 BorderMode border) {
  params.validate();
  check_fits(image, params);
  const int w = image.width(), h = image.height(), r = params.kernel_radius;
  ContourMap map = empty_map(image, params, bank);
  for (int k = 0; k < bank.size(); ++k) {
    const Plane<double> even = make_gabor_kernel(params, 0.0, bank.angle(k));
    const Plane<double> odd = make_gabor_kernel(params, pi / 2.0, bank.angle(k));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double re = 0.0, im = 0.0;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            const double v = extended(image, x - dx, y - dy, border);
            re += even(dx + r, dy + r) * v;
            im += odd(dx + r, dy + r) * v;
          }
        }
        map.energy[k](x, y) = static_cast<float>(std::sqrt(re * re + im * im));
      }
    }
  }
  map = dominant_orientation(std::move(map), 0.0);
  const double floor = relative_floor(map);
  return dominant_orientation(std::move(map), floor);
}

}  // namespace cbench::reference
