#include "cbench/image.hpp"

#include <algorithm>
#include <cmath>

namespace cbench {

ColorImage::ColorImage(int width, int height, int channels)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0) throw ValidationError("negative raster dimensions");
  if (channels != 3 && channels != 4) throw ValidationError("color image needs 3 or 4 channels");
  data_.assign(static_cast<std::size_t>(width) * height * channels, 0.0f);
}

float luminance(float r, float g, float b) {
  return 0.2126f * r + 0.7152f * g + 0.0722f * b;
}

void validate_gray(const GrayImage& image) {
  for (float v : image.data()) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
      throw ValidationError("gray image values must be finite and within [0, 1]");
  }
}

}  // namespace cbench

namespace cbench {

Raster composite(const GrayImage& coverage, Color background, Color foreground) {
  auto mix = [](float bg, float fg, float c) { return c <= 0.0f ? bg : bg + (fg - bg) * std::min(c, 1.0f); };
  if (background.is_gray() && foreground.is_gray()) {
    GrayImage out(coverage.width(), coverage.height());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = mix(background.r, foreground.r, coverage.data()[i]);
    return out;
  }
  ColorImage out(coverage.width(), coverage.height(), 3);
  for (int y = 0; y < coverage.height(); ++y)
    for (int x = 0; x < coverage.width(); ++x) {
      const float c = coverage(x, y);
      out.at(x, y, 0) = mix(background.r, foreground.r, c);
      out.at(x, y, 1) = mix(background.g, foreground.g, c);
      out.at(x, y, 2) = mix(background.b, foreground.b, c);
    }
  return out;
}

}  // namespace cbench
