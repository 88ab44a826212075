#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cbench/error.hpp"

namespace cbench {

// Single-channel raster, row-major. Pixel (x, y) has its center at integer
// coordinates (x, y); x grows to the right and y grows downward.
template <typename T>
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw ValidationError("negative raster dimensions");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  Plane(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 0 || height < 0 ||
        data_.size() != static_cast<std::size_t>(width) * height)
      throw ValidationError("raster dimensions do not match pixel count");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Plane&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Normalized luminance in [0, 1].
using GrayImage = Plane<float>;
using BinaryImage = Plane<std::uint8_t>;

// Interleaved color raster with 3 (RGB) or 4 (RGBA) channels in [0, 1].
class ColorImage {
 public:
  ColorImage() = default;
  ColorImage(int width, int height, int channels);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool has_alpha() const { return channels_ == 4; }

  float& at(int x, int y, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool operator==(const ColorImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 3;
  std::vector<float> data_;
};

struct Color {
  float r = 0.0f;
  float g = 0.0f;
  float b = 0.0f;

  bool is_gray() const { return r == g && g == b; }
  bool operator==(const Color&) const = default;
};

inline constexpr Color kBlack{0.0f, 0.0f, 0.0f};
inline constexpr Color kWhite{1.0f, 1.0f, 1.0f};
inline constexpr Color kRed{1.0f, 0.0f, 0.0f};

// Rec. 709 luminance.
float luminance(float r, float g, float b);

// Checks the GrayImage invariants: non-empty is not required, values finite in [0, 1].
void validate_gray(const GrayImage& image);

}  // namespace cbench

#include <variant>

namespace cbench {

// A rendered stimulus: gray when both colors are gray, RGB otherwise.
using Raster = std::variant<GrayImage, ColorImage>;

inline int raster_width(const Raster& r) {
  return std::visit([](const auto& im) { return im.width(); }, r);
}
inline int raster_height(const Raster& r) {
  return std::visit([](const auto& im) { return im.height(); }, r);
}

// Maps coverage in [0, 1] onto background + (foreground - background) * c.
Raster composite(const GrayImage& coverage, Color background, Color foreground);

}  // namespace cbench
