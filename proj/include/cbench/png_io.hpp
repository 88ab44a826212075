#pragma once

#include <filesystem>
#include <variant>
#include <vector>

#include "cbench/image.hpp"

namespace cbench {

// A decoded PNG in normalized floats. Plain gray (8 or 16 bit) decodes to a
// GrayImage; everything else to RGB or RGBA, with gray+alpha expanded to RGBA.
using DecodedPng = std::variant<GrayImage, ColorImage>;

DecodedPng read_png(const std::filesystem::path& path);

// bit_depth is 8 or 16. Values are clamped to [0, 1] and rounded.
void write_png(const std::filesystem::path& path, const GrayImage& image, int bit_depth = 8);
void write_png(const std::filesystem::path& path, const ColorImage& image, int bit_depth = 8);
std::vector<unsigned char> encode_png(const GrayImage& image, int bit_depth = 8);

}  // namespace cbench

namespace cbench {
void write_png(const std::filesystem::path& path, const Raster& raster, int bit_depth = 8);
}  // namespace cbench
