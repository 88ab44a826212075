#include "cbench/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace cbench {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw RuntimeError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw RuntimeError(std::string("png: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

std::uint32_t quantize(float v, std::uint32_t max_value) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint32_t>(std::lround(c * static_cast<float>(max_value)));
}

void append_bytes(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}
void no_flush(png_structp) {}

// Writes to `file` when given, else appends to `memory`.
void write_rows(std::FILE* file, std::vector<unsigned char>* memory, int width, int height, int color_type,
                int channels, int bit_depth, const std::vector<float>& data) {
  if (bit_depth != 8 && bit_depth != 16) throw ValidationError("png bit depth must be 8 or 16");
  if (width <= 0 || height <= 0) throw ValidationError("cannot write an empty png");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  if (file)
    png_init_io(png, file);
  else
    png_set_write_fn(png, memory, append_bytes, no_flush);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const std::size_t row_values = static_cast<std::size_t>(width) * channels;
  const std::size_t bytes_per = bit_depth == 16 ? 2 : 1;
  std::vector<png_byte> row(row_values * bytes_per);
  const std::uint32_t max_value = bit_depth == 16 ? 65535u : 255u;
  for (int y = 0; y < height; ++y) {
    const float* src = data.data() + static_cast<std::size_t>(y) * row_values;
    for (std::size_t i = 0; i < row_values; ++i) {
      const std::uint32_t q = quantize(src[i], max_value);
      if (bit_depth == 16) {
        row[2 * i] = static_cast<png_byte>(q >> 8);  // PNG is big-endian
        row[2 * i + 1] = static_cast<png_byte>(q & 0xff);
      } else {
        row[i] = static_cast<png_byte>(q);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

}  // namespace

DecodedPng read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw RuntimeError("not a png file: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (bit_depth == 16) png_set_swap(png);  // host little-endian u16
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  const int depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<png_byte> buffer(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  const float scale = depth == 16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
  auto sample = [&](int y, std::size_t i) -> float {
    const png_byte* r = rows[y];
    if (depth == 16) {
      std::uint16_t v;
      std::memcpy(&v, r + 2 * i, 2);
      return static_cast<float>(v) * scale;
    }
    return static_cast<float>(r[i]) * scale;
  };

  if (channels == 1) {
    GrayImage out(width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out(x, y) = sample(y, static_cast<std::size_t>(x));
    return out;
  }
  if (channels != 3 && channels != 4) throw RuntimeError("unsupported png channel layout: " + path.string());
  ColorImage out(width, height, channels);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c)
        out.at(x, y, c) = sample(y, static_cast<std::size_t>(x) * channels + c);
  return out;
}

void write_png(const std::filesystem::path& path, const GrayImage& image, int bit_depth) {
  FilePtr f = open_file(path, "wb");
  write_rows(f.get(), nullptr, image.width(), image.height(), PNG_COLOR_TYPE_GRAY, 1, bit_depth, image.data());
}

std::vector<unsigned char> encode_png(const GrayImage& image, int bit_depth) {
  std::vector<unsigned char> out;
  write_rows(nullptr, &out, image.width(), image.height(), PNG_COLOR_TYPE_GRAY, 1, bit_depth, image.data());
  return out;
}

void write_png(const std::filesystem::path& path, const ColorImage& image, int bit_depth) {
  FilePtr f = open_file(path, "wb");
  write_rows(f.get(), nullptr, image.width(), image.height(),
             image.has_alpha() ? PNG_COLOR_TYPE_RGB_ALPHA : PNG_COLOR_TYPE_RGB,
             image.channels(), bit_depth, image.data());
}

}  // namespace cbench

namespace cbench {
void write_png(const std::filesystem::path& path, const Raster& raster, int bit_depth) {
  std::visit([&](const auto& im) { write_png(path, im, bit_depth); }, raster);
}
}  // namespace cbench
