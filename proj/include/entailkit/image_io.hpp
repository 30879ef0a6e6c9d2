#pragma once

#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "entailkit/encoders.hpp"

namespace entailkit {

// Image files come in two flavors: 8-bit RGB PNG, or a raw ".f32" sidecar of
// little-endian float32 pixels (H*W*C row-major) used for synthetic corpora.

inline void write_png(const PatchGrid& grid, const std::string& path) {
  grid.validate();
  if (grid.channels != 3) throw ValidationError("write_png: only RGB supported");
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw ValidationError("write_png: cannot open " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw ValidationError("write_png: libpng failure for " + path);
  }
  png_init_io(png, fp);
  std::size_t n = grid.image_size;
  png_set_IHDR(png, info, static_cast<png_uint_32>(n), static_cast<png_uint_32>(n), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(n * 3);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t i = 0; i < n * 3; ++i) {
      double v = grid.pixels[y * n * 3 + i];
      v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      row[i] = static_cast<unsigned char>(v * 255.0 + 0.5);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

inline PatchGrid read_png(const std::string& path, std::size_t patch_size) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw ValidationError("read_png: cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw ValidationError("read_png: libpng failure for " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  if (w != h) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw ValidationError("read_png: image must be square: " + path);
  }
  PatchGrid g;
  g.image_size = w;
  g.channels = 3;
  g.patch_size = patch_size;
  g.pixels.resize(static_cast<std::size_t>(w) * h * 3);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
  for (std::size_t y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (std::size_t i = 0; i < row.size(); ++i)
      g.pixels[y * row.size() + i] = row[i] / 255.0;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return g;
}

inline void write_f32(const PatchGrid& grid, const std::string& path) {
  grid.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("write_f32: cannot open " + path);
  for (double v : grid.pixels) {
    float f = static_cast<float>(v);
    os.write(reinterpret_cast<const char*>(&f), 4);
  }
}

inline PatchGrid read_f32(const std::string& path, std::size_t image_size,
                          std::size_t channels, std::size_t patch_size) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("read_f32: cannot open " + path);
  PatchGrid g;
  g.image_size = image_size;
  g.channels = channels;
  g.patch_size = patch_size;
  g.pixels.resize(image_size * image_size * channels);
  for (auto& v : g.pixels) {
    float f = 0.0f;
    is.read(reinterpret_cast<char*>(&f), 4);
    v = f;
  }
  if (!is) throw ValidationError("read_f32: truncated file " + path);
  return g;
}

}  // namespace entailkit
