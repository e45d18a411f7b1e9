/* Copyright 2026 The DMA-Net Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "dmanet/png_io.h"

#include <png.h>

#include <cstdio>
#include <memory>

#include "dmanet/tensor.h"

namespace dmanet {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void PngError(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void PngWarning(png_structp, png_const_charp) {}

// Decodes with the requested transform; `indices` keeps palette indices.
Image8 ReadPng(const std::string& path, bool indices) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open image '" + path + "'");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("'" + path + "' is not a PNG file");
  }
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, PngError, PngWarning);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  Image8 img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG '" + path + "': " + message);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (indices) {
    if (color != PNG_COLOR_TYPE_PALETTE && color != PNG_COLOR_TYPE_GRAY) {
      png_destroy_read_struct(&png, &info, nullptr);
      throw IoError("label PNG '" + path + "' must be grayscale or palette");
    }
    if (depth < 8) png_set_packing(png);
  } else {
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  img.data.resize(stride * static_cast<std::size_t>(img.height));
  rows.resize(static_cast<std::size_t>(img.height));
  for (std::int64_t r = 0; r < img.height; ++r) rows[static_cast<std::size_t>(r)] = img.data.data() + r * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void WritePng(const std::string& path, const Image8& image, int color_type, const Palette* palette) {
  const int expected_channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  if (image.channels != expected_channels ||
      image.data.size() != static_cast<std::size_t>(image.height * image.width * image.channels)) {
    throw ShapeError("png write: image buffer does not match its declared shape");
  }
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot write image '" + path + "'");
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, PngError, PngWarning);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_color> colors;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG '" + path + "': " + message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (palette) {
    colors.resize(256, png_color{0, 0, 0});
    for (std::size_t i = 0; i < palette->size() && i < 256; ++i) {
      colors[i] = png_color{(*palette)[i][0], (*palette)[i][1], (*palette)[i][2]};
    }
    png_set_PLTE(png, info, colors.data(), 256);
  }
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(image.width * image.channels);
  for (std::int64_t r = 0; r < image.height; ++r) {
    png_write_row(png, const_cast<png_bytep>(image.data.data() + static_cast<std::size_t>(r) * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Image8 ReadPngRgb(const std::string& path) { return ReadPng(path, false); }
Image8 ReadPngIndices(const std::string& path) { return ReadPng(path, true); }

void WritePngRgb(const std::string& path, const Image8& image) { WritePng(path, image, PNG_COLOR_TYPE_RGB, nullptr); }
void WritePngGray(const std::string& path, const Image8& image) { WritePng(path, image, PNG_COLOR_TYPE_GRAY, nullptr); }
void WritePngIndexed(const std::string& path, const Image8& indices, const Palette& palette) {
  WritePng(path, indices, PNG_COLOR_TYPE_PALETTE, &palette);
}

}  // namespace dmanet
