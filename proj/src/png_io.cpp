// SPDX-License-Identifier: Apache-2.0
#include "msplat/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace msplat {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

inline uint8_t to_u8(double v) {
  double s = std::lround(v * 255.0);
  if (s < 0) s = 0;
  if (s > 255) s = 255;
  return static_cast<uint8_t>(s);
}

// Reads any PNG as 8-bit RGB rows (palette expanded, 16-bit stripped,
// gray promoted, alpha dropped).
std::vector<std::vector<uint8_t>> read_rgb8_rows(const std::string& path, int* w, int* h) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  *w = static_cast<int>(png_get_image_width(png, info));
  *h = static_cast<int>(png_get_image_height(png, info));
  std::vector<std::vector<uint8_t>> rows(*h, std::vector<uint8_t>(static_cast<size_t>(*w) * 3));
  std::vector<png_bytep> ptrs(*h);
  for (int r = 0; r < *h; ++r) ptrs[r] = rows[r].data();
  png_read_image(png, ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return rows;
}

}  // namespace

ImageRgb read_png_rgb(const std::string& path) {
  int w = 0, h = 0;
  auto rows = read_rgb8_rows(path, &w, &h);
  ImageRgb out(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int k = 0; k < 3; ++k) out.ch[k].at(r, c) = rows[r][3 * c + k] / 255.0;
  return out;
}

Image read_png_gray(const std::string& path) { return rgb_to_gray(read_png_rgb(path)); }

void write_png_rgb(const std::string& path, const ImageRgb& img) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.cols(), img.rows(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(static_cast<size_t>(img.cols()) * 3);
  for (int r = 0; r < img.rows(); ++r) {
    for (int c = 0; c < img.cols(); ++c)
      for (int k = 0; k < 3; ++k) row[3 * c + k] = to_u8(img.ch[k].at(r, c));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_png_gray(const std::string& path, const Image& img) {
  ImageRgb rgb(img.rows(), img.cols());
  for (int k = 0; k < 3; ++k) rgb.ch[k] = img;
  write_png_rgb(path, rgb);
}

Image16 read_png_gray16(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY ||
      png_get_bit_depth(png, info) != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path + " is not a 16-bit grayscale png");
  }
  png_set_swap(png);  // png stores big-endian samples
  png_read_update_info(png, info);
  Image16 out;
  out.cols = static_cast<int>(png_get_image_width(png, info));
  out.rows = static_cast<int>(png_get_image_height(png, info));
  out.data.resize(static_cast<size_t>(out.rows) * out.cols);
  std::vector<png_bytep> ptrs(out.rows);
  for (int r = 0; r < out.rows; ++r)
    ptrs[r] = reinterpret_cast<png_bytep>(out.data.data() + static_cast<size_t>(r) * out.cols);
  png_read_image(png, ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png_gray16(const std::string& path, const Image16& img) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.cols, img.rows, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);
  for (int r = 0; r < img.rows; ++r)
    png_write_row(png, reinterpret_cast<png_const_bytep>(img.data.data() +
                                                         static_cast<size_t>(r) * img.cols));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace msplat
