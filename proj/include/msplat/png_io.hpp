// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msplat/image.hpp"

namespace msplat {

ImageRgb read_png_rgb(const std::string& path);
Image read_png_gray(const std::string& path);
void write_png_rgb(const std::string& path, const ImageRgb& img);
void write_png_gray(const std::string& path, const Image& img);

// 16-bit single channel, used for depth maps stored as depth_m * scale.
struct Image16 {
  int rows = 0, cols = 0;
  std::vector<uint16_t> data;
  uint16_t at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  uint16_t& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
};

Image16 read_png_gray16(const std::string& path);
void write_png_gray16(const std::string& path, const Image16& img);

}  // namespace msplat
