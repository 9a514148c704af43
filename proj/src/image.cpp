// SPDX-License-Identifier: Apache-2.0
#include "msplat/image.hpp"

namespace msplat {

namespace {
inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }
}  // namespace

Image gaussian_blur5(const Image& img) {
  static const double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  const int rows = img.rows(), cols = img.cols();
  Image tmp(rows, cols), out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int t = -2; t <= 2; ++t) acc += k[t + 2] * img.at(r, clampi(c + t, 0, cols - 1));
      tmp.at(r, c) = acc;
    }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int t = -2; t <= 2; ++t) acc += k[t + 2] * tmp.at(clampi(r + t, 0, rows - 1), c);
      out.at(r, c) = acc;
    }
  return out;
}

Image downsample_half(const Image& img) {
  const int rows = img.rows() / 2, cols = img.cols() / 2;
  if (rows < 1 || cols < 1) throw ImageTooSmall("cannot halve image below 1 pixel");
  Image blurred = gaussian_blur5(img);
  Image out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.at(r, c) = blurred.at(2 * r, 2 * c);
  return out;
}

std::vector<Image> build_pyramid(const Image& img, int levels, int min_dim) {
  if (levels < 1) throw BadConfig("pyramid needs at least one level");
  std::vector<Image> pyr;
  pyr.reserve(levels);
  pyr.push_back(img);
  for (int l = 1; l < levels; ++l) {
    const Image& prev = pyr.back();
    if (prev.rows() / 2 < min_dim || prev.cols() / 2 < min_dim)
      throw TooManyLevels("pyramid level " + std::to_string(l) + " would be " +
                          std::to_string(prev.cols() / 2) + "x" + std::to_string(prev.rows() / 2) +
                          ", below minimum dimension " + std::to_string(min_dim));
    pyr.push_back(downsample_half(prev));
  }
  return pyr;
}

std::vector<ImageRgb> build_pyramid_rgb(const ImageRgb& img, int levels, int min_dim) {
  std::vector<Image> per_ch[3];
  for (int c = 0; c < 3; ++c) per_ch[c] = build_pyramid(img.ch[c], levels, min_dim);
  std::vector<ImageRgb> out(levels);
  for (int l = 0; l < levels; ++l)
    for (int c = 0; c < 3; ++c) out[l].ch[c] = std::move(per_ch[c][l]);
  return out;
}

}  // namespace msplat
