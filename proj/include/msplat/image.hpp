// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "msplat/errors.hpp"

namespace msplat {

// Dense row-major grayscale image. Intensities are kept in [0,1] by
// convention but the container does not enforce it.
class Image {
 public:
  Image() = default;
  Image(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
    if (rows <= 0 || cols <= 0) throw DimensionMismatch("image dimensions must be positive");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_size(const Image& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Planar RGB image, channels in [0,1].
struct ImageRgb {
  Image ch[3];

  ImageRgb() = default;
  ImageRgb(int rows, int cols, double fill = 0.0)
      : ch{Image(rows, cols, fill), Image(rows, cols, fill), Image(rows, cols, fill)} {}

  int rows() const { return ch[0].rows(); }
  int cols() const { return ch[0].cols(); }
  bool empty() const { return ch[0].empty(); }
  bool same_size(const ImageRgb& o) const { return ch[0].same_size(o.ch[0]); }

  Eigen::Vector3d at(int r, int c) const {
    return {ch[0].at(r, c), ch[1].at(r, c), ch[2].at(r, c)};
  }
  void set(int r, int c, const Eigen::Vector3d& v) {
    ch[0].at(r, c) = v[0];
    ch[1].at(r, c) = v[1];
    ch[2].at(r, c) = v[2];
  }
};

inline Image rgb_to_gray(const ImageRgb& rgb) {
  Image out(rgb.rows(), rgb.cols());
  for (int r = 0; r < rgb.rows(); ++r)
    for (int c = 0; c < rgb.cols(); ++c)
      out.at(r, c) = 0.299 * rgb.ch[0].at(r, c) + 0.587 * rgb.ch[1].at(r, c) +
                     0.114 * rgb.ch[2].at(r, c);
  return out;
}

// True when (x, y) can be sampled bilinearly (all four neighbours exist).
inline bool bilinear_in_bounds(const Image& img, double x, double y) {
  return x >= 0.0 && y >= 0.0 && x <= img.cols() - 1.0 && y <= img.rows() - 1.0;
}

// Unchecked bilinear sample; caller guarantees bilinear_in_bounds. Degenerate
// axes (1-row or 1-column images) interpolate along the remaining axis.
inline double bilinear_raw(const Image& img, double x, double y) {
  int c0 = static_cast<int>(std::floor(x));
  int r0 = static_cast<int>(std::floor(y));
  if (c0 >= img.cols() - 1) c0 = img.cols() - 2;
  if (r0 >= img.rows() - 1) r0 = img.rows() - 2;
  if (c0 < 0) c0 = 0;
  if (r0 < 0) r0 = 0;
  const int c1 = std::min(c0 + 1, img.cols() - 1);
  const int r1 = std::min(r0 + 1, img.rows() - 1);
  const double fx = x - c0;
  const double fy = y - r0;
  const double v00 = img.at(r0, c0);
  const double v01 = img.at(r0, c1);
  const double v10 = img.at(r1, c0);
  const double v11 = img.at(r1, c1);
  return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11);
}

// Bilinear sample at (x, y) in pixel coordinates, x along columns.
// Throws OutOfBounds outside [0, cols-1] x [0, rows-1].
inline double sample_bilinear(const Image& img, double x, double y) {
  if (img.empty()) throw ImageTooSmall("bilinear sampling needs a non-empty image");
  if (!bilinear_in_bounds(img, x, y))
    throw OutOfBounds("bilinear sample at (" + std::to_string(x) + ", " + std::to_string(y) +
                      ") outside image " + std::to_string(img.cols()) + "x" +
                      std::to_string(img.rows()));
  return bilinear_raw(img, x, y);
}

inline double sample_bilinear(const Image& img, const Eigen::Vector2d& xy) {
  return sample_bilinear(img, xy.x(), xy.y());
}

// 5-tap binomial blur (1 4 6 4 1)/16, separable, edge-replicated borders.
Image gaussian_blur5(const Image& img);

// Blur + drop odd rows/columns. Output dims are floor(in/2).
Image downsample_half(const Image& img);

// levels >= 1 images, level 0 is the input. Throws TooManyLevels when a level
// would fall below min_dim on either side.
std::vector<Image> build_pyramid(const Image& img, int levels, int min_dim);

std::vector<ImageRgb> build_pyramid_rgb(const ImageRgb& img, int levels, int min_dim);

}  // namespace msplat
