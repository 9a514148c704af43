// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "msplat/delaunay.hpp"
#include "msplat/image.hpp"
#include "msplat/pixel_selection.hpp"

namespace msplat {

struct Mask {
  int rows = 0, cols = 0;
  std::vector<uint8_t> data;
  bool at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c] != 0; }
  void set(int r, int c, bool v) { data[static_cast<size_t>(r) * cols + c] = v ? 1 : 0; }
};

// True where the gradient magnitude is strictly below `threshold`; these are
// the texture-poor pixels where interpolated depth is trusted.
Mask low_gradient_mask(const GradientImage& grad, double threshold);

struct DensifyConfig {
  double low_gradient_threshold = 3.0 / 255.0;
  int stride = 4;
  // false: average inverse depths (the stored parameterization);
  // true: average metric depths and invert.
  bool average_metric_depth = false;
};

struct InterpolatedPoint {
  Eigen::Vector2d pixel;       // (x, y)
  double inv_depth = 0.0;
  int source_triangle = -1;
  Eigen::Vector3d color{0, 0, 0};
};

// Samples a stride-aligned grid; emits a point wherever the sample is masked
// low-gradient and falls inside a triangle (lowest triangle index wins on
// shared edges). Depth is the average of the triangle's vertex depths.
std::vector<InterpolatedPoint> interpolate_depth(const Triangulation2D& tri,
                                                 const std::vector<double>& vertex_inv_depths,
                                                 const Mask& mask, const ImageRgb& rgb,
                                                 const DensifyConfig& cfg);

void write_triangulation_svg(const std::string& path, const Triangulation2D& tri, int width,
                             int height);

}  // namespace msplat
