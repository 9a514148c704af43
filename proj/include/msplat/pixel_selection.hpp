// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "msplat/image.hpp"

namespace msplat {

struct GradientImage {
  Image magnitude;  // sqrt(gx^2 + gy^2), central differences, zero border
  int rows() const { return magnitude.rows(); }
  int cols() const { return magnitude.cols(); }
};

// Throws ImageTooSmall below 3x3.
GradientImage compute_gradients(const Image& img);

struct SelectionConfig {
  int base_block = 16;
  int num_passes = 3;
  // 0 means adaptive: median block-mean gradient of the base grid plus
  // adaptive_offset.
  double threshold_0 = 0.0;
  double threshold_decay = 0.5;
  int block_growth = 2;
  int extra_point_multiplier = 2;
  double adaptive_offset = 7.0 / 255.0;
};

enum class PixelRole { kTracked, kExtraUntracked };

struct SelectedPixel {
  Eigen::Vector2i pixel;  // (x, y) = (col, row)
  int pass = 0;
  PixelRole role = PixelRole::kTracked;
};

struct SelectedPixels {
  std::vector<SelectedPixel> pixels;
};

// The pass-0 threshold actually used (resolves the adaptive rule).
double selection_threshold_0(const GradientImage& grad, const SelectionConfig& cfg);

// Multi-pass block-argmax selection. Pass k uses block edge
// base_block * block_growth^k and threshold threshold_0 * decay^k; a block
// contributes its gradient argmax iff that magnitude exceeds the pass
// threshold and the pixel is not already selected. Blocks and in-block scans
// run row-major; argmax ties keep the first visit.
SelectedPixels select_pixels(const GradientImage& grad, const SelectionConfig& cfg);

// One more pass with block edge base_block / extra_point_multiplier at the
// final (lowest) cascade threshold; skips pixels present in `base`, tags
// results kExtraUntracked. multiplier == 1 returns `base` unchanged.
SelectedPixels select_extra_points(const GradientImage& grad, const SelectedPixels& base,
                                   const SelectionConfig& cfg);

// Debug view: selected pixels white on black.
void write_selection_mask_png(const std::string& path, const SelectedPixels& sel, int rows,
                              int cols);

}  // namespace msplat
