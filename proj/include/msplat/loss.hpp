// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "msplat/image.hpp"

namespace msplat {

struct LossConfig {
  double lambda = 0.2;  // D-SSIM weight
  int ssim_window = 11;
  double ssim_sigma = 1.5;
  double ssim_c1 = 0.01 * 0.01;
  double ssim_c2 = 0.03 * 0.03;
};

// Mean SSIM over all fully-contained windows, averaged across channels.
// Gaussian-weighted window statistics. Throws ImageTooSmall below the window
// size and DimensionMismatch for unequal sizes.
double ssim(const ImageRgb& a, const ImageRgb& b, const LossConfig& cfg);

// (1 - lambda) * mean|a - b| + lambda * (1 - ssim(a, b)) / 2.
double image_loss(const ImageRgb& rendered, const ImageRgb& target, const LossConfig& cfg);

// d image_loss / d rendered, analytically.
ImageRgb image_loss_backward(const ImageRgb& rendered, const ImageRgb& target,
                             const LossConfig& cfg);

}  // namespace msplat
