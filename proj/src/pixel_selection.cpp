// SPDX-License-Identifier: Apache-2.0
#include "msplat/pixel_selection.hpp"

#include <algorithm>
#include <cmath>

#include "msplat/png_io.hpp"

namespace msplat {

GradientImage compute_gradients(const Image& img) {
  if (img.rows() < 3 || img.cols() < 3)
    throw ImageTooSmall("gradients need at least a 3x3 image, got " + std::to_string(img.cols()) +
                        "x" + std::to_string(img.rows()));
  GradientImage out;
  out.magnitude = Image(img.rows(), img.cols(), 0.0);
  for (int r = 1; r + 1 < img.rows(); ++r)
    for (int c = 1; c + 1 < img.cols(); ++c) {
      const double gx = 0.5 * (img.at(r, c + 1) - img.at(r, c - 1));
      const double gy = 0.5 * (img.at(r + 1, c) - img.at(r - 1, c));
      out.magnitude.at(r, c) = std::sqrt(gx * gx + gy * gy);
    }
  return out;
}

double selection_threshold_0(const GradientImage& grad, const SelectionConfig& cfg) {
  if (cfg.threshold_0 > 0.0) return cfg.threshold_0;
  const int rows = grad.rows(), cols = grad.cols();
  const int b = cfg.base_block;
  std::vector<double> block_means;
  for (int br = 0; br < rows; br += b)
    for (int bc = 0; bc < cols; bc += b) {
      double sum = 0.0;
      int n = 0;
      for (int r = br; r < std::min(br + b, rows); ++r)
        for (int c = bc; c < std::min(bc + b, cols); ++c) {
          sum += grad.magnitude.at(r, c);
          ++n;
        }
      block_means.push_back(sum / n);
    }
  std::sort(block_means.begin(), block_means.end());
  const double median = block_means[block_means.size() / 2];
  return median + cfg.adaptive_offset;
}

namespace {

// One selection pass. `selected` is the cross-pass occupancy mask.
void run_pass(const GradientImage& grad, int block, double threshold, int pass, PixelRole role,
              std::vector<uint8_t>& selected, std::vector<SelectedPixel>& out) {
  const int rows = grad.rows(), cols = grad.cols();
  for (int br = 0; br < rows; br += block)
    for (int bc = 0; bc < cols; bc += block) {
      double best = -1.0;
      int best_r = -1, best_c = -1;
      for (int r = br; r < std::min(br + block, rows); ++r)
        for (int c = bc; c < std::min(bc + block, cols); ++c) {
          const double m = grad.magnitude.at(r, c);
          if (m > best) {
            best = m;
            best_r = r;
            best_c = c;
          }
        }
      if (best <= threshold) continue;
      uint8_t& occ = selected[static_cast<size_t>(best_r) * cols + best_c];
      if (occ) continue;
      occ = 1;
      out.push_back({{best_c, best_r}, pass, role});
    }
}

}  // namespace

SelectedPixels select_pixels(const GradientImage& grad, const SelectionConfig& cfg) {
  SelectedPixels result;
  std::vector<uint8_t> selected(static_cast<size_t>(grad.rows()) * grad.cols(), 0);
  const double t0 = selection_threshold_0(grad, cfg);
  int block = cfg.base_block;
  double threshold = t0;
  for (int pass = 0; pass < cfg.num_passes; ++pass) {
    run_pass(grad, block, threshold, pass, PixelRole::kTracked, selected, result.pixels);
    block *= cfg.block_growth;
    threshold *= cfg.threshold_decay;
  }
  return result;
}

SelectedPixels select_extra_points(const GradientImage& grad, const SelectedPixels& base,
                                   const SelectionConfig& cfg) {
  if (cfg.extra_point_multiplier <= 1) return base;
  SelectedPixels result = base;
  std::vector<uint8_t> selected(static_cast<size_t>(grad.rows()) * grad.cols(), 0);
  for (const auto& p : base.pixels)
    selected[static_cast<size_t>(p.pixel.y()) * grad.cols() + p.pixel.x()] = 1;
  const double t0 = selection_threshold_0(grad, cfg);
  const double final_threshold = t0 * std::pow(cfg.threshold_decay, cfg.num_passes - 1);
  const int block = std::max(1, cfg.base_block / cfg.extra_point_multiplier);
  run_pass(grad, block, final_threshold, cfg.num_passes, PixelRole::kExtraUntracked, selected,
           result.pixels);
  return result;
}

void write_selection_mask_png(const std::string& path, const SelectedPixels& sel, int rows,
                              int cols) {
  Image mask(rows, cols, 0.0);
  for (const auto& p : sel.pixels) mask.at(p.pixel.y(), p.pixel.x()) = 1.0;
  write_png_gray(path, mask);
}

}  // namespace msplat
