// SPDX-License-Identifier: Apache-2.0
#include "msplat/loss.hpp"

#include <cmath>
#include <vector>

namespace msplat {

namespace {

std::vector<double> gaussian_kernel(int n, double sigma) {
  std::vector<double> k(n);
  const double c = 0.5 * (n - 1);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    k[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Valid-mode separable correlation; output is (rows-n+1) x (cols-n+1).
Image conv_valid(const Image& img, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int rows = img.rows(), cols = img.cols();
  Image tmp(rows, cols - n + 1);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c + n <= cols; ++c) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += k[j] * img.at(r, c + j);
      tmp.at(r, c) = acc;
    }
  Image out(rows - n + 1, cols - n + 1);
  for (int r = 0; r + n <= rows; ++r)
    for (int c = 0; c < tmp.cols(); ++c) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * tmp.at(r + i, c);
      out.at(r, c) = acc;
    }
  return out;
}

// Transpose of conv_valid: scatters window-space values back onto pixels.
// Input is (rows-n+1) x (cols-n+1) window space, output rows x cols.
Image conv_scatter(const Image& field, const std::vector<double>& k, int rows, int cols) {
  const int n = static_cast<int>(k.size());
  Image tmp(rows, field.cols(), 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < field.cols(); ++c) {
      double acc = 0.0;
      const int i0 = std::max(0, r - field.rows() + 1), i1 = std::min(n - 1, r);
      for (int i = i0; i <= i1; ++i) acc += k[i] * field.at(r - i, c);
      tmp.at(r, c) = acc;
    }
  Image out(rows, cols, 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      const int j0 = std::max(0, c - tmp.cols() + 1), j1 = std::min(n - 1, c);
      for (int j = j0; j <= j1; ++j) acc += k[j] * tmp.at(r, c - j);
      out.at(r, c) = acc;
    }
  return out;
}

Image multiply(const Image& a, const Image& b) {
  Image out(a.rows(), a.cols());
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c) out.at(r, c) = a.at(r, c) * b.at(r, c);
  return out;
}

void check_ssim_inputs(const ImageRgb& a, const ImageRgb& b, const LossConfig& cfg) {
  if (!a.same_size(b))
    throw DimensionMismatch("ssim inputs are " + std::to_string(a.cols()) + "x" +
                            std::to_string(a.rows()) + " vs " + std::to_string(b.cols()) + "x" +
                            std::to_string(b.rows()));
  if (a.rows() < cfg.ssim_window || a.cols() < cfg.ssim_window)
    throw ImageTooSmall("ssim needs at least " + std::to_string(cfg.ssim_window) + "x" +
                        std::to_string(cfg.ssim_window) + " pixels");
}

struct SsimWindows {
  Image mu_x, mu_y, var_x, var_y, cov_xy;
};

SsimWindows window_stats(const Image& x, const Image& y, const std::vector<double>& k) {
  SsimWindows s;
  s.mu_x = conv_valid(x, k);
  s.mu_y = conv_valid(y, k);
  Image ex2 = conv_valid(multiply(x, x), k);
  Image ey2 = conv_valid(multiply(y, y), k);
  Image exy = conv_valid(multiply(x, y), k);
  const int rows = s.mu_x.rows(), cols = s.mu_x.cols();
  s.var_x = Image(rows, cols);
  s.var_y = Image(rows, cols);
  s.cov_xy = Image(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      s.var_x.at(r, c) = ex2.at(r, c) - s.mu_x.at(r, c) * s.mu_x.at(r, c);
      s.var_y.at(r, c) = ey2.at(r, c) - s.mu_y.at(r, c) * s.mu_y.at(r, c);
      s.cov_xy.at(r, c) = exy.at(r, c) - s.mu_x.at(r, c) * s.mu_y.at(r, c);
    }
  return s;
}

}  // namespace

double ssim(const ImageRgb& a, const ImageRgb& b, const LossConfig& cfg) {
  check_ssim_inputs(a, b, cfg);
  const auto k = gaussian_kernel(cfg.ssim_window, cfg.ssim_sigma);
  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    const SsimWindows s = window_stats(a.ch[ch], b.ch[ch], k);
    double acc = 0.0;
    for (int r = 0; r < s.mu_x.rows(); ++r)
      for (int c = 0; c < s.mu_x.cols(); ++c) {
        const double mx = s.mu_x.at(r, c), my = s.mu_y.at(r, c);
        const double a1 = 2.0 * mx * my + cfg.ssim_c1;
        const double a2 = 2.0 * s.cov_xy.at(r, c) + cfg.ssim_c2;
        const double b1 = mx * mx + my * my + cfg.ssim_c1;
        const double b2 = s.var_x.at(r, c) + s.var_y.at(r, c) + cfg.ssim_c2;
        acc += (a1 * a2) / (b1 * b2);
      }
    total += acc / (static_cast<double>(s.mu_x.rows()) * s.mu_x.cols());
  }
  return total / 3.0;
}

double image_loss(const ImageRgb& rendered, const ImageRgb& target, const LossConfig& cfg) {
  check_ssim_inputs(rendered, target, cfg);
  double l1 = 0.0;
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < rendered.rows(); ++r)
      for (int c = 0; c < rendered.cols(); ++c)
        l1 += std::abs(rendered.ch[ch].at(r, c) - target.ch[ch].at(r, c));
  l1 /= 3.0 * rendered.rows() * rendered.cols();
  return (1.0 - cfg.lambda) * l1 + cfg.lambda * 0.5 * (1.0 - ssim(rendered, target, cfg));
}

ImageRgb image_loss_backward(const ImageRgb& rendered, const ImageRgb& target,
                             const LossConfig& cfg) {
  check_ssim_inputs(rendered, target, cfg);
  const auto k = gaussian_kernel(cfg.ssim_window, cfg.ssim_sigma);
  const int rows = rendered.rows(), cols = rendered.cols();
  ImageRgb grad(rows, cols, 0.0);

  const double l1_w = (1.0 - cfg.lambda) / (3.0 * rows * cols);
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const double d = rendered.ch[ch].at(r, c) - target.ch[ch].at(r, c);
        grad.ch[ch].at(r, c) = d > 0.0 ? l1_w : (d < 0.0 ? -l1_w : 0.0);
      }

  // d/dx of lambda/2 * (1 - mean_windows_channels SSIM) = -lambda/2 * dSSIM/dx
  for (int ch = 0; ch < 3; ++ch) {
    const Image& x = rendered.ch[ch];
    const Image& y = target.ch[ch];
    const SsimWindows s = window_stats(x, y, k);
    const int wr = s.mu_x.rows(), wc = s.mu_x.cols();
    const double scale =
        -cfg.lambda * 0.5 / (3.0 * static_cast<double>(wr) * wc);  // dL/dS per window
    Image f_const(wr, wc), f_x(wr, wc), f_y(wr, wc);
    for (int r = 0; r < wr; ++r)
      for (int c = 0; c < wc; ++c) {
        const double mx = s.mu_x.at(r, c), my = s.mu_y.at(r, c);
        const double a1 = 2.0 * mx * my + cfg.ssim_c1;
        const double a2 = 2.0 * s.cov_xy.at(r, c) + cfg.ssim_c2;
        const double b1 = mx * mx + my * my + cfg.ssim_c1;
        const double b2 = s.var_x.at(r, c) + s.var_y.at(r, c) + cfg.ssim_c2;
        const double ib = 1.0 / (b1 * b2);
        const double dS_dA1 = a2 * ib;
        const double dS_dA2 = a1 * ib;
        const double dS_dB1 = -a1 * a2 * ib / b1;
        const double dS_dB2 = -a1 * a2 * ib / b2;
        // dS/dx_p = w_p * (const + 2 dS_dA2 * y_p + 2 dS_dB2 * x_p)
        const double c_a2 = 2.0 * dS_dA2;
        const double c_b2 = 2.0 * dS_dB2;
        f_const.at(r, c) = scale * (2.0 * my * dS_dA1 + 2.0 * mx * dS_dB1 - my * c_a2 - mx * c_b2);
        f_y.at(r, c) = scale * c_a2;
        f_x.at(r, c) = scale * c_b2;
      }
    const Image g_const = conv_scatter(f_const, k, rows, cols);
    const Image g_x = conv_scatter(f_x, k, rows, cols);
    const Image g_y = conv_scatter(f_y, k, rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        grad.ch[ch].at(r, c) +=
            g_const.at(r, c) + x.at(r, c) * g_x.at(r, c) + y.at(r, c) * g_y.at(r, c);
  }
  return grad;
}

}  // namespace msplat
