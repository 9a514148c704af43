// SPDX-License-Identifier: Apache-2.0
#include "msplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>

namespace msplat {

namespace {

// Shared by forward and backward so both evaluate bit-identical expressions.
struct PixelEval {
  double dx, dy, g, alpha;
  bool capped;
};

inline PixelEval eval_splat_at(const SplatProjection& s, const Eigen::Matrix2d& conic, double px,
                               double py, double cap) {
  PixelEval e;
  e.dx = px - s.mean2d.x();
  e.dy = py - s.mean2d.y();
  const double power =
      -0.5 * (conic(0, 0) * e.dx * e.dx + conic(1, 1) * e.dy * e.dy) - conic(0, 1) * e.dx * e.dy;
  e.g = std::exp(power);
  const double a = s.alpha_peak * e.g;
  e.capped = a >= cap;
  e.alpha = e.capped ? cap : a;
  return e;
}

inline Eigen::Matrix2d invert_cov2d(const Eigen::Matrix2d& c) {
  const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
  Eigen::Matrix2d inv;
  const double id = 1.0 / det;
  inv(0, 0) = c(1, 1) * id;
  inv(1, 1) = c(0, 0) * id;
  inv(0, 1) = -c(0, 1) * id;
  inv(1, 0) = inv(0, 1);
  return inv;
}

}  // namespace

std::optional<SplatProjection> project_gaussian(const Gaussian3D& g, const Se3Pose& view,
                                                const PinholeCamera& cam,
                                                const RenderConfig& cfg) {
  const Eigen::Vector3d xc = view.apply(g.location);
  if (xc.z() <= cfg.z_near) return std::nullopt;
  const Eigen::Vector2d mean(cam.fx * xc.x() / xc.z() + cam.cx,
                             cam.fy * xc.y() / xc.z() + cam.cy);
  if (mean.x() < 0.0 || mean.x() > cam.width - 1.0 || mean.y() < 0.0 ||
      mean.y() > cam.height - 1.0)
    return std::nullopt;

  const Eigen::Matrix<double, 2, 3> J = projection_jacobian(xc, cam);
  const Eigen::Matrix3d W = view.rotation.toRotationMatrix();
  const Eigen::Matrix<double, 2, 3> M = J * W;
  Eigen::Matrix2d cov = M * covariance_3d(g) * M.transpose();
  cov(0, 0) += cfg.cov2d_floor;
  cov(1, 1) += cfg.cov2d_floor;

  SplatProjection s;
  s.mean2d = mean;
  s.cov2d = cov;
  s.depth = xc.z();
  s.color = g.color;
  s.alpha_peak = sigmoid(g.opacity_logit);
  return s;
}

RenderOutput render(const GaussianMap& map, const Se3Pose& view, const PinholeCamera& cam,
                    const RenderConfig& cfg) {
  RenderOutput out;
  out.width = cam.width;
  out.height = cam.height;
  out.image = ImageRgb(cam.height, cam.width, 0.0);
  out.final_transmittance = Image(cam.height, cam.width, 1.0);
  out.map_revision = map.revision;

  for (size_t i = 0; i < map.size(); ++i) {
    auto s = project_gaussian(map.gaussians[i], view, cam, cfg);
    if (!s) continue;
    s->gaussian_index = static_cast<int>(i);
    out.splats.push_back(*s);
  }
  std::sort(out.splats.begin(), out.splats.end(),
            [](const SplatProjection& a, const SplatProjection& b) {
              if (a.depth != b.depth) return a.depth < b.depth;
              return a.gaussian_index < b.gaussian_index;
            });
  out.conics.resize(out.splats.size());
  std::vector<double> rx(out.splats.size()), ry(out.splats.size());
  for (size_t k = 0; k < out.splats.size(); ++k) {
    out.conics[k] = invert_cov2d(out.splats[k].cov2d);
    rx[k] = cfg.sigma_bound * std::sqrt(out.splats[k].cov2d(0, 0));
    ry[k] = cfg.sigma_bound * std::sqrt(out.splats[k].cov2d(1, 1));
  }

  const size_t n_px = static_cast<size_t>(cam.width) * cam.height;
  std::vector<std::vector<int32_t>> per_pixel;
  if (cfg.record_blend) per_pixel.resize(n_px);

  const int tiles_x = (cam.width + cfg.tile_size - 1) / cfg.tile_size;
  const int tiles_y = (cam.height + cfg.tile_size - 1) / cfg.tile_size;
  std::vector<int32_t> tile_list;
  for (int ty = 0; ty < tiles_y; ++ty)
    for (int tx = 0; tx < tiles_x; ++tx) {
      const int x0 = tx * cfg.tile_size, x1 = std::min(cam.width, x0 + cfg.tile_size) - 1;
      const int y0 = ty * cfg.tile_size, y1 = std::min(cam.height, y0 + cfg.tile_size) - 1;
      tile_list.clear();
      for (size_t k = 0; k < out.splats.size(); ++k) {
        const auto& s = out.splats[k];
        if (s.mean2d.x() - rx[k] > x1 || s.mean2d.x() + rx[k] < x0 ||
            s.mean2d.y() - ry[k] > y1 || s.mean2d.y() + ry[k] < y0)
          continue;
        tile_list.push_back(static_cast<int32_t>(k));
      }
      if (tile_list.empty()) continue;
      for (int py = y0; py <= y1; ++py)
        for (int px = x0; px <= x1; ++px) {
          double T = 1.0;
          double c0 = 0.0, c1 = 0.0, c2 = 0.0;
          std::vector<int32_t>* contrib =
              cfg.record_blend ? &per_pixel[static_cast<size_t>(py) * cam.width + px] : nullptr;
          for (int32_t k : tile_list) {
            const auto& s = out.splats[k];
            if (std::abs(px - s.mean2d.x()) > rx[k] || std::abs(py - s.mean2d.y()) > ry[k])
              continue;
            const PixelEval e = eval_splat_at(s, out.conics[k], px, py, cfg.alpha_cap);
            const double test_T = T * (1.0 - e.alpha);
            if (test_T < cfg.termination_threshold) break;
            c0 += T * e.alpha * s.color.x();
            c1 += T * e.alpha * s.color.y();
            c2 += T * e.alpha * s.color.z();
            T = test_T;
            if (contrib) contrib->push_back(k);
          }
          out.image.ch[0].at(py, px) = c0;
          out.image.ch[1].at(py, px) = c1;
          out.image.ch[2].at(py, px) = c2;
          out.final_transmittance.at(py, px) = T;
        }
    }

  if (cfg.record_blend) {
    out.contrib_offsets.resize(n_px + 1, 0);
    size_t total = 0;
    for (size_t i = 0; i < n_px; ++i) {
      out.contrib_offsets[i] = static_cast<uint32_t>(total);
      total += per_pixel[i].size();
    }
    out.contrib_offsets[n_px] = static_cast<uint32_t>(total);
    out.contrib_splats.reserve(total);
    for (size_t i = 0; i < n_px; ++i)
      out.contrib_splats.insert(out.contrib_splats.end(), per_pixel[i].begin(),
                                per_pixel[i].end());
  }
  return out;
}

void GaussianGradients::resize(size_t n) {
  d_location.assign(n, Eigen::Vector3d::Zero());
  d_rotation.assign(n, Eigen::Vector4d::Zero());
  d_log_scale.assign(n, Eigen::Vector3d::Zero());
  d_opacity_logit.assign(n, 0.0);
  d_color.assign(n, Eigen::Vector3d::Zero());
  mean2d_abs_grad.assign(n, Eigen::Vector2d::Zero());
  mean2d_signed_grad.assign(n, Eigen::Vector2d::Zero());
  projected.assign(n, 0);
}

namespace {

// d(rotation matrix)/d(unit quaternion component), at unit q, (w, x, y, z).
void rotation_matrix_quat_jacobian(const Eigen::Quaterniond& q, Eigen::Matrix3d dR[4]) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  dR[0] << 0, -z, y, z, 0, -x, -y, x, 0;           // d/dw
  dR[1] << 0, y, z, y, -2 * x, -w, z, w, -2 * x;   // d/dx
  dR[2] << -2 * y, x, w, x, 0, z, -w, z, -2 * y;   // d/dy
  dR[3] << -2 * z, -w, x, w, -2 * z, y, x, y, 0;   // d/dz
  for (int i = 0; i < 4; ++i) dR[i] *= 2.0;
}

}  // namespace

GaussianGradients render_backward(const RenderOutput& out, const ImageRgb& dL_dimage,
                                  const GaussianMap& map, const Se3Pose& view,
                                  const PinholeCamera& cam, const RenderConfig& cfg) {
  if (out.map_revision != map.revision)
    throw MismatchedSnapshot("render snapshot revision " + std::to_string(out.map_revision) +
                             " does not match map revision " + std::to_string(map.revision));
  if (out.contrib_offsets.empty())
    throw MismatchedSnapshot("render output was produced without blend recording");
  if (dL_dimage.rows() != out.height || dL_dimage.cols() != out.width)
    throw DimensionMismatch("gradient image does not match the rendered size");

  const size_t n_splats = out.splats.size();
  // per-splat accumulators over pixels
  std::vector<Eigen::Vector2d> acc_dmean(n_splats, Eigen::Vector2d::Zero());
  std::vector<Eigen::Vector2d> acc_dmean_abs(n_splats, Eigen::Vector2d::Zero());
  std::vector<Eigen::Matrix2d> acc_dconic(n_splats, Eigen::Matrix2d::Zero());
  std::vector<Eigen::Vector3d> acc_dcolor(n_splats, Eigen::Vector3d::Zero());
  std::vector<double> acc_dpeak(n_splats, 0.0);

  for (int py = 0; py < out.height; ++py)
    for (int px = 0; px < out.width; ++px) {
      const size_t pix = static_cast<size_t>(py) * out.width + px;
      const uint32_t begin = out.contrib_offsets[pix], end = out.contrib_offsets[pix + 1];
      if (begin == end) continue;
      const Eigen::Vector3d gpx = dL_dimage.at(py, px);
      if (gpx.x() == 0.0 && gpx.y() == 0.0 && gpx.z() == 0.0) continue;

      double T = out.final_transmittance.at(py, px);
      double last_alpha = 0.0;
      Eigen::Vector3d last_color = Eigen::Vector3d::Zero();
      Eigen::Vector3d accum = Eigen::Vector3d::Zero();  // blended color behind current splat
      for (uint32_t i = end; i-- > begin;) {
        const int32_t k = out.contrib_splats[i];
        const SplatProjection& s = out.splats[k];
        const Eigen::Matrix2d& conic = out.conics[k];
        const PixelEval e = eval_splat_at(s, conic, px, py, cfg.alpha_cap);
        T /= (1.0 - e.alpha);  // transmittance in front of this splat

        accum = last_alpha * last_color + (1.0 - last_alpha) * accum;
        const double dL_dalpha = (s.color - accum).dot(gpx) * T;
        acc_dcolor[k] += gpx * (e.alpha * T);
        last_alpha = e.alpha;
        last_color = s.color;

        if (e.capped) continue;  // clamped alpha blocks gradients to G and opacity
        const double dL_dG = s.alpha_peak * dL_dalpha;
        acc_dpeak[k] += e.g * dL_dalpha;
        const double dpower = e.g * dL_dG;

        const double gx = conic(0, 0) * e.dx + conic(0, 1) * e.dy;
        const double gy = conic(1, 1) * e.dy + conic(0, 1) * e.dx;
        const Eigen::Vector2d dmean(dpower * gx, dpower * gy);
        acc_dmean[k] += dmean;
        acc_dmean_abs[k] += dmean.cwiseAbs();
        acc_dconic[k](0, 0) += dpower * (-0.5 * e.dx * e.dx);
        acc_dconic[k](0, 1) += dpower * (-0.5 * e.dx * e.dy);
        acc_dconic[k](1, 0) += dpower * (-0.5 * e.dx * e.dy);
        acc_dconic[k](1, 1) += dpower * (-0.5 * e.dy * e.dy);
      }
    }

  GaussianGradients grads;
  grads.resize(map.size());
  const Eigen::Matrix3d W = view.rotation.toRotationMatrix();

  for (size_t k = 0; k < n_splats; ++k) {
    const SplatProjection& s = out.splats[k];
    const int gi = s.gaussian_index;
    const Gaussian3D& g = map.gaussians[gi];
    grads.projected[gi] = 1;
    grads.d_color[gi] += acc_dcolor[k];
    grads.mean2d_signed_grad[gi] += acc_dmean[k];
    grads.mean2d_abs_grad[gi] += acc_dmean_abs[k];

    // opacity through the sigmoid
    grads.d_opacity_logit[gi] += acc_dpeak[k] * s.alpha_peak * (1.0 - s.alpha_peak);

    // conic -> cov2d
    const Eigen::Matrix2d A = out.conics[k];
    const Eigen::Matrix2d dL_dcov = -A * acc_dconic[k] * A;

    // cov2d = M Sigma3 M^T + floor, M = J W
    const Eigen::Vector3d xc = view.apply(g.location);
    const Eigen::Matrix<double, 2, 3> J = projection_jacobian(xc, cam);
    const Eigen::Matrix<double, 2, 3> M = J * W;
    const Eigen::Quaterniond qn = g.rotation.normalized();
    const Eigen::Matrix3d R = qn.toRotationMatrix();
    const Eigen::Vector3d s2 = (2.0 * g.log_scale).array().exp();
    const Eigen::Matrix3d Sigma3 = R * s2.asDiagonal() * R.transpose();

    const Eigen::Matrix3d dL_dSigma3 = M.transpose() * dL_dcov * M;
    const Eigen::Matrix<double, 2, 3> dL_dM = 2.0 * dL_dcov * M * Sigma3;
    const Eigen::Matrix<double, 2, 3> dL_dJ = dL_dM * W.transpose();

    // camera-space point: through the projection of the mean and through J
    Eigen::Vector3d dL_dxc = J.transpose() * acc_dmean[k];
    const double iz = 1.0 / xc.z();
    const double iz2 = iz * iz;
    const double iz3 = iz2 * iz;
    dL_dxc.x() += dL_dJ(0, 2) * (-cam.fx * iz2);
    dL_dxc.y() += dL_dJ(1, 2) * (-cam.fy * iz2);
    dL_dxc.z() += dL_dJ(0, 0) * (-cam.fx * iz2) + dL_dJ(1, 1) * (-cam.fy * iz2) +
                  dL_dJ(0, 2) * (2.0 * cam.fx * xc.x() * iz3) +
                  dL_dJ(1, 2) * (2.0 * cam.fy * xc.y() * iz3);
    grads.d_location[gi] += W.transpose() * dL_dxc;

    // Sigma3 = R diag(exp(2s)) R^T
    const Eigen::Matrix3d dL_dR = 2.0 * dL_dSigma3 * R * s2.asDiagonal();
    const Eigen::Vector3d dD = (R.transpose() * dL_dSigma3 * R).diagonal();
    grads.d_log_scale[gi] += (dD.array() * 2.0 * s2.array()).matrix();

    Eigen::Matrix3d dRdq[4];
    rotation_matrix_quat_jacobian(qn, dRdq);
    Eigen::Vector4d dq_unit;
    for (int c = 0; c < 4; ++c) dq_unit[c] = (dL_dR.array() * dRdq[c].array()).sum();
    // through normalization q_hat = q / |q|
    const Eigen::Vector4d qv(g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z());
    const double qnorm = qv.norm();
    const Eigen::Vector4d qhat = qv / qnorm;
    grads.d_rotation[gi] += (dq_unit - qhat * qhat.dot(dq_unit)) / qnorm;
  }
  return grads;
}

}  // namespace msplat
