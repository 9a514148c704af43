// SPDX-License-Identifier: Apache-2.0
#include "msplat/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace msplat {

namespace {

constexpr double kRhoMin = 1e-4;
constexpr double kRhoMax = 1e4;

double huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huber_weight(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 1.0 : delta / a;
}

// Truncated Huber: residuals past `cut` pay a flat occlusion penalty so a few
// points landing on the wrong surface cannot dominate the energy.
double capped_huber(double r, double delta, double cut) {
  return huber(std::min(std::abs(r), cut), delta);
}

// Valid sampling region: one pixel inside the border so the gradient images
// (zero on the border) are never interpolated against garbage.
bool in_interior(const Image& img, double x, double y) {
  return x >= 1.0 && y >= 1.0 && x <= img.cols() - 2.0 && y <= img.rows() - 2.0;
}

Image central_diff_x(const Image& img) {
  Image out(img.rows(), img.cols(), 0.0);
  for (int r = 0; r < img.rows(); ++r)
    for (int c = 1; c < img.cols() - 1; ++c)
      out.at(r, c) = 0.5 * (img.at(r, c + 1) - img.at(r, c - 1));
  return out;
}

Image central_diff_y(const Image& img) {
  Image out(img.rows(), img.cols(), 0.0);
  for (int r = 1; r < img.rows() - 1; ++r)
    for (int c = 0; c < img.cols(); ++c)
      out.at(r, c) = 0.5 * (img.at(r + 1, c) - img.at(r - 1, c));
  return out;
}

// One target frame a point's depth is optimized against.
struct DepthTarget {
  const Image* gray;
  const Image* grad_x;
  const Image* grad_y;
  Se3Pose from_host;  // host camera -> target camera
  double gain;        // (e_t a_t) / (e_h a_h)
  double bias;        // target affine b
};

// Gauss-Newton on a single inverse depth with step halving. Returns the final
// summed Huber energy over the targets; writes the depth and its variance.
// A value that ends pinned at rho_lo/rho_hi found no photometric support
// inside the depth prior and marks the point invalid (inv_depth = -1).
double refine_inverse_depth(TrackedPoint& pt, double host_intensity, double host_bias,
                            const PinholeCamera& cam, const std::vector<DepthTarget>& targets,
                            int max_iters, double delta, double cut, double rho_lo,
                            double rho_hi) {
  const Eigen::Vector3d ray = pixel_ray(pt.pixel, cam);
  double rho = std::clamp(pt.inv_depth, rho_lo, rho_hi);

  auto energy = [&](double r) {
    double sum = 0.0;
    for (const DepthTarget& t : targets) {
      const Eigen::Vector3d xc = t.from_host.apply(ray / r);
      if (xc.z() <= 1e-8) continue;
      const double u = cam.fx * xc.x() / xc.z() + cam.cx;
      const double v = cam.fy * xc.y() / xc.z() + cam.cy;
      if (!in_interior(*t.gray, u, v)) continue;
      const double res =
          (bilinear_raw(*t.gray, u, v) - t.bias) - t.gain * (host_intensity - host_bias);
      sum += capped_huber(res, delta, cut);
    }
    return sum;
  };

  double e = energy(rho);
  double information = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    double hs = 0.0, gs = 0.0;
    int rows = 0;
    for (const DepthTarget& t : targets) {
      const Eigen::Vector3d xc = t.from_host.apply(ray / rho);
      if (xc.z() <= 1e-8) continue;
      const double u = cam.fx * xc.x() / xc.z() + cam.cx;
      const double v = cam.fy * xc.y() / xc.z() + cam.cy;
      if (!in_interior(*t.gray, u, v)) continue;
      const double res =
          (bilinear_raw(*t.gray, u, v) - t.bias) - t.gain * (host_intensity - host_bias);
      if (std::abs(res) > cut) continue;
      const double w = huber_weight(res, delta);
      const Eigen::Vector2d g(bilinear_raw(*t.grad_x, u, v), bilinear_raw(*t.grad_y, u, v));
      const Eigen::Vector3d dxc = t.from_host.rotation * ray * (-1.0 / (rho * rho));
      const double j = g.transpose() * projection_jacobian(xc, cam) * dxc;
      hs += w * j * j;
      gs += w * j * res;
      ++rows;
    }
    if (rows == 0 || hs <= 0.0) break;
    information = hs;
    const double step = -gs / hs;
    bool accepted = false;
    for (double lam = 1.0; lam >= 1.0 / 64.0; lam *= 0.5) {
      const double cand = std::clamp(rho + lam * step, rho_lo, rho_hi);
      const double ec = energy(cand);
      if (ec < e) {
        rho = cand;
        e = ec;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (rho <= rho_lo || rho >= rho_hi) {
    pt.inv_depth = -1.0;
    return e;
  }
  pt.inv_depth = rho;
  if (information > 0.0) pt.inv_depth_variance = 1.0 / information;
  return e;
}

}  // namespace

FramePyramid build_frame_pyramid(const Image& level0, int max_levels, int min_dim) {
  int feasible = 1;
  while (feasible < max_levels && (level0.cols() >> feasible) >= min_dim &&
         (level0.rows() >> feasible) >= min_dim)
    ++feasible;
  FramePyramid p;
  p.gray = build_pyramid(level0, feasible, min_dim);
  p.grad_x.reserve(p.gray.size());
  p.grad_y.reserve(p.gray.size());
  for (const Image& g : p.gray) {
    p.grad_x.push_back(central_diff_x(g));
    p.grad_y.push_back(central_diff_y(g));
  }
  return p;
}

double photometric_residual(const TrackedPoint& pt, const Image& host_img,
                            const PhotometricCalib& host, const Image& target_img,
                            const PhotometricCalib& target, const Se3Pose& target_from_host,
                            const PinholeCamera& cam) {
  const Eigen::Vector3d xh = backproject(pt.pixel, pt.inv_depth, cam);
  const Eigen::Vector3d xt = target_from_host.apply(xh);
  if (xt.z() <= 0.0)
    throw PointBehindCamera("point at inverse depth " + std::to_string(pt.inv_depth) +
                            " lands behind the target camera");
  const Eigen::Vector2d pt_t = project(xt, cam);
  if (!bilinear_in_bounds(target_img, pt_t.x(), pt_t.y()))
    throw ReprojectionOutOfBounds("reprojection (" + std::to_string(pt_t.x()) + ", " +
                                  std::to_string(pt_t.y()) + ") outside the target image");
  const double ih = sample_bilinear(host_img, pt.pixel);
  const double it = bilinear_raw(target_img, pt_t.x(), pt_t.y());
  const double gain = (target.exposure * target.affine_a) / (host.exposure * host.affine_a);
  return (it - target.affine_b) - gain * (ih - host.affine_b);
}

Frontend::Frontend(PinholeCamera camera, FrontendConfig cfg, uint64_t seed)
    : camera_(std::move(camera)), cfg_(cfg), rng_(seed) {
  if (cfg_.pyramid_levels < 1 || cfg_.refine_rounds < 0 || cfg_.epipolar_samples < 2)
    throw BadConfig("frontend config out of range");
  if (!(cfg_.min_inv_depth > 0.0) || cfg_.max_inv_depth <= cfg_.min_inv_depth)
    throw BadConfig("inverse depth prior range is empty");
}

TrackResult Frontend::track_frame(const FramePyramid& frame, const PhotometricCalib& frame_calib,
                                  const Se3Pose& init_frame_from_ref) const {
  if (window_.frames.empty()) throw DegenerateInput("tracking requires a reference keyframe");
  const Keyframe& ref = window_.frames.back();
  const int levels = std::min(frame.levels(), ref.pyramid.levels());

  struct HostPoint {
    Eigen::Vector3d ray;
    double rho;
    Eigen::Vector2d px;
  };
  std::vector<HostPoint> host;
  host.reserve(ref.points.size());
  for (const TrackedPoint& pt : ref.points) {
    if (pt.role != PixelRole::kTracked) continue;
    if (!(pt.inv_depth > 0.0) || !std::isfinite(pt.inv_depth)) continue;
    host.push_back({pixel_ray(pt.pixel, camera_), pt.inv_depth, pt.pixel});
  }

  TrackResult out;
  out.frame_from_ref = init_frame_from_ref;
  out.pose = compose(ref.pose, invert(init_frame_from_ref));
  out.affine_a = frame_calib.affine_a;
  out.affine_b = frame_calib.affine_b;
  if (host.empty()) {
    out.lost = true;
    return out;
  }

  const double host_bias = ref.calib.affine_b;
  // gain = (e_f a_f)/(e_h a_h); the exposure part is known, the rest is the
  // optimized log gain, kept within a bounded band so a textureless frame
  // cannot be explained away by collapsing the gain to zero.
  const double beta_center = std::log(frame_calib.exposure / ref.calib.exposure);
  auto bound_beta = [&](double x) {
    return std::clamp(x, beta_center - cfg_.affine_log_gain_limit,
                      beta_center + cfg_.affine_log_gain_limit);
  };
  auto bound_bias = [&](double x) {
    return std::clamp(x, -cfg_.affine_bias_limit, cfg_.affine_bias_limit);
  };

  Se3Pose T = init_frame_from_ref;
  double beta = bound_beta(
      std::log(std::max(frame_calib.exposure * frame_calib.affine_a, 1e-12) /
               (ref.calib.exposure * ref.calib.affine_a)));
  double bias = bound_bias(frame_calib.affine_b);
  const double delta = cfg_.huber_delta;

  // Mean truncated-Huber energy over the residuals valid at `level` for the
  // given state and occlusion cut. n_valid counts geometric validity;
  // n_inlier the residuals under the cut.
  auto eval_level = [&](int level, const Se3Pose& Tc, double betac, double bc, double cut,
                        int* n_valid, int* n_inlier = nullptr) {
    const PinholeCamera cam_l = camera_.scaled(level);
    const Image& tgt = frame.gray[level];
    const Image& hgray = ref.pyramid.gray[level];
    const double gain = std::exp(betac);
    double sum = 0.0;
    int n = 0, ni = 0;
    for (const HostPoint& hp : host) {
      const Eigen::Vector2d pl = scale_pixel(hp.px, level);
      if (!bilinear_in_bounds(hgray, pl.x(), pl.y())) continue;
      const Eigen::Vector3d xc = Tc.apply(hp.ray / hp.rho);
      if (xc.z() <= 1e-8) continue;
      const double u = cam_l.fx * xc.x() / xc.z() + cam_l.cx;
      const double v = cam_l.fy * xc.y() / xc.z() + cam_l.cy;
      if (!in_interior(tgt, u, v)) continue;
      const double r =
          (bilinear_raw(tgt, u, v) - bc) - gain * (bilinear_raw(hgray, pl.x(), pl.y()) - host_bias);
      sum += capped_huber(r, delta, cut);
      ++n;
      if (std::abs(r) <= cut) ++ni;
    }
    if (n_valid) *n_valid = n;
    if (n_inlier) *n_inlier = ni;
    return n > 0 ? sum / n : std::numeric_limits<double>::infinity();
  };

  for (int level = levels - 1; level >= 0; --level) {
    const PinholeCamera cam_l = camera_.scaled(level);
    const Image& tgt = frame.gray[level];
    const Image& tgx = frame.grad_x[level];
    const Image& tgy = frame.grad_y[level];
    const Image& hgray = ref.pyramid.gray[level];

    // A misaligned start saturates most residuals; widen the occlusion cut
    // until at least 40% survive so the system keeps its signal, and let the
    // finer levels tighten it again as the alignment improves.
    double cut = cfg_.outlier_residual;
    int n0 = 0, ni0 = 0;
    double e = eval_level(level, T, beta, bias, cut, &n0, &ni0);
    while (n0 > 0 && cut < 1.0 && ni0 < (2 * n0) / 5) {
      cut *= 2.0;
      e = eval_level(level, T, beta, bias, cut, &n0, &ni0);
    }
    if (n0 == 0) continue;

    for (int it = 0; it < cfg_.gn_iterations; ++it) {
      const double gain = std::exp(beta);
      Eigen::Matrix<double, 8, 8> H = Eigen::Matrix<double, 8, 8>::Zero();
      Eigen::Matrix<double, 8, 1> g = Eigen::Matrix<double, 8, 1>::Zero();
      int rows = 0;
      for (const HostPoint& hp : host) {
        const Eigen::Vector2d pl = scale_pixel(hp.px, level);
        if (!bilinear_in_bounds(hgray, pl.x(), pl.y())) continue;
        const double ih = bilinear_raw(hgray, pl.x(), pl.y());
        const Eigen::Vector3d xc = T.apply(hp.ray / hp.rho);
        if (xc.z() <= 1e-8) continue;
        const double u = cam_l.fx * xc.x() / xc.z() + cam_l.cx;
        const double v = cam_l.fy * xc.y() / xc.z() + cam_l.cy;
        if (!in_interior(tgt, u, v)) continue;
        const double r = (bilinear_raw(tgt, u, v) - bias) - gain * (ih - host_bias);
        if (std::abs(r) > cut) continue;
        const double w = huber_weight(r, delta);
        const Eigen::Matrix<double, 1, 2> gi(bilinear_raw(tgx, u, v), bilinear_raw(tgy, u, v));
        const Eigen::Matrix<double, 1, 3> dxc = gi * projection_jacobian(xc, cam_l);
        Eigen::Matrix<double, 1, 8> J;
        J.segment<3>(0) = dxc;
        J.segment<3>(3) = -dxc * skew(xc);
        J(0, 6) = -gain * (ih - host_bias);
        J(0, 7) = -1.0;
        H += w * J.transpose() * J;
        g += w * J.transpose() * r;
        ++rows;
      }
      if (rows < 8) break;
      const Eigen::Matrix<double, 8, 1> step = H.ldlt().solve(-g);
      if (!step.allFinite()) break;

      bool accepted = false;
      double taken = 0.0;
      for (double lam = 1.0; lam >= 1.0 / 256.0; lam *= 0.5) {
        const Eigen::Matrix<double, 6, 1> xi = lam * step.head<6>();
        const Se3Pose Tc = compose(se3_exp(xi), T);
        const double betac = bound_beta(beta + lam * step(6));
        const double bc = bound_bias(bias + lam * step(7));
        const double ec = eval_level(level, Tc, betac, bc, cut, nullptr);
        if (ec < e) {
          T = Tc;
          beta = betac;
          bias = bc;
          e = ec;
          taken = lam;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      out.energy_trace.push_back(e);
      if ((taken * step).norm() < cfg_.gn_step_epsilon) break;
    }
  }

  int n_valid = 0, n_inlier = 0;
  out.mean_energy = eval_level(0, T, beta, bias, cfg_.outlier_residual, &n_valid, &n_inlier);
  out.valid_fraction = static_cast<double>(n_valid) / static_cast<double>(host.size());
  out.residual_rows = n_inlier;
  out.frame_from_ref = T;
  out.pose = compose(ref.pose, invert(T));
  out.affine_a =
      std::exp(beta) * ref.calib.exposure * ref.calib.affine_a / frame_calib.exposure;
  out.affine_b = bias;

  // Flow statistics at level 0, with and without the rotation component.
  double flow = 0.0, flow_nr = 0.0;
  int nf = 0, nfr = 0;
  for (const HostPoint& hp : host) {
    const Eigen::Vector3d xh = hp.ray / hp.rho;
    const Eigen::Vector3d xc = T.apply(xh);
    if (xc.z() > 1e-8) {
      const double u = camera_.fx * xc.x() / xc.z() + camera_.cx;
      const double v = camera_.fy * xc.y() / xc.z() + camera_.cy;
      if (u >= 0.0 && v >= 0.0 && u <= camera_.width - 1.0 && v <= camera_.height - 1.0) {
        flow += (Eigen::Vector2d(u, v) - hp.px).norm();
        ++nf;
      }
    }
    const Eigen::Vector3d xt = xh + T.translation;
    if (xt.z() > 1e-8) {
      const double u = camera_.fx * xt.x() / xt.z() + camera_.cx;
      const double v = camera_.fy * xt.y() / xt.z() + camera_.cy;
      if (u >= 0.0 && v >= 0.0 && u <= camera_.width - 1.0 && v <= camera_.height - 1.0) {
        flow_nr += (Eigen::Vector2d(u, v) - hp.px).norm();
        ++nfr;
      }
    }
  }
  out.mean_flow = nf > 0 ? flow / nf : 0.0;
  out.mean_flow_norot = nfr > 0 ? flow_nr / nfr : 0.0;

  const double floor = cfg_.lost_energy_floor;
  const double threshold =
      prev_track_energy_ >= 0.0 ? std::max(floor, cfg_.lost_energy_factor * prev_track_energy_)
                                : floor;
  if (out.valid_fraction < cfg_.lost_min_valid_fraction || !(out.mean_energy <= threshold))
    out.lost = true;
  return out;
}

bool Frontend::need_new_keyframe(const TrackResult& track) const {
  if (track.lost || window_.frames.empty()) return false;
  const Keyframe& ref = window_.frames.back();
  const double rel_gain = (track.affine_a * 1.0) / (ref.calib.affine_a * 1.0);
  const double score =
      cfg_.keyframe_flow_weight * 0.5 * (track.mean_flow + track.mean_flow_norot) +
      cfg_.keyframe_brightness_weight * std::abs(std::log(std::max(rel_gain, 1e-12)));
  return score > 1.0;
}

int Frontend::marginalize_keyframe() {
  const int k = static_cast<int>(window_.frames.size());
  if (k <= window_.max_size)
    throw WindowNotOverfull("window holds " + std::to_string(k) + " of " +
                            std::to_string(window_.max_size) + " keyframes");
  const Eigen::Vector3d& t_new = window_.frames.back().pose.translation;
  const double eps = cfg_.marginalize_epsilon;
  double best = -std::numeric_limits<double>::infinity();
  int best_idx = -1;
  for (int i = 0; i + 2 < k; ++i) {  // never the two newest
    const Eigen::Vector3d& ti = window_.frames[i].pose.translation;
    double sum = 0.0;
    for (int j = 0; j + 1 < k; ++j) {
      if (j == i) continue;
      sum += 1.0 / ((ti - window_.frames[j].pose.translation).norm() + eps);
    }
    const double score = std::sqrt((ti - t_new).norm()) * sum;
    if (score > best) {  // ties keep the first (oldest) candidate
      best = score;
      best_idx = i;
    }
  }
  const int id = window_.frames[best_idx].id;
  window_.frames.erase(window_.frames.begin() + best_idx);
  ++marginalization_count_;
  return id;
}

double Frontend::window_energy() const {
  const int k = static_cast<int>(window_.frames.size());
  double e = 0.0;
  std::vector<Se3Pose> inv_poses(k);
  for (int j = 0; j < k; ++j) inv_poses[j] = invert(window_.frames[j].pose);
  for (int h = 0; h < k; ++h) {
    const Keyframe& host = window_.frames[h];
    const Image& hgray = host.pyramid.gray[0];
    for (const TrackedPoint& pt : host.points) {
      if (!(pt.inv_depth > 0.0)) continue;
      const Eigen::Vector3d xw = host.pose.apply(pixel_ray(pt.pixel, camera_) / pt.inv_depth);
      const double ih = bilinear_raw(hgray, pt.pixel.x(), pt.pixel.y());
      for (int j = 0; j < k; ++j) {
        if (j == h) continue;
        const Keyframe& tgt = window_.frames[j];
        const Eigen::Vector3d xc = inv_poses[j].apply(xw);
        if (xc.z() <= 1e-8) continue;
        const double u = camera_.fx * xc.x() / xc.z() + camera_.cx;
        const double v = camera_.fy * xc.y() / xc.z() + camera_.cy;
        if (!in_interior(tgt.pyramid.gray[0], u, v)) continue;
        const double gain = (tgt.calib.exposure * tgt.calib.affine_a) /
                            (host.calib.exposure * host.calib.affine_a);
        const double r = (bilinear_raw(tgt.pyramid.gray[0], u, v) - tgt.calib.affine_b) -
                         gain * (ih - host.calib.affine_b);
        e += capped_huber(r, cfg_.huber_delta, cfg_.outlier_residual);
      }
    }
  }
  return e;
}

double Frontend::depth_refine_point(TrackedPoint& pt, const Keyframe& host, int max_iters) {
  if (!(pt.inv_depth > 0.0)) return 0.0;
  std::vector<DepthTarget> targets;
  for (const Keyframe& f : window_.frames) {
    if (f.id == host.id) continue;
    DepthTarget t;
    t.gray = &f.pyramid.gray[0];
    t.grad_x = &f.pyramid.grad_x[0];
    t.grad_y = &f.pyramid.grad_y[0];
    t.from_host = compose(invert(f.pose), host.pose);
    t.gain =
        (f.calib.exposure * f.calib.affine_a) / (host.calib.exposure * host.calib.affine_a);
    t.bias = f.calib.affine_b;
    targets.push_back(t);
  }
  if (targets.empty()) return 0.0;
  const double ih = bilinear_raw(host.pyramid.gray[0], pt.pixel.x(), pt.pixel.y());
  return refine_inverse_depth(pt, ih, host.calib.affine_b, camera_, targets, max_iters,
                              cfg_.huber_delta, cfg_.outlier_residual,
                              0.5 * cfg_.min_inv_depth, 2.0 * cfg_.max_inv_depth);
}

RefineStatus Frontend::refine_window() {
  const int k = static_cast<int>(window_.frames.size());
  if (k < 2) return RefineStatus::kConverged;

  std::vector<Se3Pose> poses0(k);
  std::vector<std::vector<TrackedPoint>> points0(k);
  for (int i = 0; i < k; ++i) {
    poses0[i] = window_.frames[i].pose;
    points0[i] = window_.frames[i].points;
  }

  const double e_start = window_energy();
  double e_prev = e_start;
  int rises = 0;

  for (int round = 0; round < cfg_.refine_rounds; ++round) {
    for (Keyframe& host : window_.frames)
      for (TrackedPoint& pt : host.points)
        depth_refine_point(pt, host, cfg_.refine_depth_iterations);

    // One damped Gauss-Newton step over all poses but the first (the gauge).
    const int n = 6 * (k - 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    std::vector<Se3Pose> inv_poses(k);
    for (int j = 0; j < k; ++j) inv_poses[j] = invert(window_.frames[j].pose);

    for (int h = 0; h < k; ++h) {
      const Keyframe& host = window_.frames[h];
      const Image& hgray = host.pyramid.gray[0];
      for (const TrackedPoint& pt : host.points) {
        if (pt.role != PixelRole::kTracked) continue;  // extras never steer poses
        if (!(pt.inv_depth > 0.0)) continue;
        const Eigen::Vector3d xh = pixel_ray(pt.pixel, camera_) / pt.inv_depth;
        const Eigen::Vector3d xw = host.pose.apply(xh);
        const double ih = bilinear_raw(hgray, pt.pixel.x(), pt.pixel.y());
        for (int j = 0; j < k; ++j) {
          if (j == h) continue;
          const Keyframe& tgt = window_.frames[j];
          const Eigen::Vector3d xc = inv_poses[j].apply(xw);
          if (xc.z() <= 1e-8) continue;
          const double u = camera_.fx * xc.x() / xc.z() + camera_.cx;
          const double v = camera_.fy * xc.y() / xc.z() + camera_.cy;
          if (!in_interior(tgt.pyramid.gray[0], u, v)) continue;
          const double gain = (tgt.calib.exposure * tgt.calib.affine_a) /
                              (host.calib.exposure * host.calib.affine_a);
          const double r = (bilinear_raw(tgt.pyramid.gray[0], u, v) - tgt.calib.affine_b) -
                           gain * (ih - host.calib.affine_b);
          if (std::abs(r) > cfg_.outlier_residual) continue;
          const double w = huber_weight(r, cfg_.huber_delta);
          const Eigen::Matrix<double, 1, 2> gi(bilinear_raw(tgt.pyramid.grad_x[0], u, v),
                                               bilinear_raw(tgt.pyramid.grad_y[0], u, v));
          const Eigen::Matrix<double, 1, 3> dxc = gi * projection_jacobian(xc, camera_);

          Eigen::Matrix<double, 1, 6> a_h = Eigen::Matrix<double, 1, 6>::Zero();
          Eigen::Matrix<double, 1, 6> a_j = Eigen::Matrix<double, 1, 6>::Zero();
          if (h > 0) {
            const Eigen::Matrix3d r_jh =
                (inv_poses[j].rotation * host.pose.rotation).toRotationMatrix();
            const Eigen::Matrix<double, 1, 3> d = dxc * r_jh;
            a_h.segment<3>(0) = d;
            a_h.segment<3>(3) = -d * skew(xh);
          }
          if (j > 0) {
            a_j.segment<3>(0) = -dxc;
            a_j.segment<3>(3) = dxc * skew(xc);
          }
          if (h > 0) {
            const int ih_ = 6 * (h - 1);
            H.block<6, 6>(ih_, ih_) += w * a_h.transpose() * a_h;
            g.segment<6>(ih_) += w * a_h.transpose() * r;
          }
          if (j > 0) {
            const int ij_ = 6 * (j - 1);
            H.block<6, 6>(ij_, ij_) += w * a_j.transpose() * a_j;
            g.segment<6>(ij_) += w * a_j.transpose() * r;
          }
          if (h > 0 && j > 0) {
            const int ih_ = 6 * (h - 1), ij_ = 6 * (j - 1);
            H.block<6, 6>(ih_, ij_) += w * a_h.transpose() * a_j;
            H.block<6, 6>(ij_, ih_) += w * a_j.transpose() * a_h;
          }
        }
      }
    }
    const double damp = 1e-10 * std::max(1.0, H.diagonal().maxCoeff());
    H.diagonal().array() += damp;
    const Eigen::VectorXd step = H.ldlt().solve(-g);
    if (step.allFinite()) {
      const double e_before = window_energy();
      std::vector<Se3Pose> saved(k);
      for (int i = 0; i < k; ++i) saved[i] = window_.frames[i].pose;
      bool accepted = false;
      for (double lam = 1.0; lam >= 1.0 / 256.0; lam *= 0.5) {
        for (int i = 1; i < k; ++i) {
          const Eigen::Matrix<double, 6, 1> xi = lam * step.segment<6>(6 * (i - 1));
          window_.frames[i].pose = compose(saved[i], se3_exp(xi));
        }
        if (window_energy() < e_before) {
          accepted = true;
          break;
        }
      }
      if (!accepted)
        for (int i = 0; i < k; ++i) window_.frames[i].pose = saved[i];
    }

    const double e_now = window_energy();
    if (e_now > e_prev)
      ++rises;
    else
      rises = 0;
    if (rises >= 2) {
      for (int i = 0; i < k; ++i) {
        window_.frames[i].pose = poses0[i];
        window_.frames[i].points = std::move(points0[i]);
      }
      return RefineStatus::kDiverged;
    }
    e_prev = e_now;
  }
  return e_prev < e_start - 1e-15 ? RefineStatus::kImproved : RefineStatus::kConverged;
}

KeyframePacket Frontend::emit_packet(const Keyframe& kf,
                                     const std::vector<InterpolatedPoint>& interpolated) const {
  KeyframePacket pk;
  pk.keyframe_id = kf.id;
  pk.timestamp = kf.timestamp;
  for (const Keyframe& f : window_.frames) pk.window_poses.emplace_back(f.id, f.pose);
  // Depths outside the prior band (with slack) would place map points at
  // absurd ranges and blow up the mapper's scene extent; drop them here.
  const double rho_lo = 0.5 * cfg_.min_inv_depth;
  const double rho_hi = 2.0 * cfg_.max_inv_depth;
  auto push = [&](const Eigen::Vector2d& px, double rho, const Eigen::Vector3d& color) {
    if (!(rho > rho_lo) || !(rho < rho_hi) || !std::isfinite(rho)) return;
    pk.cloud.push_back({kf.pose.apply(backproject(px, rho, camera_)), color});
  };
  for (const TrackedPoint& pt : kf.points) push(pt.pixel, pt.inv_depth, pt.color);
  for (const InterpolatedPoint& ip : interpolated) push(ip.pixel, ip.inv_depth, ip.color);
  pk.image = kf.rgb;
  return pk;
}

Keyframe Frontend::make_keyframe(const ImageRgb& rgb, double timestamp, const Se3Pose& pose,
                                 const PhotometricCalib& calib, const Image* true_depth) {
  Keyframe kf;
  kf.id = next_keyframe_id_++;
  kf.timestamp = timestamp;
  kf.pose = pose;
  kf.calib = calib;
  kf.rgb = std::make_shared<ImageRgb>(rgb);
  const Image gray = rgb_to_gray(rgb);
  kf.pyramid = build_frame_pyramid(gray, cfg_.pyramid_levels, cfg_.pyramid_min_dim);

  const GradientImage grad = compute_gradients(gray);
  const SelectedPixels base = select_pixels(grad, cfg_.selection);
  const SelectedPixels all = select_extra_points(grad, base, cfg_.selection);
  kf.points.reserve(all.pixels.size());
  for (const SelectedPixel& sel : all.pixels) {
    TrackedPoint pt;
    pt.pixel = sel.pixel.cast<double>();
    pt.role = sel.role;
    pt.color = rgb.at(sel.pixel.y(), sel.pixel.x());
    kf.points.push_back(pt);
  }
  init_point_depths(kf, true_depth);
  return kf;
}

void Frontend::init_point_depths(Keyframe& kf, const Image* true_depth) {
  if (cfg_.inject_true_depth && true_depth) {
    if (!true_depth->same_size(kf.pyramid.gray[0]))
      throw DimensionMismatch("depth image does not match the keyframe");
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<TrackedPoint> kept;
    kept.reserve(kf.points.size());
    for (TrackedPoint& pt : kf.points) {
      const double d = true_depth->at(static_cast<int>(pt.pixel.y()),
                                      static_cast<int>(pt.pixel.x()));
      if (!(d > 0.0) || !std::isfinite(d)) continue;
      double rho = 1.0 / d;
      if (cfg_.depth_injection_noise > 0.0)
        rho *= std::exp(cfg_.depth_injection_noise * n01(rng_));
      pt.inv_depth = std::clamp(rho, kRhoMin, kRhoMax);
      pt.inv_depth_variance =
          std::max(cfg_.depth_injection_noise * cfg_.depth_injection_noise * rho * rho, 1e-8);
      kept.push_back(pt);
    }
    kf.points = std::move(kept);
    return;
  }

  if (window_.frames.empty()) {
    // Nothing to match against yet: seed from the prior range and let the
    // early depth passes pull the values in.
    std::uniform_real_distribution<double> u(cfg_.min_inv_depth, cfg_.max_inv_depth);
    for (TrackedPoint& pt : kf.points) {
      pt.inv_depth = u(rng_);
      pt.inv_depth_variance = 1.0;
    }
    return;
  }

  // Discrete search along the ray against the newest keyframe, then a short
  // Gauss-Newton polish against the whole window.
  const Keyframe& ref = window_.frames.back();
  const Se3Pose t_rk = compose(invert(ref.pose), kf.pose);
  const double gain = (ref.calib.exposure * ref.calib.affine_a) /
                      (kf.calib.exposure * kf.calib.affine_a);
  const int n_samples = cfg_.epipolar_samples;
  for (TrackedPoint& pt : kf.points) {
    const Eigen::Vector3d ray = pixel_ray(pt.pixel, camera_);
    const double ih = bilinear_raw(kf.pyramid.gray[0], pt.pixel.x(), pt.pixel.y());
    double best_cost = std::numeric_limits<double>::infinity();
    double best_rho = 0.5 * (cfg_.min_inv_depth + cfg_.max_inv_depth);
    for (int s = 0; s < n_samples; ++s) {
      const double rho = cfg_.min_inv_depth + (cfg_.max_inv_depth - cfg_.min_inv_depth) *
                                                  static_cast<double>(s) / (n_samples - 1);
      const Eigen::Vector3d xc = t_rk.apply(ray / rho);
      if (xc.z() <= 1e-8) continue;
      const double u = camera_.fx * xc.x() / xc.z() + camera_.cx;
      const double v = camera_.fy * xc.y() / xc.z() + camera_.cy;
      if (!in_interior(ref.pyramid.gray[0], u, v)) continue;
      const double r = (bilinear_raw(ref.pyramid.gray[0], u, v) - ref.calib.affine_b) -
                       gain * (ih - kf.calib.affine_b);
      if (std::abs(r) < best_cost) {
        best_cost = std::abs(r);
        best_rho = rho;
      }
    }
    pt.inv_depth = best_rho;
    pt.inv_depth_variance = 1.0;
    if (std::isfinite(best_cost))
      depth_refine_point(pt, kf, cfg_.refine_depth_iterations);
  }
}

void Frontend::bootstrap_depth_pass(const FramePyramid& frame, const PhotometricCalib& calib,
                                    const Se3Pose& frame_from_ref) {
  Keyframe& kf = window_.frames.front();
  std::vector<DepthTarget> targets(1);
  targets[0].gray = &frame.gray[0];
  targets[0].grad_x = &frame.grad_x[0];
  targets[0].grad_y = &frame.grad_y[0];
  targets[0].from_host = frame_from_ref;
  targets[0].gain =
      (calib.exposure * calib.affine_a) / (kf.calib.exposure * kf.calib.affine_a);
  targets[0].bias = calib.affine_b;
  for (TrackedPoint& pt : kf.points) {
    const double ih = bilinear_raw(kf.pyramid.gray[0], pt.pixel.x(), pt.pixel.y());
    refine_inverse_depth(pt, ih, kf.calib.affine_b, camera_, targets,
                         cfg_.refine_depth_iterations, cfg_.huber_delta, cfg_.outlier_residual,
                         0.5 * cfg_.min_inv_depth, 2.0 * cfg_.max_inv_depth);
  }
}

std::vector<InterpolatedPoint> Frontend::densify_keyframe(const Keyframe& kf) const {
  std::vector<Eigen::Vector2d> vertices;
  std::vector<double> rhos;
  const double rho_lo = 0.5 * cfg_.min_inv_depth;
  const double rho_hi = 2.0 * cfg_.max_inv_depth;
  for (const TrackedPoint& pt : kf.points) {
    if (!(pt.inv_depth > rho_lo) || !(pt.inv_depth < rho_hi) || !std::isfinite(pt.inv_depth))
      continue;
    vertices.push_back(pt.pixel);
    rhos.push_back(pt.inv_depth);
  }
  if (vertices.size() < 3) return {};
  Triangulation2D tri;
  try {
    tri = triangulate(vertices);
  } catch (const DegenerateInput&) {
    return {};
  }
  const GradientImage grad = compute_gradients(kf.pyramid.gray[0]);
  const Mask mask = low_gradient_mask(grad, cfg_.densify.low_gradient_threshold);
  return interpolate_depth(tri, rhos, mask, *kf.rgb, cfg_.densify);
}

FrameResult Frontend::process_frame(const ImageRgb& rgb, double timestamp,
                                    const Image* true_depth) {
  FrameResult res;
  if (window_.frames.empty()) {
    Keyframe kf = make_keyframe(rgb, timestamp, Se3Pose::identity(), PhotometricCalib{},
                                true_depth);
    window_.frames.push_back(std::move(kf));
    max_window_seen_ = std::max(max_window_seen_, window_.frames.size());
    last_pose_ = Se3Pose::identity();
    last_delta_ = Se3Pose::identity();
    have_last_pose_ = true;
    const Keyframe& newest = window_.frames.back();
    res.packet = emit_packet(newest, densify_keyframe(newest));
    res.pose = newest.pose;
    res.tracked = true;
    res.keyframe_created = true;
    return res;
  }

  const Image gray = rgb_to_gray(rgb);
  const FramePyramid pyr = build_frame_pyramid(gray, cfg_.pyramid_levels, cfg_.pyramid_min_dim);
  const Keyframe& ref = window_.frames.back();
  const Se3Pose pred_world = have_last_pose_ ? compose(last_delta_, last_pose_) : ref.pose;
  const Se3Pose init = compose(invert(pred_world), ref.pose);
  const PhotometricCalib frame_calib{1.0, ref.calib.affine_a, ref.calib.affine_b};

  const TrackResult tr = track_frame(pyr, frame_calib, init);
  res.track = tr;
  res.pose = tr.pose;
  if (tr.lost) {
    res.tracked = false;
    last_delta_ = Se3Pose::identity();  // drop the motion prior after a miss
    return res;
  }
  res.tracked = true;
  if (have_last_pose_) last_delta_ = compose(tr.pose, invert(last_pose_));
  last_pose_ = tr.pose;
  have_last_pose_ = true;
  prev_track_energy_ = tr.mean_energy;

  if (window_.frames.size() == 1 && !cfg_.inject_true_depth) {
    const PhotometricCalib seen{1.0, tr.affine_a, tr.affine_b};
    bootstrap_depth_pass(pyr, seen, tr.frame_from_ref);
  }

  if (need_new_keyframe(tr)) {
    const PhotometricCalib kf_calib{1.0, tr.affine_a, tr.affine_b};
    Keyframe kf = make_keyframe(rgb, timestamp, tr.pose, kf_calib, true_depth);
    window_.frames.push_back(std::move(kf));
    if (static_cast<int>(window_.frames.size()) > window_.max_size)
      res.marginalized_id = marginalize_keyframe();
    refine_window();
    const Keyframe& newest = window_.frames.back();
    res.packet = emit_packet(newest, densify_keyframe(newest));
    res.keyframe_created = true;
  }
  max_window_seen_ = std::max(max_window_seen_, window_.frames.size());
  return res;
}

}  // namespace msplat
