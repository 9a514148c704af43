// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared oracles for the test suite. Everything here is deliberately the most
// direct implementation possible, independent of the library's internals, so
// agreement is evidence rather than tautology.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msplat/gaussian_map.hpp"
#include "msplat/geometry.hpp"
#include "msplat/image.hpp"
#include "msplat/loss.hpp"
#include "msplat/metrics.hpp"
#include "msplat/rasterizer.hpp"
#include "msplat/synthetic.hpp"

namespace testsupport {

using namespace msplat;

// ---------------------------------------------------------------------------
// Reference renderer: per pixel, walk ALL projected splats in depth order.
// No tiles, no binning. The per-splat arithmetic mirrors the production
// expressions token for token so the comparison isolates the tiling logic.
// ---------------------------------------------------------------------------

struct NaiveRender {
  ImageRgb image;
  Image transmittance;
};

inline NaiveRender naive_render(const GaussianMap& map, const Se3Pose& view,
                                const PinholeCamera& cam, const RenderConfig& cfg) {
  struct Entry {
    SplatProjection s;
    Eigen::Matrix2d conic;
    double rx, ry;
  };
  std::vector<Entry> entries;
  for (size_t i = 0; i < map.size(); ++i) {
    auto s = project_gaussian(map.gaussians[i], view, cam, cfg);
    if (!s) continue;
    s->gaussian_index = static_cast<int>(i);
    Entry e;
    e.s = *s;
    const Eigen::Matrix2d& c = s->cov2d;
    const double det = c(0, 0) * c(1, 1) - c(0, 1) * c(1, 0);
    const double id = 1.0 / det;
    e.conic(0, 0) = c(1, 1) * id;
    e.conic(1, 1) = c(0, 0) * id;
    e.conic(0, 1) = -c(0, 1) * id;
    e.conic(1, 0) = e.conic(0, 1);
    e.rx = cfg.sigma_bound * std::sqrt(c(0, 0));
    e.ry = cfg.sigma_bound * std::sqrt(c(1, 1));
    entries.push_back(e);
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.s.depth != b.s.depth) return a.s.depth < b.s.depth;
    return a.s.gaussian_index < b.s.gaussian_index;
  });

  NaiveRender out;
  out.image = ImageRgb(cam.height, cam.width, 0.0);
  out.transmittance = Image(cam.height, cam.width, 1.0);
  for (int py = 0; py < cam.height; ++py)
    for (int px = 0; px < cam.width; ++px) {
      double T = 1.0;
      double c0 = 0.0, c1 = 0.0, c2 = 0.0;
      for (const Entry& e : entries) {
        if (std::abs(px - e.s.mean2d.x()) > e.rx || std::abs(py - e.s.mean2d.y()) > e.ry)
          continue;
        const double dx = px - e.s.mean2d.x();
        const double dy = py - e.s.mean2d.y();
        const double power = -0.5 * (e.conic(0, 0) * dx * dx + e.conic(1, 1) * dy * dy) -
                             e.conic(0, 1) * dx * dy;
        const double g = std::exp(power);
        const double a = e.s.alpha_peak * g;
        const double alpha = a >= cfg.alpha_cap ? cfg.alpha_cap : a;
        const double test_T = T * (1.0 - alpha);
        if (test_T < cfg.termination_threshold) break;
        c0 += T * alpha * e.s.color.x();
        c1 += T * alpha * e.s.color.y();
        c2 += T * alpha * e.s.color.z();
        T = test_T;
      }
      out.image.ch[0].at(py, px) = c0;
      out.image.ch[1].at(py, px) = c1;
      out.image.ch[2].at(py, px) = c2;
      out.transmittance.at(py, px) = T;
    }
  return out;
}

// Random scene whose splats stay away from the alpha cap, the termination
// threshold, and the cull boundary, so finite differencing sees a smooth
// function. view is mildly rotated to keep the W path exercised.
inline void random_gaussian_scene(std::mt19937_64& rng, int n, const PinholeCamera& cam,
                                  GaussianMap& map, Se3Pose& view) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const Eigen::Vector3d axis =
      Eigen::Vector3d(u01(rng) - 0.5, u01(rng) - 0.5, u01(rng) - 0.5).normalized();
  view.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(0.05 * (u01(rng) - 0.5), axis));
  view.translation = 0.02 * Eigen::Vector3d(u01(rng) - 0.5, u01(rng) - 0.5, u01(rng) - 0.5);
  const Se3Pose cam_to_world = invert(view);

  for (int i = 0; i < n; ++i) {
    const double mx = 3.0 + (cam.width - 7.0) * u01(rng);
    const double my = 3.0 + (cam.height - 7.0) * u01(rng);
    const double z = 1.5 + 1.5 * u01(rng);
    const Eigen::Vector3d xc = backproject({mx, my}, 1.0 / z, cam);
    Gaussian3D g;
    g.location = cam_to_world.apply(xc);
    const Eigen::Vector3d qaxis =
        Eigen::Vector3d(u01(rng) - 0.5, u01(rng) - 0.5, u01(rng) - 0.5).normalized();
    g.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(2.0 * M_PI * u01(rng), qaxis));
    for (int k = 0; k < 3; ++k) g.log_scale[k] = std::log(0.03 + 0.09 * u01(rng));
    g.opacity_logit = -1.5 + 2.0 * u01(rng);
    g.color = Eigen::Vector3d(0.1 + 0.8 * u01(rng), 0.1 + 0.8 * u01(rng), 0.1 + 0.8 * u01(rng));
    map.push(g);
  }
}

// Rejection-samples random_gaussian_scene until finite differencing with a
// small step cannot cross any branch: splat depths are pairwise separated
// (no sort-order flips) and every pixel keeps a transmittance margin above
// the termination threshold (no early-exit flips). The opacity range already
// keeps alpha below the cap. Render with the same cfg the FD probe will use.
inline void fd_safe_scene(uint64_t seed, int n, const PinholeCamera& cam,
                          const RenderConfig& cfg, GaussianMap& map, Se3Pose& view) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    std::mt19937_64 rng(seed * 1000003ull + attempt);
    map = GaussianMap{};
    random_gaussian_scene(rng, n, cam, map, view);

    std::vector<double> depths;
    bool ok = true;
    for (const auto& g : map.gaussians) {
      const auto s = project_gaussian(g, view, cam, cfg);
      if (!s) {
        ok = false;
        break;
      }
      depths.push_back(s->depth);
    }
    if (!ok) continue;
    std::sort(depths.begin(), depths.end());
    for (size_t i = 0; i + 1 < depths.size(); ++i)
      if (depths[i + 1] - depths[i] < 1e-3) ok = false;
    if (!ok) continue;

    RenderConfig rc = cfg;
    rc.record_blend = false;
    const RenderOutput out = render(map, view, cam, rc);
    double min_t = 1.0;
    for (int r = 0; r < cam.height; ++r)
      for (int c = 0; c < cam.width; ++c) min_t = std::min(min_t, out.final_transmittance.at(r, c));
    if (min_t >= 20.0 * cfg.termination_threshold) return;
  }
  throw std::runtime_error("fd_safe_scene: no admissible scene found");
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check for the rasterizer backward pass.
// Scalar objective: sum over pixels of dL_dimage . image.
// ---------------------------------------------------------------------------

inline double render_objective(const GaussianMap& map, const Se3Pose& view,
                               const PinholeCamera& cam, const RenderConfig& cfg,
                               const ImageRgb& dL) {
  RenderConfig c = cfg;
  c.record_blend = false;
  const RenderOutput out = render(map, view, cam, c);
  double f = 0.0;
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < cam.height; ++r)
      for (int col = 0; col < cam.width; ++col)
        f += dL.ch[ch].at(r, col) * out.image.ch[ch].at(r, col);
  return f;
}

struct FdReport {
  double worst_rel = 0.0;  // max over params of |analytic-fd| / max(|fd|, abs_floor)
  int checked = 0;
};

// Central differences on every parameter of every Gaussian.
inline FdReport fd_check(GaussianMap& map, const Se3Pose& view, const PinholeCamera& cam,
                         const RenderConfig& cfg, const ImageRgb& dL, double eps,
                         double abs_floor) {
  RenderConfig rc = cfg;
  rc.record_blend = true;
  const RenderOutput out = render(map, view, cam, rc);
  const GaussianGradients grads = render_backward(out, dL, map, view, cam, rc);

  FdReport rep;
  auto probe = [&](double* param, double analytic) {
    const double saved = *param;
    *param = saved + eps;
    const double fp = render_objective(map, view, cam, cfg, dL);
    *param = saved - eps;
    const double fm = render_objective(map, view, cam, cfg, dL);
    *param = saved;
    const double fd = (fp - fm) / (2.0 * eps);
    const double rel = std::abs(analytic - fd) / std::max(std::abs(fd), abs_floor);
    rep.worst_rel = std::max(rep.worst_rel, rel);
    ++rep.checked;
  };

  for (size_t i = 0; i < map.size(); ++i) {
    Gaussian3D& g = map.gaussians[i];
    for (int k = 0; k < 3; ++k) probe(&g.location[k], grads.d_location[i][k]);
    probe(&g.rotation.w(), grads.d_rotation[i][0]);
    probe(&g.rotation.x(), grads.d_rotation[i][1]);
    probe(&g.rotation.y(), grads.d_rotation[i][2]);
    probe(&g.rotation.z(), grads.d_rotation[i][3]);
    for (int k = 0; k < 3; ++k) probe(&g.log_scale[k], grads.d_log_scale[i][k]);
    probe(&g.opacity_logit, grads.d_opacity_logit[i]);
    for (int k = 0; k < 3; ++k) probe(&g.color[k], grads.d_color[i][k]);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Direct sliding-window SSIM, explicit 2-D kernel, textbook variance sums.
// ---------------------------------------------------------------------------

inline double naive_ssim(const ImageRgb& a, const ImageRgb& b, const LossConfig& cfg) {
  const int n = cfg.ssim_window;
  std::vector<double> w(static_cast<size_t>(n) * n);
  const double c = 0.5 * (n - 1);
  double wsum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double d2 = (i - c) * (i - c) + (j - c) * (j - c);
      w[static_cast<size_t>(i) * n + j] = std::exp(-0.5 * d2 / (cfg.ssim_sigma * cfg.ssim_sigma));
      wsum += w[static_cast<size_t>(i) * n + j];
    }
  for (double& v : w) v /= wsum;

  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    const Image& x = a.ch[ch];
    const Image& y = b.ch[ch];
    double acc = 0.0;
    int count = 0;
    for (int r0 = 0; r0 + n <= x.rows(); ++r0)
      for (int c0 = 0; c0 + n <= x.cols(); ++c0) {
        double mx = 0.0, my = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            const double wi = w[static_cast<size_t>(i) * n + j];
            mx += wi * x.at(r0 + i, c0 + j);
            my += wi * y.at(r0 + i, c0 + j);
          }
        double vx = 0.0, vy = 0.0, cxy = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            const double wi = w[static_cast<size_t>(i) * n + j];
            const double dx = x.at(r0 + i, c0 + j) - mx;
            const double dy = y.at(r0 + i, c0 + j) - my;
            vx += wi * dx * dx;
            vy += wi * dy * dy;
            cxy += wi * dx * dy;
          }
        const double num = (2.0 * mx * my + cfg.ssim_c1) * (2.0 * cxy + cfg.ssim_c2);
        const double den = (mx * mx + my * my + cfg.ssim_c1) * (vx + vy + cfg.ssim_c2);
        acc += num / den;
        ++count;
      }
    total += acc / count;
  }
  return total / 3.0;
}

inline double naive_image_loss(const ImageRgb& rendered, const ImageRgb& target,
                               const LossConfig& cfg) {
  double l1 = 0.0;
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < rendered.rows(); ++r)
      for (int c = 0; c < rendered.cols(); ++c)
        l1 += std::abs(rendered.ch[ch].at(r, c) - target.ch[ch].at(r, c));
  l1 /= 3.0 * rendered.rows() * rendered.cols();
  return (1.0 - cfg.lambda) * l1 + cfg.lambda * 0.5 * (1.0 - naive_ssim(rendered, target, cfg));
}

inline double naive_psnr(const ImageRgb& a, const ImageRgb& b) {
  double mse = 0.0;
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < a.rows(); ++r)
      for (int c = 0; c < a.cols(); ++c) {
        const double d = a.ch[ch].at(r, c) - b.ch[ch].at(r, c);
        mse += d * d;
      }
  mse /= 3.0 * a.rows() * a.cols();
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

// ---------------------------------------------------------------------------
// Similarity (7-DoF) alignment from scratch: closed-form least squares via
// SVD of the cross-covariance, with the reflection-handling sign matrix.
// ---------------------------------------------------------------------------

struct Similarity {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

inline Similarity align_similarity(const std::vector<Eigen::Vector3d>& src,
                                   const std::vector<Eigen::Vector3d>& dst) {
  const size_t n = src.size();
  Eigen::Vector3d mu_s = Eigen::Vector3d::Zero(), mu_d = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < n; ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= static_cast<double>(n);
  mu_d /= static_cast<double>(n);
  Eigen::Matrix3d sigma = Eigen::Matrix3d::Zero();
  double var_s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sigma += (dst[i] - mu_d) * (src[i] - mu_s).transpose();
    var_s += (src[i] - mu_s).squaredNorm();
  }
  sigma /= static_cast<double>(n);
  var_s /= static_cast<double>(n);

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d S = Eigen::Matrix3d::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) S(2, 2) = -1.0;
  Similarity out;
  out.rotation = svd.matrixU() * S * svd.matrixV().transpose();
  out.scale = (svd.singularValues().asDiagonal() * S).trace() / var_s;
  out.translation = mu_d - out.scale * out.rotation * mu_s;
  return out;
}

// RMSE after similarity alignment; assumes matching timestamps index-wise.
inline double naive_ate(const std::vector<TimedPose>& est, const std::vector<TimedPose>& ref) {
  std::vector<Eigen::Vector3d> src, dst;
  for (size_t i = 0; i < est.size(); ++i) {
    src.push_back(est[i].pose.translation);
    dst.push_back(ref[i].pose.translation);
  }
  const Similarity sim = align_similarity(src, dst);
  double sq = 0.0;
  for (size_t i = 0; i < src.size(); ++i)
    sq += (sim.scale * sim.rotation * src[i] + sim.translation - dst[i]).squaredNorm();
  return std::sqrt(sq / src.size());
}

// ---------------------------------------------------------------------------
// Delaunay oracle: exhaustive empty-circumcircle enumeration with exact
// integer predicates. Inputs must be integer-valued points.
// ---------------------------------------------------------------------------

inline __int128 exact_orient(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                             const Eigen::Vector2d& c) {
  const __int128 ax = static_cast<int64_t>(a.x()), ay = static_cast<int64_t>(a.y());
  const __int128 bx = static_cast<int64_t>(b.x()), by = static_cast<int64_t>(b.y());
  const __int128 cx = static_cast<int64_t>(c.x()), cy = static_cast<int64_t>(c.y());
  return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

// >0 when d lies strictly inside the circumcircle of CCW (a,b,c).
inline __int128 exact_incircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                               const Eigen::Vector2d& c, const Eigen::Vector2d& d) {
  auto row = [&](const Eigen::Vector2d& p, __int128& x, __int128& y, __int128& w) {
    x = static_cast<int64_t>(p.x()) - static_cast<int64_t>(d.x());
    y = static_cast<int64_t>(p.y()) - static_cast<int64_t>(d.y());
    w = x * x + y * y;
  };
  __int128 ax, ay, aw, bx, by, bw, cx, cy, cw;
  row(a, ax, ay, aw);
  row(b, bx, by, bw);
  row(c, cx, cy, cw);
  return ax * (by * cw - bw * cy) - ay * (bx * cw - bw * cx) + aw * (bx * cy - by * cx);
}

// Every CCW triple whose circumcircle is empty of the remaining points.
inline std::vector<std::array<int, 3>> brute_force_delaunay(
    const std::vector<Eigen::Vector2d>& pts) {
  const int n = static_cast<int>(pts.size());
  std::vector<std::array<int, 3>> tris;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        int a = i, b = j, c = k;
        const __int128 o = exact_orient(pts[a], pts[b], pts[c]);
        if (o == 0) continue;
        if (o < 0) std::swap(b, c);
        bool empty = true;
        for (int m = 0; m < n && empty; ++m) {
          if (m == i || m == j || m == k) continue;
          if (exact_incircle(pts[a], pts[b], pts[c], pts[m]) > 0) empty = false;
        }
        if (empty) tris.push_back({a, b, c});
      }
  return tris;
}

// True when any four points are exactly cocircular or two coincide; such
// instances have a non-unique Delaunay triangulation and are resampled.
inline bool has_delaunay_ties(const std::vector<Eigen::Vector2d>& pts) {
  const int n = static_cast<int>(pts.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (pts[i] == pts[j]) return true;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k) {
        if (exact_orient(pts[i], pts[j], pts[k]) == 0) continue;
        int a = i, b = j, c = k;
        if (exact_orient(pts[a], pts[b], pts[c]) < 0) std::swap(b, c);
        for (int m = k + 1; m < n; ++m)
          if (exact_incircle(pts[a], pts[b], pts[c], pts[m]) == 0) return true;
      }
  return false;
}

inline std::vector<std::array<int, 3>> sorted_triangles(std::vector<std::array<int, 3>> tris) {
  for (auto& t : tris) std::sort(t.begin(), t.end());
  std::sort(tris.begin(), tris.end());
  return tris;
}

inline double convex_hull_area(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  size_t k = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = pts.size(); i-- > 1;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k);
  double area = 0.0;
  for (size_t i = 1; i + 1 < hull.size(); ++i)
    area += 0.5 * cross(hull[0], hull[i], hull[i + 1]);
  return area;
}

inline double triangle_area(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                            const Eigen::Vector2d& c) {
  return 0.5 * std::abs((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

// ---------------------------------------------------------------------------
// Misc
// ---------------------------------------------------------------------------

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline bool images_identical(const ImageRgb& a, const ImageRgb& b) {
  if (!a.same_size(b)) return false;
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < a.rows(); ++r)
      for (int c = 0; c < a.cols(); ++c)
        if (a.ch[ch].at(r, c) != b.ch[ch].at(r, c)) return false;
  return true;
}

inline ImageRgb random_image(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  ImageRgb img(rows, cols);
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) img.ch[ch].at(r, c) = u01(rng);
  return img;
}

inline double deg(double radians) { return radians * 180.0 / M_PI; }
inline double rad(double degrees) { return degrees * M_PI / 180.0; }

// Backdrop wall scene rendered at a trajectory point; the workhorse for
// tracking tests because every pixel sees exactly one surface.
struct PlaneRig {
  SyntheticScene scene;
  SyntheticSpec spec;
  PinholeCamera cam;
};

inline PlaneRig backdrop_rig(int res = 128, double focal = 110.0) {
  PlaneRig rig;
  rig.spec.scene = ScenePreset::kBackdrop;
  rig.spec.width = rig.spec.height = res;
  rig.spec.focal = focal;
  rig.scene = make_scene(rig.spec.scene);
  rig.cam = synthetic_camera(rig.spec);
  return rig;
}

}  // namespace testsupport
