// SPDX-License-Identifier: Apache-2.0
#include "msplat/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

#include "msplat/errors.hpp"
#include "msplat/png_io.hpp"

namespace msplat {

namespace {

constexpr double kTau = 6.283185307179586;
constexpr double kMinHitDistance = 0.05;

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  double a = 0.0, b = 0.0;
  const TexturedQuad* quad = nullptr;
};

// Ray o + t*d against the parallelogram; d need not be normalized.
bool intersect_quad(const TexturedQuad& q, const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                    Hit* hit) {
  const Eigen::Vector3d n = q.edge_u.cross(q.edge_v);
  const double denom = d.dot(n);
  if (std::abs(denom) < 1e-12) return false;
  const double t = (q.origin - o).dot(n) / denom;
  if (t <= kMinHitDistance || t >= hit->t) return false;
  const Eigen::Vector3d p = o + t * d - q.origin;
  const double uu = q.edge_u.squaredNorm();
  const double vv = q.edge_v.squaredNorm();
  const double uv = q.edge_u.dot(q.edge_v);
  const double det = uu * vv - uv * uv;
  if (std::abs(det) < 1e-18) return false;
  const double pu = p.dot(q.edge_u);
  const double pv = p.dot(q.edge_v);
  const double a = (vv * pu - uv * pv) / det;
  const double b = (uu * pv - uv * pu) / det;
  if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0) return false;
  hit->t = t;
  hit->a = a;
  hit->b = b;
  hit->quad = &q;
  return true;
}

Eigen::Vector3d shade(const Hit& hit) {
  const TexturedQuad& q = *hit.quad;
  Eigen::Vector3d c = procedural_texture(q.texture, hit.a * q.uv_scale, hit.b * q.uv_scale);
  c = Eigen::Vector3d::Constant(0.5) + q.amplitude * (c - Eigen::Vector3d::Constant(0.5));
  return c.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace

Eigen::Vector3d procedural_texture(int id, double u, double v) {
  const int k = ((id % 4) + 4) % 4;
  double r, g, b;
  switch (k) {
    case 0: {
      const double a = std::sin(kTau * (1.00 * u) + 1.7 * std::sin(kTau * 0.55 * v));
      const double c = std::sin(kTau * (0.85 * v) + 1.3 * std::cos(kTau * 0.70 * u));
      const double d = std::sin(kTau * 0.45 * (u + v) + 0.9 * std::sin(kTau * 0.35 * (u - v)));
      r = 0.50 + 0.30 * a + 0.10 * c;
      g = 0.50 + 0.26 * c + 0.12 * d;
      b = 0.50 + 0.28 * d + 0.10 * a;
      break;
    }
    case 1: {
      const double a = std::sin(kTau * (0.9 * u + 0.4 * v) + 1.1 * std::cos(kTau * 0.5 * v));
      const double c = std::cos(kTau * (0.6 * v - 0.3 * u) + 0.8 * std::sin(kTau * 0.8 * u));
      r = 0.52 + 0.25 * a + 0.12 * c;
      g = 0.46 + 0.30 * c;
      b = 0.50 + 0.20 * a - 0.15 * c;
      break;
    }
    case 2: {
      const double a = std::sin(kTau * 1.2 * u) * std::cos(kTau * 0.9 * v);
      const double c = std::sin(kTau * (0.5 * u + 0.7 * v) + 1.5 * a);
      r = 0.48 + 0.33 * c;
      g = 0.52 + 0.25 * a + 0.10 * c;
      b = 0.50 + 0.28 * a;
      break;
    }
    default: {
      const double a = std::sin(kTau * (0.7 * u) + 2.0 * std::sin(kTau * 0.30 * v));
      const double c = std::sin(kTau * (1.1 * v) + 1.2 * std::sin(kTau * 0.45 * u));
      r = 0.50 + 0.24 * a + 0.14 * c;
      g = 0.50 + 0.28 * c - 0.10 * a;
      b = 0.54 + 0.30 * a * c;
      break;
    }
  }
  return {std::clamp(r, 0.02, 0.98), std::clamp(g, 0.02, 0.98), std::clamp(b, 0.02, 0.98)};
}

SyntheticScene make_scene(ScenePreset preset) {
  SyntheticScene scene;
  const TexturedQuad wall{{-6.0, -6.0, 3.0}, {12.0, 0.0, 0.0}, {0.0, 12.0, 0.0}, 0, 9.0, 1.0};
  switch (preset) {
    case ScenePreset::kBackdrop:
      scene.quads = {wall};
      break;
    case ScenePreset::kTiltedPlanes:
      scene.quads = {
          wall,
          {{-2.2, -1.8, 1.6}, {1.8, 0.0, 0.9}, {0.0, 3.6, 0.0}, 1, 4.0, 1.0},
          {{0.6, -1.8, 2.4}, {1.7, 0.0, -0.8}, {0.0, 3.6, 0.0}, 2, 4.0, 1.0},
          {{-0.9, -0.6, 2.0}, {1.6, 0.0, 0.2}, {0.0, 1.4, 0.1}, 3, 3.0, 1.0},
      };
      break;
    case ScenePreset::kFlatCenter:
      scene.quads = {
          wall,
          {{-1.2, -1.2, 2.2}, {2.4, 0.0, 0.0}, {0.0, 2.4, 0.0}, 1, 2.0, 0.06},
      };
      break;
  }
  return scene;
}

Se3Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  const Eigen::Vector3d z = (target - eye).normalized();
  Eigen::Vector3d x = Eigen::Vector3d(0.0, 1.0, 0.0).cross(z);
  if (x.norm() < 1e-9) x = Eigen::Vector3d(1.0, 0.0, 0.0);  // gaze along y
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  Se3Pose pose;
  pose.rotation = Eigen::Quaterniond(r).normalized();
  pose.translation = eye;
  return pose;
}

Se3Pose trajectory_pose(TrajectoryKind kind, double t01) {
  const Eigen::Vector3d center(0.0, 0.0, 2.5);
  switch (kind) {
    case TrajectoryKind::kStatic:
      return Se3Pose::identity();
    case TrajectoryKind::kLateral:
      return look_at({2.4 * t01, 0.0, 0.0}, center);
    case TrajectoryKind::kOrbit: {
      const double theta = (20.0 * M_PI / 180.0) * t01;
      const Eigen::Vector3d eye =
          center + 2.5 * Eigen::Vector3d(std::sin(theta), 0.0, -std::cos(theta));
      return look_at(eye, center);
    }
    case TrajectoryKind::kArc: {
      const Eigen::Vector3d eye(0.9 * std::sin(M_PI_2 * t01),
                                0.25 * (1.0 - std::cos(M_PI * t01)),
                                0.15 * std::sin(M_PI * t01));
      return look_at(eye, center);
    }
  }
  return Se3Pose::identity();
}

PinholeCamera synthetic_camera(const SyntheticSpec& spec) {
  return PinholeCamera(spec.focal, spec.focal, 0.5 * (spec.width - 1), 0.5 * (spec.height - 1),
                       spec.width, spec.height);
}

ImageRgb render_scene_rgb(const SyntheticScene& scene, const PinholeCamera& cam,
                          const Se3Pose& cam_to_world) {
  ImageRgb out(cam.height, cam.width);
  const Eigen::Matrix3d r = cam_to_world.rotation.toRotationMatrix();
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const Eigen::Vector3d d = r * pixel_ray({double(x), double(y)}, cam);
      Hit hit;
      for (const TexturedQuad& q : scene.quads) intersect_quad(q, cam_to_world.translation, d, &hit);
      out.set(y, x, hit.quad ? shade(hit) : scene.miss_color);
    }
  return out;
}

Image render_scene_depth(const SyntheticScene& scene, const PinholeCamera& cam,
                         const Se3Pose& cam_to_world) {
  Image out(cam.height, cam.width, 0.0);
  const Eigen::Matrix3d r = cam_to_world.rotation.toRotationMatrix();
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const Eigen::Vector3d d = r * pixel_ray({double(x), double(y)}, cam);
      Hit hit;
      for (const TexturedQuad& q : scene.quads) intersect_quad(q, cam_to_world.translation, d, &hit);
      // the ray direction has unit camera z, so the ray parameter is z depth
      if (hit.quad) out.at(y, x) = hit.t;
    }
  return out;
}

Sequence make_synthetic_sequence(const SyntheticSpec& spec) {
  if (spec.frames < 1) throw BadConfig("a sequence needs at least one frame");
  Sequence seq;
  const auto scene = std::make_shared<SyntheticScene>(make_scene(spec.scene));
  const PinholeCamera cam = synthetic_camera(spec);
  auto poses = std::make_shared<std::vector<Se3Pose>>();
  for (int i = 0; i < spec.frames; ++i) {
    const double t01 = spec.frames > 1 ? double(i) / (spec.frames - 1) : 0.0;
    poses->push_back(trajectory_pose(spec.trajectory, t01));
    const double ts = i / spec.fps;
    seq.timestamps.push_back(ts);
    seq.groundtruth.push_back({ts, poses->back()});
  }
  seq.camera = cam;
  seq.fetch_rgb = [scene, cam, poses](int i) {
    return render_scene_rgb(*scene, cam, poses->at(i));
  };
  seq.fetch_depth = [scene, cam, poses](int i) {
    return render_scene_depth(*scene, cam, poses->at(i));
  };
  return seq;
}

void write_synthetic_sequence(const std::string& dir, const SyntheticSpec& spec) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "rgb", ec);
  fs::create_directories(fs::path(dir) / "depth", ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());

  const Sequence seq = make_synthetic_sequence(spec);
  std::ofstream rgb_index((fs::path(dir) / "rgb.txt").string());
  std::ofstream depth_index((fs::path(dir) / "depth.txt").string());
  std::ofstream gt((fs::path(dir) / "groundtruth.txt").string());
  std::ofstream calib((fs::path(dir) / "calibration.txt").string());
  if (!rgb_index || !depth_index || !gt || !calib) throw IoError("cannot write into " + dir);
  rgb_index << "# timestamp filename\n";
  depth_index << "# timestamp filename\n";
  gt << "# timestamp tx ty tz qx qy qz qw\n";
  rgb_index.precision(6);
  depth_index.precision(6);
  gt.precision(9);
  rgb_index << std::fixed;
  depth_index << std::fixed;
  gt << std::fixed;

  const PinholeCamera cam = *seq.camera;
  calib << cam.fx << ' ' << cam.fy << ' ' << cam.cx << ' ' << cam.cy << '\n';

  char name[32];
  for (int i = 0; i < seq.size(); ++i) {
    std::snprintf(name, sizeof(name), "%06d.png", i);
    const std::string rgb_rel = std::string("rgb/") + name;
    const std::string depth_rel = std::string("depth/") + name;
    write_png_rgb((fs::path(dir) / rgb_rel).string(), seq.fetch_rgb(i));

    const Image depth = seq.fetch_depth(i);
    Image16 d16;
    d16.rows = depth.rows();
    d16.cols = depth.cols();
    d16.data.assign(static_cast<size_t>(d16.rows) * d16.cols, 0);
    for (int r = 0; r < depth.rows(); ++r)
      for (int c = 0; c < depth.cols(); ++c) {
        const double v = depth.at(r, c) * 5000.0;
        d16.at(r, c) = static_cast<uint16_t>(std::clamp(v, 0.0, 65535.0));
      }
    write_png_gray16((fs::path(dir) / depth_rel).string(), d16);

    rgb_index << seq.timestamps[i] << ' ' << rgb_rel << '\n';
    depth_index << seq.timestamps[i] << ' ' << depth_rel << '\n';
    const TimedPose& p = seq.groundtruth[i];
    const Eigen::Quaterniond& q = p.pose.rotation;
    gt << p.timestamp << ' ' << p.pose.translation.x() << ' ' << p.pose.translation.y() << ' '
       << p.pose.translation.z() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << q.w()
       << '\n';
  }
}

}  // namespace msplat
