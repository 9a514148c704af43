// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>

#include "msplat/errors.hpp"

namespace msplat {

// Rigid transform, applied as x' = rotation * x + translation.
struct Se3Pose {
  Eigen::Quaterniond rotation{1.0, 0.0, 0.0, 0.0};
  Eigen::Vector3d translation{0.0, 0.0, 0.0};

  static Se3Pose identity() { return {}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation.toRotationMatrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

// a after b: (a*b).apply(x) == a.apply(b.apply(x)).
inline Se3Pose compose(const Se3Pose& a, const Se3Pose& b) {
  Se3Pose out;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

inline Se3Pose invert(const Se3Pose& p) {
  Se3Pose out;
  out.rotation = p.rotation.conjugate().normalized();
  out.translation = -(out.rotation * p.translation);
  return out;
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

// Twist layout: [v; w] (translational part first).
inline Se3Pose se3_exp(const Eigen::Matrix<double, 6, 1>& twist) {
  const Eigen::Vector3d v = twist.head<3>();
  const Eigen::Vector3d w = twist.tail<3>();
  const double theta = w.norm();
  Se3Pose out;
  if (theta < 1e-12) {
    out.rotation = Eigen::Quaterniond(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z()).normalized();
    out.translation = v + 0.5 * w.cross(v);
    return out;
  }
  const Eigen::Vector3d axis = w / theta;
  out.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(theta, axis)).normalized();
  const Eigen::Matrix3d K = skew(w);
  const Eigen::Matrix3d V = Eigen::Matrix3d::Identity() +
                            ((1.0 - std::cos(theta)) / (theta * theta)) * K +
                            ((theta - std::sin(theta)) / (theta * theta * theta)) * (K * K);
  out.translation = V * v;
  return out;
}

inline Eigen::Matrix<double, 6, 1> se3_log(const Se3Pose& p) {
  Eigen::AngleAxisd aa(p.rotation);
  double theta = aa.angle();
  Eigen::Vector3d axis = aa.axis();
  if (theta > M_PI) {  // keep the short rotation
    theta = 2.0 * M_PI - theta;
    axis = -axis;
  }
  const Eigen::Vector3d w = theta * axis;
  Eigen::Matrix3d V_inv;
  if (theta < 1e-9) {
    V_inv = Eigen::Matrix3d::Identity() - 0.5 * skew(w);
  } else {
    const Eigen::Matrix3d K = skew(w);
    const double half = 0.5 * theta;
    V_inv = Eigen::Matrix3d::Identity() - 0.5 * K +
            ((1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta)) * (K * K);
  }
  Eigen::Matrix<double, 6, 1> twist;
  twist.head<3>() = V_inv * p.translation;
  twist.tail<3>() = w;
  return twist;
}

inline double rotation_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  double d = std::abs(a.normalized().dot(b.normalized()));
  if (d > 1.0) d = 1.0;
  return 2.0 * std::acos(d);
}

struct PinholeCamera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  PinholeCamera() = default;
  PinholeCamera(double fx_, double fy_, double cx_, double cy_, int w, int h)
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(w), height(h) {
    if (fx <= 0 || fy <= 0 || w <= 0 || h <= 0)
      throw BadConfig("camera needs positive focal lengths and dimensions");
  }

  // Intrinsics for pyramid level l (level 0 = this camera). The half-pixel
  // shift keeps pixel centers aligned across levels.
  PinholeCamera scaled(int level) const {
    const double s = std::pow(2.0, level);
    PinholeCamera c;
    c.fx = fx / s;
    c.fy = fy / s;
    c.cx = (cx + 0.5) / s - 0.5;
    c.cy = (cy + 0.5) / s - 0.5;
    c.width = width >> level;
    c.height = height >> level;
    return c;
  }
};

// Pixel coordinate at pyramid level l corresponding to a level-0 pixel.
inline Eigen::Vector2d scale_pixel(const Eigen::Vector2d& px, int level) {
  const double s = std::pow(2.0, level);
  return {(px.x() + 0.5) / s - 0.5, (px.y() + 0.5) / s - 0.5};
}

inline Eigen::Vector2d project(const Eigen::Vector3d& p, const PinholeCamera& cam) {
  if (p.z() <= 0.0) throw NonPositiveDepth("projecting point with depth " + std::to_string(p.z()));
  return {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
}

inline Eigen::Vector3d backproject(const Eigen::Vector2d& px, double inv_depth,
                                   const PinholeCamera& cam) {
  if (inv_depth <= 0.0)
    throw NonPositiveInverseDepth("backprojecting with inverse depth " +
                                  std::to_string(inv_depth));
  const double z = 1.0 / inv_depth;
  return {(px.x() - cam.cx) / cam.fx * z, (px.y() - cam.cy) / cam.fy * z, z};
}

// Unit-depth ray direction for a pixel (z component is 1).
inline Eigen::Vector3d pixel_ray(const Eigen::Vector2d& px, const PinholeCamera& cam) {
  return {(px.x() - cam.cx) / cam.fx, (px.y() - cam.cy) / cam.fy, 1.0};
}

// d(u,v)/d(x,y,z) of the pinhole projection at camera-space point p.
inline Eigen::Matrix<double, 2, 3> projection_jacobian(const Eigen::Vector3d& p,
                                                       const PinholeCamera& cam) {
  const double iz = 1.0 / p.z();
  const double iz2 = iz * iz;
  Eigen::Matrix<double, 2, 3> J;
  J << cam.fx * iz, 0.0, -cam.fx * p.x() * iz2, 0.0, cam.fy * iz, -cam.fy * p.y() * iz2;
  return J;
}

// Exposure and affine brightness parameters of one frame.
struct PhotometricCalib {
  double exposure = 1.0;
  double affine_a = 1.0;
  double affine_b = 0.0;

  void validate() const {
    if (exposure <= 0.0 || affine_a <= 0.0)
      throw BadConfig("exposure and affine gain must be positive");
  }
};

struct TimedPose {
  double timestamp = 0.0;
  Se3Pose pose;  // camera-to-world
};

}  // namespace msplat
