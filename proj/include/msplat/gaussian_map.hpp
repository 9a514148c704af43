// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <vector>

#include "msplat/errors.hpp"
#include "msplat/packet.hpp"

namespace msplat {

struct Gaussian3D {
  Eigen::Vector3d location{0, 0, 0};
  Eigen::Quaterniond rotation{1, 0, 0, 0};  // kept unit-norm
  Eigen::Vector3d log_scale{0, 0, 0};       // per-axis, scale = exp(log_scale)
  double opacity_logit = 0.0;               // opacity = sigmoid(logit)
  Eigen::Vector3d color{0, 0, 0};           // plain RGB, no harmonics
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// R diag(exp(s))^2 R^T; symmetric positive definite by construction.
Eigen::Matrix3d covariance_3d(const Gaussian3D& g);

struct GaussianMap {
  std::vector<Gaussian3D> gaussians;
  // Densification accumulators, one slot per Gaussian: the running sum of
  // per-view |dL/d mean2d| norms and how many renders observed it.
  std::vector<double> homo_grad_sum;
  std::vector<int> observation_count;
  // Bumped on every mutation; render snapshots are validated against it.
  uint64_t revision = 0;

  size_t size() const { return gaussians.size(); }
  bool empty() const { return gaussians.empty(); }

  void push(const Gaussian3D& g) {
    gaussians.push_back(g);
    homo_grad_sum.push_back(0.0);
    observation_count.push_back(0);
    ++revision;
  }
  void zero_accumulators() {
    std::fill(homo_grad_sum.begin(), homo_grad_sum.end(), 0.0);
    std::fill(observation_count.begin(), observation_count.end(), 0);
  }
  // Half the diagonal of the location bounding box (0 for empty maps).
  double scene_extent() const;
};

struct MapInitConfig {
  int knn = 3;                     // neighbours used for the initial scale
  double dedup_radius_factor = 0.5;  // skip points closer than factor * local scale to the map
  double initial_opacity = 0.5;
  double min_scale = 1e-4;
  double max_scale = 1.0;
};

// Adds one Gaussian per packet point that is not a duplicate of the existing
// map. Location and color come from the point; scale is isotropic at the mean
// distance to the packet's k nearest neighbours; rotation is identity.
// Existing Gaussians are never modified. Returns the number added.
int init_from_packet(GaussianMap& map, const KeyframePacket& packet, const MapInitConfig& cfg);

}  // namespace msplat
