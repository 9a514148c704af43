// SPDX-License-Identifier: Apache-2.0
#include "msplat/gaussian_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace msplat {

Eigen::Matrix3d covariance_3d(const Gaussian3D& g) {
  const Eigen::Matrix3d R = g.rotation.normalized().toRotationMatrix();
  const Eigen::Vector3d s2 = (2.0 * g.log_scale).array().exp();
  return R * s2.asDiagonal() * R.transpose();
}

double GaussianMap::scene_extent() const {
  if (gaussians.empty()) return 0.0;
  Eigen::Vector3d lo = gaussians[0].location, hi = lo;
  for (const auto& g : gaussians) {
    lo = lo.cwiseMin(g.location);
    hi = hi.cwiseMax(g.location);
  }
  return 0.5 * (hi - lo).norm();
}

namespace {

// Uniform-cell spatial hash over 3D points for near-neighbour queries.
class PointGrid {
 public:
  PointGrid(const std::vector<Eigen::Vector3d>& pts, double cell) : pts_(pts), cell_(cell) {
    for (size_t i = 0; i < pts.size(); ++i) cells_[key(pts[i])].push_back(static_cast<int>(i));
  }

  template <typename Fn>
  void for_each_near(const Eigen::Vector3d& p, double radius, Fn&& fn) const {
    const int r = static_cast<int>(std::ceil(radius / cell_)) + 1;
    const auto [kx, ky, kz] = coords(p);
    for (int dx = -r; dx <= r; ++dx)
      for (int dy = -r; dy <= r; ++dy)
        for (int dz = -r; dz <= r; ++dz) {
          auto it = cells_.find(pack(kx + dx, ky + dy, kz + dz));
          if (it == cells_.end()) continue;
          for (int idx : it->second) fn(idx);
        }
  }

 private:
  std::tuple<int64_t, int64_t, int64_t> coords(const Eigen::Vector3d& p) const {
    return {static_cast<int64_t>(std::floor(p.x() / cell_)),
            static_cast<int64_t>(std::floor(p.y() / cell_)),
            static_cast<int64_t>(std::floor(p.z() / cell_))};
  }
  static uint64_t pack(int64_t x, int64_t y, int64_t z) {
    auto h = [](int64_t v) { return static_cast<uint64_t>(v) * 0x9e3779b97f4a7c15ull; };
    return h(x) ^ (h(y) << 21 | h(y) >> 43) ^ (h(z) << 42 | h(z) >> 22);
  }
  uint64_t key(const Eigen::Vector3d& p) const {
    const auto [x, y, z] = coords(p);
    return pack(x, y, z);
  }
  const std::vector<Eigen::Vector3d>& pts_;
  double cell_;
  std::unordered_map<uint64_t, std::vector<int>> cells_;
};

// Mean distance to the k nearest other points, by brute force for small n.
double knn_mean_distance(const std::vector<Eigen::Vector3d>& pts, size_t self, int k) {
  std::vector<double> d2;
  d2.reserve(pts.size());
  for (size_t j = 0; j < pts.size(); ++j) {
    if (j == self) continue;
    d2.push_back((pts[j] - pts[self]).squaredNorm());
  }
  if (d2.empty()) return 0.0;
  const size_t kk = std::min<size_t>(k, d2.size());
  std::nth_element(d2.begin(), d2.begin() + (kk - 1), d2.end());
  double sum = 0.0;
  for (size_t i = 0; i < kk; ++i) sum += std::sqrt(d2[i]);
  return sum / kk;
}

}  // namespace

int init_from_packet(GaussianMap& map, const KeyframePacket& packet, const MapInitConfig& cfg) {
  const auto& cloud = packet.cloud;
  if (cloud.empty()) return 0;

  std::vector<Eigen::Vector3d> pts(cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) pts[i] = cloud[i].position;

  // local scale from packet-internal neighbours
  std::vector<double> local_scale(cloud.size());
  double mean_scale = 0.0;
  for (size_t i = 0; i < cloud.size(); ++i) {
    double s = knn_mean_distance(pts, i, cfg.knn);
    s = std::clamp(s, cfg.min_scale, cfg.max_scale);
    local_scale[i] = s;
    mean_scale += s;
  }
  mean_scale /= cloud.size();

  std::vector<Eigen::Vector3d> existing(map.size());
  for (size_t i = 0; i < map.size(); ++i) existing[i] = map.gaussians[i].location;
  const double cell = std::max(mean_scale, cfg.min_scale);
  PointGrid grid(existing, cell);

  int added = 0;
  for (size_t i = 0; i < cloud.size(); ++i) {
    const double r_dup = cfg.dedup_radius_factor * local_scale[i];
    bool duplicate = false;
    if (!existing.empty() && r_dup > 0.0) {
      const double r2 = r_dup * r_dup;
      grid.for_each_near(pts[i], r_dup, [&](int idx) {
        if (!duplicate && (existing[idx] - pts[i]).squaredNorm() < r2) duplicate = true;
      });
    }
    if (duplicate) continue;
    Gaussian3D g;
    g.location = pts[i];
    g.color = cloud[i].color;
    g.rotation = Eigen::Quaterniond::Identity();
    g.log_scale = Eigen::Vector3d::Constant(std::log(local_scale[i]));
    g.opacity_logit = logit(cfg.initial_opacity);
    map.push(g);
    ++added;
  }
  return added;
}

}  // namespace msplat
