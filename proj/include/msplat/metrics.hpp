// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "msplat/geometry.hpp"
#include "msplat/image.hpp"

namespace msplat {

// Peak signal-to-noise ratio in dB over all three channels, peak 1.0.
// Identical images give +infinity. Throws DimensionMismatch on size mismatch.
double psnr(const ImageRgb& a, const ImageRgb& b);

struct AteResult {
  double rmse = 0.0;
  double scale = 1.0;  // applied to the estimate during alignment
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  int pairs = 0;
};

// Absolute trajectory error after a 7-DoF (similarity) alignment of the
// estimated positions onto the reference. Pairs are matched by nearest
// timestamp within max_dt; fewer than 3 matches throw TooFewPoses.
AteResult ate_rmse(const std::vector<TimedPose>& estimate,
                   const std::vector<TimedPose>& reference, double max_dt = 0.02);

// One pose per line: "t tx ty tz qx qy qz qw".
void write_trajectory_tum(const std::string& path, const std::vector<TimedPose>& poses);
std::vector<TimedPose> read_trajectory_tum(const std::string& path);

}  // namespace msplat
