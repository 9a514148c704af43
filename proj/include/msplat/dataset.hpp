// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "msplat/geometry.hpp"
#include "msplat/image.hpp"

namespace msplat {

// Lazily fetched image sequence. Fetchers are pure: calling twice with the
// same index returns the same image.
struct Sequence {
  std::vector<double> timestamps;
  std::function<ImageRgb(int)> fetch_rgb;
  std::function<Image(int)> fetch_depth;  // metric depth, 0 where unknown; may be empty
  std::optional<PinholeCamera> camera;
  std::vector<TimedPose> groundtruth;  // sorted by timestamp; may be empty

  int size() const { return static_cast<int>(timestamps.size()); }
  bool has_depth() const { return static_cast<bool>(fetch_depth); }
};

struct TumLoadOptions {
  bool allow_resort = false;      // accept out-of-order index files by sorting
  double depth_scale = 5000.0;    // 16-bit png counts per meter
  double association_max_dt = 0.02;
};

// Loads a TUM-layout directory: rgb.txt is required ("timestamp path" rows,
// '#' comment lines); depth.txt, groundtruth.txt ("t tx ty tz qx qy qz qw")
// and calibration.txt ("fx fy cx cy") are picked up when present. Throws
// MissingIndexFile, UnparseableLine (with the offending line number), or
// BadConfig for out-of-order timestamps when resorting is off.
Sequence load_tum_sequence(const std::string& dir, const TumLoadOptions& opt = {});

// Nearest pose by timestamp within max_dt, if any. `poses` must be sorted.
std::optional<TimedPose> nearest_pose(const std::vector<TimedPose>& poses, double t,
                                      double max_dt);

}  // namespace msplat
