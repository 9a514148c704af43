// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <memory>
#include <utility>
#include <vector>

#include "msplat/geometry.hpp"
#include "msplat/image.hpp"

namespace msplat {

// One world-space point handed from the tracker to the mapper.
struct PackedPoint {
  Eigen::Vector3d position;
  Eigen::Vector3d color;
};

// Emitted once per new keyframe: the keyframe's colored cloud, the refined
// poses of every keyframe still in the window, and the keyframe image the
// mapper trains against.
struct KeyframePacket {
  int keyframe_id = -1;
  double timestamp = 0.0;
  std::vector<std::pair<int, Se3Pose>> window_poses;  // (keyframe id, camera-to-world)
  std::vector<PackedPoint> cloud;
  std::shared_ptr<const ImageRgb> image;
};

}  // namespace msplat
