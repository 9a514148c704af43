// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "msplat/dataset.hpp"
#include "msplat/geometry.hpp"
#include "msplat/image.hpp"

namespace msplat {

// One textured parallelogram: origin plus two spanning edges.
struct TexturedQuad {
  Eigen::Vector3d origin;
  Eigen::Vector3d edge_u;
  Eigen::Vector3d edge_v;
  int texture = 0;
  double uv_scale = 1.0;          // texture cycles across the quad
  double amplitude = 1.0;         // contrast around mid gray; small = near-flat
};

struct SyntheticScene {
  std::vector<TexturedQuad> quads;
  Eigen::Vector3d miss_color{0.0, 0.0, 0.0};
};

enum class ScenePreset {
  kBackdrop,      // a single textured wall
  kTiltedPlanes,  // wall plus slanted foreground planes at mixed depths
  kFlatCenter,    // wall plus a central low-contrast patch
};

enum class TrajectoryKind {
  kStatic,
  kLateral,  // 2.4 m sideways slide, gaze held on the scene center
  kOrbit,    // 20 degree arc around the scene center
  kArc,      // gentle S-curve with a little vertical motion
};

SyntheticScene make_scene(ScenePreset preset);

// Smooth periodic color field; every channel stays within [0.02, 0.98].
Eigen::Vector3d procedural_texture(int id, double u, double v);

// Camera-to-world pose with +z toward `target` (x right, y down conventions).
Se3Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target);

// Pose at normalized time t01 in [0, 1]; t01 = 0 is the identity.
Se3Pose trajectory_pose(TrajectoryKind kind, double t01);

struct SyntheticSpec {
  ScenePreset scene = ScenePreset::kTiltedPlanes;
  TrajectoryKind trajectory = TrajectoryKind::kLateral;
  int frames = 60;
  double fps = 30.0;
  int width = 128;
  int height = 128;
  double focal = 110.0;
};

PinholeCamera synthetic_camera(const SyntheticSpec& spec);

ImageRgb render_scene_rgb(const SyntheticScene& scene, const PinholeCamera& cam,
                          const Se3Pose& cam_to_world);

// Camera-frame z depth per pixel; 0 where no quad is hit.
Image render_scene_depth(const SyntheticScene& scene, const PinholeCamera& cam,
                         const Se3Pose& cam_to_world);

// In-memory sequence with camera, depth, and groundtruth attached.
Sequence make_synthetic_sequence(const SyntheticSpec& spec);

// Materializes the sequence in a TUM-layout directory (rgb/, depth/, rgb.txt,
// depth.txt, groundtruth.txt, calibration.txt).
void write_synthetic_sequence(const std::string& dir, const SyntheticSpec& spec);

}  // namespace msplat
