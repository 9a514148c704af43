// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <random>
#include <vector>

#include "msplat/densify.hpp"
#include "msplat/geometry.hpp"
#include "msplat/image.hpp"
#include "msplat/packet.hpp"
#include "msplat/pixel_selection.hpp"

namespace msplat {

struct TrackedPoint {
  Eigen::Vector2d pixel;  // (x, y) in the host keyframe, level 0
  double inv_depth = 1.0;
  double inv_depth_variance = 1.0;
  Eigen::Vector3d color{0, 0, 0};
  PixelRole role = PixelRole::kTracked;
};

// Grayscale pyramid with per-level central-difference gradients.
struct FramePyramid {
  std::vector<Image> gray, grad_x, grad_y;
  int levels() const { return static_cast<int>(gray.size()); }
};

FramePyramid build_frame_pyramid(const Image& level0, int max_levels, int min_dim);

struct Keyframe {
  int id = -1;
  double timestamp = 0.0;
  FramePyramid pyramid;
  std::shared_ptr<const ImageRgb> rgb;
  Se3Pose pose;  // camera-to-world
  PhotometricCalib calib;
  std::vector<TrackedPoint> points;
};

struct KeyframeWindow {
  std::vector<Keyframe> frames;
  int max_size = 8;
  size_t size() const { return frames.size(); }
};

struct FrontendConfig {
  SelectionConfig selection;
  DensifyConfig densify;
  int pyramid_levels = 4;
  int pyramid_min_dim = 8;
  double huber_delta = 9.0 / 255.0;
  // Residuals beyond this magnitude are treated as occlusions: their energy is
  // capped and they contribute no gradient.
  double outlier_residual = 20.0 / 255.0;
  int gn_iterations = 10;
  double gn_step_epsilon = 1e-6;  // accepted-step norm that counts as converged
  double affine_log_gain_limit = 1.1;
  double affine_bias_limit = 0.5;
  double lost_min_valid_fraction = 0.3;
  double lost_energy_factor = 12.0;
  double lost_energy_floor = 7.5e-4;
  double keyframe_flow_weight = 1.0 / 8.0;
  double keyframe_brightness_weight = 4.0;
  double marginalize_epsilon = 1e-3;
  int refine_rounds = 2;
  int refine_depth_iterations = 3;
  double min_inv_depth = 0.125;
  double max_inv_depth = 4.0;
  int epipolar_samples = 64;
  bool inject_true_depth = false;
  double depth_injection_noise = 0.0;  // lognormal sigma on injected inverse depth
};

struct TrackResult {
  Se3Pose frame_from_ref;  // maps reference-keyframe coords into the frame
  Se3Pose pose;            // camera-to-world of the tracked frame
  double affine_a = 1.0;   // absolute affine gain of the frame
  double affine_b = 0.0;
  double mean_energy = 0.0;     // mean Huber energy over valid residuals
  double valid_fraction = 0.0;  // residuals in bounds / tracked points
  double mean_flow = 0.0;       // px, level 0
  double mean_flow_norot = 0.0;  // px, rotation removed
  std::vector<double> energy_trace;  // accepted energies, coarse to fine
  int residual_rows = 0;        // rows in the final pose system
  bool lost = false;
};

// Photometric residual of one host point observed in a target frame:
// (I_t[p_t] - b_t) - (e_t a_t)/(e_h a_h) * (I_h[p_h] - b_h), with e the
// exposure. Throws PointBehindCamera / ReprojectionOutOfBounds.
double photometric_residual(const TrackedPoint& pt, const Image& host_img,
                            const PhotometricCalib& host, const Image& target_img,
                            const PhotometricCalib& target, const Se3Pose& target_from_host,
                            const PinholeCamera& cam);

enum class RefineStatus { kConverged, kImproved, kDiverged };

struct FrameResult {
  Se3Pose pose;
  bool tracked = false;
  bool keyframe_created = false;
  int marginalized_id = -1;
  std::optional<KeyframePacket> packet;
  TrackResult track;
};

// Direct-photometric tracker over a sliding keyframe window.
class Frontend {
 public:
  Frontend(PinholeCamera camera, FrontendConfig cfg, uint64_t seed);

  // Full per-frame step: track, keyframe decision, marginalization,
  // refinement, packet emission. `true_depth` (metric, same size as rgb)
  // feeds depth injection when the config enables it.
  FrameResult process_frame(const ImageRgb& rgb, double timestamp,
                            const Image* true_depth = nullptr);

  // Coarse-to-fine Gauss-Newton against the newest keyframe. Marks (not
  // throws) `lost`; process_frame turns persistent loss into a skipped frame.
  TrackResult track_frame(const FramePyramid& frame, const PhotometricCalib& frame_calib,
                          const Se3Pose& init_frame_from_ref) const;

  bool need_new_keyframe(const TrackResult& track) const;

  // Removes and returns the id of the keyframe with the highest distance
  // score (never one of the two newest). Throws WindowNotOverfull when the
  // window is at or below capacity.
  int marginalize_keyframe();

  // Alternates per-point inverse-depth updates and window pose optimization.
  // The first keyframe's pose is the gauge and never moves. Reverts and
  // reports kDiverged when the energy rises two rounds in a row.
  RefineStatus refine_window();

  // Total window Huber energy (every point, every other frame it appears in).
  double window_energy() const;

  // Backprojects a keyframe's points (plus interpolated extras) to world
  // space and bundles current window poses with the keyframe image.
  KeyframePacket emit_packet(const Keyframe& kf,
                             const std::vector<InterpolatedPoint>& interpolated) const;

  // Builds a keyframe at a known pose: selection, depth init (injected or
  // searched), colors. Exposed for tests and synthetic harnesses.
  Keyframe make_keyframe(const ImageRgb& rgb, double timestamp, const Se3Pose& pose,
                         const PhotometricCalib& calib, const Image* true_depth);

  // Delaunay + low-gradient interpolation over a keyframe's selected pixels.
  std::vector<InterpolatedPoint> densify_keyframe(const Keyframe& kf) const;

  KeyframeWindow& window() { return window_; }
  const KeyframeWindow& window_const() const { return window_; }
  const PinholeCamera& camera() const { return camera_; }
  const FrontendConfig& config() const { return cfg_; }
  int keyframes_created() const { return next_keyframe_id_; }
  int marginalization_count() const { return marginalization_count_; }
  size_t max_window_seen() const { return max_window_seen_; }

 private:
  struct PointObs {  // cached per-point host data during optimization
    Eigen::Vector3d ray;
    double host_intensity;
    double inv_depth;
  };

  void init_point_depths(Keyframe& kf, const Image* true_depth);
  void bootstrap_depth_pass(const FramePyramid& frame, const PhotometricCalib& calib,
                            const Se3Pose& frame_from_ref);
  double depth_refine_point(TrackedPoint& pt, const Keyframe& host, int max_iters);

  PinholeCamera camera_;
  FrontendConfig cfg_;
  std::mt19937_64 rng_;
  KeyframeWindow window_;
  int next_keyframe_id_ = 0;
  int marginalization_count_ = 0;
  size_t max_window_seen_ = 0;
  double prev_track_energy_ = -1.0;  // < 0 means unknown
  Se3Pose last_pose_;                // last successfully tracked frame, world
  Se3Pose last_delta_;               // world-frame motion prior
  bool have_last_pose_ = false;
};

}  // namespace msplat
