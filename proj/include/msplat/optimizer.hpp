// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "msplat/gaussian_map.hpp"
#include "msplat/loss.hpp"
#include "msplat/rasterizer.hpp"

namespace msplat {

struct AdaptiveControlConfig {
  int interval = 1000;               // iterations between control passes
  double grad_threshold = 4e-4;      // mean homo-directional gradient trigger
  double scale_split_fraction = 0.01;  // of scene extent: split above, clone below
  double opacity_prune_threshold = 0.005;
  int split_children = 2;
  double split_scale_shrink = 1.6;
};

struct PyramidScheduleConfig {
  int levels = 3;
  // Selection-count fractions of per_view_budget at which a view graduates to
  // the next finer level. Coarsest first.
  double first_step = 0.3;
  double second_step = 0.6;
  int per_view_budget = 50;
};

struct OptimizerConfig {
  LossConfig loss;
  RenderConfig render;
  AdaptiveControlConfig adaptive;
  PyramidScheduleConfig pyramid;
  double lr_location = 1.6e-4;  // scaled by scene extent, decays exponentially
  double lr_location_final_ratio = 0.01;
  int lr_location_decay_span = 30000;
  double lr_color = 2.5e-3;
  double lr_opacity = 5e-2;
  double lr_scale = 5e-3;
  double lr_rotation = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int newest_view_weight = 2;  // sampling weight of the most recent view
};

struct ControlCounts {
  int cloned = 0;
  int split = 0;
  int pruned = 0;
};

// Split/clone high-gradient Gaussians, prune transparent ones, zero the
// accumulators. `remap` (old index or -1 for fresh children, one entry per
// surviving Gaussian) lets callers carry per-Gaussian state across.
ControlCounts adaptive_control(GaussianMap& map, const AdaptiveControlConfig& cfg,
                               double scene_extent, std::mt19937_64& rng,
                               std::vector<int>* remap = nullptr);

struct TrainingView {
  int keyframe_id = -1;
  Se3Pose pose;  // camera-to-world
  std::vector<ImageRgb> target_pyramid;
  int times_selected = 0;
};

struct IterationLog {
  int64_t iteration;
  double loss;
  int level;
  int view_id;
  size_t gaussian_count;
};

// Owns the training loop state around a GaussianMap: Adam moments, view set,
// iteration counter, scheduled pyramid level, densification cadence.
class MapOptimizer {
 public:
  MapOptimizer(GaussianMap* map, PinholeCamera camera, OptimizerConfig cfg, uint64_t seed);

  // Registers a packet: inits new Gaussians, refreshes stored window poses,
  // adds the keyframe image as a training view.
  void add_packet(const KeyframePacket& packet, const MapInitConfig& init_cfg);
  void add_view(TrainingView view);

  // One training iteration: sample a view, render at the scheduled pyramid
  // level, step every parameter group. Returns the loss. Throws EmptyMap.
  double optimize_iteration();

  // Runs the density-control pass now (normally driven by the interval).
  ControlCounts run_adaptive_control();

  int64_t iteration() const { return iteration_; }
  double scene_extent() const { return scene_extent_; }
  const std::vector<TrainingView>& views() const { return views_; }
  const std::vector<IterationLog>& logs() const { return logs_; }
  GaussianMap& map() { return *map_; }
  const OptimizerConfig& config() const { return cfg_; }

  // Pyramid level a view trains at, given how often it was selected.
  int scheduled_level(int times_selected) const;

 private:
  void ensure_state_size();
  void adam_step(const GaussianGradients& grads);
  double location_lr() const;

  GaussianMap* map_;
  PinholeCamera camera_;
  OptimizerConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<TrainingView> views_;
  int64_t iteration_ = 0;

  // Adam moments per Gaussian, packed: 3 location, 4 rotation, 3 log scale,
  // 1 opacity, 3 color = 14 doubles each for m and v.
  static constexpr int kStateStride = 14;
  std::vector<double> adam_m_, adam_v_;
  std::vector<int64_t> adam_t_;  // per-Gaussian step count for bias correction
  double scene_extent_ = 1.0;
  std::vector<IterationLog> logs_;
};

}  // namespace msplat
