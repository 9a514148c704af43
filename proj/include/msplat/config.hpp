// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "msplat/frontend.hpp"
#include "msplat/gaussian_map.hpp"
#include "msplat/optimizer.hpp"

namespace msplat {

// Everything a full tracking + mapping run needs besides the data itself.
struct PipelineConfig {
  FrontendConfig frontend;
  OptimizerConfig optimizer;
  MapInitConfig map_init;
  int queue_capacity = 4;
  // Lockstep budget: the mapper spends exactly this many iterations per
  // packet, plus final_iterations once the sequence ends. Ignored when paced.
  int iterations_per_packet = 60;
  int final_iterations = 600;
  bool paced = false;      // free-run mapping at wall-clock rate
  double pace_hz = 30.0;   // tracker frame rate when paced
  int eval_every = 5;      // frame indices divisible by this get a PSNR sample
  int max_frames = -1;     // cap on processed frames; negative = whole sequence
  uint64_t seed = 1;
};

std::string config_to_json(const PipelineConfig& cfg);
// Unknown keys are ignored; missing keys keep their defaults.
PipelineConfig config_from_json(const std::string& text);
PipelineConfig load_config_file(const std::string& path);
void save_config_file(const std::string& path, const PipelineConfig& cfg);

// Applies "dotted.path=value" onto the config (e.g. "optimizer.lr_color=1e-3",
// "frontend.selection.base_block=8"). Throws BadConfig for unknown paths or
// unparseable values.
void apply_override(PipelineConfig& cfg, const std::string& spec);

}  // namespace msplat
