// SPDX-License-Identifier: Apache-2.0
#include "msplat/config.hpp"

#include <fstream>
#include <json.hpp>

namespace msplat {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SelectionConfig, base_block, num_passes,
                                                threshold_0, threshold_decay, block_growth,
                                                extra_point_multiplier, adaptive_offset)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DensifyConfig, low_gradient_threshold, stride,
                                                average_metric_depth)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    FrontendConfig, selection, densify, pyramid_levels, pyramid_min_dim, huber_delta,
    outlier_residual, gn_iterations, gn_step_epsilon, affine_log_gain_limit, affine_bias_limit,
    lost_min_valid_fraction, lost_energy_factor, lost_energy_floor, keyframe_flow_weight,
    keyframe_brightness_weight, marginalize_epsilon, refine_rounds, refine_depth_iterations,
    min_inv_depth, max_inv_depth, epipolar_samples, inject_true_depth, depth_injection_noise)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LossConfig, lambda, ssim_window, ssim_sigma,
                                                ssim_c1, ssim_c2)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RenderConfig, tile_size, alpha_cap,
                                                termination_threshold, cov2d_floor, z_near,
                                                sigma_bound, record_blend)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AdaptiveControlConfig, interval, grad_threshold,
                                                scale_split_fraction, opacity_prune_threshold,
                                                split_children, split_scale_shrink)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PyramidScheduleConfig, levels, first_step,
                                                second_step, per_view_budget)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    OptimizerConfig, loss, render, adaptive, pyramid, lr_location, lr_location_final_ratio,
    lr_location_decay_span, lr_color, lr_opacity, lr_scale, lr_rotation, adam_beta1, adam_beta2,
    adam_eps, newest_view_weight)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MapInitConfig, knn, dedup_radius_factor,
                                                initial_opacity, min_scale, max_scale)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PipelineConfig, frontend, optimizer, map_init,
                                                queue_capacity, iterations_per_packet,
                                                final_iterations, paced, pace_hz, eval_every,
                                                max_frames, seed)

std::string config_to_json(const PipelineConfig& cfg) {
  const nlohmann::json j = cfg;
  return j.dump(2) + "\n";
}

PipelineConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw BadConfig(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return j.get<PipelineConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw BadConfig(std::string("config has a wrongly typed field: ") + e.what());
  }
}

PipelineConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return config_from_json(text);
}

void save_config_file(const std::string& path, const PipelineConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file " + path);
  out << config_to_json(cfg);
}

void apply_override(PipelineConfig& cfg, const std::string& spec) {
  const size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw BadConfig("override must look like path.to.key=value: " + spec);
  const std::string path = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);

  nlohmann::json j = cfg;
  nlohmann::json* node = &j;
  size_t start = 0;
  std::vector<std::string> keys;
  while (true) {
    const size_t dot = path.find('.', start);
    keys.push_back(path.substr(start, dot == std::string::npos ? dot : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->contains(keys[i])) throw BadConfig("unknown config group '" + keys[i] + "' in " + spec);
    node = &(*node)[keys[i]];
  }
  const std::string& leaf = keys.back();
  if (!node->contains(leaf)) throw BadConfig("unknown config key '" + leaf + "' in " + spec);

  nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;  // treat as a bare string
  if ((*node)[leaf].is_boolean() && !parsed.is_boolean())
    throw BadConfig("expected true/false for " + path);
  if ((*node)[leaf].is_number() && !parsed.is_number())
    throw BadConfig("expected a number for " + path);
  (*node)[leaf] = parsed;
  try {
    cfg = j.get<PipelineConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw BadConfig(std::string("override ") + spec + " broke the config: " + e.what());
  }
}

}  // namespace msplat
