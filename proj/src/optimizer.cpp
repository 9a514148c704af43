// SPDX-License-Identifier: Apache-2.0
#include "msplat/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace msplat {

ControlCounts adaptive_control(GaussianMap& map, const AdaptiveControlConfig& cfg,
                               double scene_extent, std::mt19937_64& rng,
                               std::vector<int>* remap) {
  ControlCounts counts;
  const size_t n = map.size();
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Gaussian3D> next;
  std::vector<int> next_src;  // old index, -1 for fresh children
  next.reserve(n + n / 4);
  next_src.reserve(n + n / 4);

  for (size_t i = 0; i < n; ++i) {
    const Gaussian3D& g = map.gaussians[i];
    const int obs = map.observation_count[i];
    const double mean_grad = obs > 0 ? map.homo_grad_sum[i] / obs : 0.0;
    if (mean_grad > cfg.grad_threshold) {
      const double max_scale = std::exp(g.log_scale.maxCoeff());
      if (max_scale > cfg.scale_split_fraction * scene_extent) {
        ++counts.split;
        const Eigen::Matrix3d R = g.rotation.normalized().toRotationMatrix();
        const Eigen::Vector3d s = g.log_scale.array().exp();
        for (int c = 0; c < cfg.split_children; ++c) {
          Gaussian3D child = g;
          const Eigen::Vector3d z(gauss(rng), gauss(rng), gauss(rng));
          child.location = g.location + R * (s.cwiseProduct(z));
          child.log_scale = g.log_scale.array() - std::log(cfg.split_scale_shrink);
          next.push_back(child);
          next_src.push_back(-1);
        }
        continue;  // parent is consumed by the split
      }
      ++counts.cloned;
      next.push_back(g);
      next_src.push_back(static_cast<int>(i));
      next.push_back(g);  // in-place duplicate with fresh optimizer state
      next_src.push_back(-1);
      continue;
    }
    next.push_back(g);
    next_src.push_back(static_cast<int>(i));
  }

  std::vector<Gaussian3D> kept;
  std::vector<int> kept_src;
  kept.reserve(next.size());
  kept_src.reserve(next.size());
  for (size_t i = 0; i < next.size(); ++i) {
    if (sigmoid(next[i].opacity_logit) < cfg.opacity_prune_threshold) {
      ++counts.pruned;
      continue;
    }
    kept.push_back(next[i]);
    kept_src.push_back(next_src[i]);
  }

  map.gaussians = std::move(kept);
  map.homo_grad_sum.assign(map.size(), 0.0);
  map.observation_count.assign(map.size(), 0);
  ++map.revision;
  if (remap) *remap = std::move(kept_src);
  return counts;
}

MapOptimizer::MapOptimizer(GaussianMap* map, PinholeCamera camera, OptimizerConfig cfg,
                           uint64_t seed)
    : map_(map), camera_(camera), cfg_(cfg), rng_(seed) {
  ensure_state_size();
  if (!map_->empty()) scene_extent_ = std::max(map_->scene_extent(), 1e-6);
}

void MapOptimizer::ensure_state_size() {
  const size_t want = map_->size() * kStateStride;
  if (adam_m_.size() < want) {
    adam_m_.resize(want, 0.0);
    adam_v_.resize(want, 0.0);
  }
  if (adam_t_.size() < map_->size()) adam_t_.resize(map_->size(), 0);
}

void MapOptimizer::add_packet(const KeyframePacket& packet, const MapInitConfig& init_cfg) {
  init_from_packet(*map_, packet, init_cfg);
  ensure_state_size();
  scene_extent_ = std::max(map_->scene_extent(), 1e-6);
  for (const auto& [kf_id, pose] : packet.window_poses) {
    for (auto& v : views_)
      if (v.keyframe_id == kf_id) v.pose = pose;
  }
  if (packet.image) {
    TrainingView view;
    view.keyframe_id = packet.keyframe_id;
    for (const auto& [kf_id, pose] : packet.window_poses)
      if (kf_id == packet.keyframe_id) view.pose = pose;
    const int max_levels = cfg_.pyramid.levels;
    int levels = 1;
    int rows = packet.image->rows(), cols = packet.image->cols();
    while (levels < max_levels && rows / 2 >= cfg_.loss.ssim_window &&
           cols / 2 >= cfg_.loss.ssim_window) {
      ++levels;
      rows /= 2;
      cols /= 2;
    }
    view.target_pyramid = build_pyramid_rgb(*packet.image, levels, cfg_.loss.ssim_window);
    add_view(std::move(view));
  }
}

void MapOptimizer::add_view(TrainingView view) { views_.push_back(std::move(view)); }

int MapOptimizer::scheduled_level(int times_selected) const {
  const auto& p = cfg_.pyramid;
  int level = p.levels - 1;
  for (int k = 1; k < p.levels; ++k) {
    const double frac = p.first_step + (k - 1) * (p.second_step - p.first_step);
    if (times_selected >= frac * p.per_view_budget) --level;
  }
  return std::max(level, 0);
}

double MapOptimizer::location_lr() const {
  const double t = std::min<double>(static_cast<double>(iteration_),
                                    static_cast<double>(cfg_.lr_location_decay_span));
  const double decay =
      std::pow(cfg_.lr_location_final_ratio, t / cfg_.lr_location_decay_span);
  return cfg_.lr_location * scene_extent_ * decay;
}

double MapOptimizer::optimize_iteration() {
  if (map_->empty()) throw EmptyMap("cannot optimize an empty map");
  if (views_.empty()) throw EmptyMap("no training views registered");

  // newest view gets extra sampling weight
  const size_t n_views = views_.size();
  const uint64_t total = n_views - 1 + static_cast<uint64_t>(cfg_.newest_view_weight);
  const uint64_t draw = rng_() % total;
  const size_t view_idx = draw < n_views - 1 ? draw : n_views - 1;
  TrainingView& view = views_[view_idx];

  int level = scheduled_level(view.times_selected);
  level = std::min(level, static_cast<int>(view.target_pyramid.size()) - 1);
  ++view.times_selected;

  const PinholeCamera cam_l = camera_.scaled(level);
  const ImageRgb& target = view.target_pyramid[level];
  const Se3Pose world_to_cam = invert(view.pose);

  RenderConfig rcfg = cfg_.render;
  rcfg.record_blend = true;
  const RenderOutput out = render(*map_, world_to_cam, cam_l, rcfg);
  const double loss = image_loss(out.image, target, cfg_.loss);
  const ImageRgb dL = image_loss_backward(out.image, target, cfg_.loss);
  const GaussianGradients grads = render_backward(out, dL, *map_, world_to_cam, cam_l, rcfg);

  for (size_t i = 0; i < map_->size(); ++i) {
    if (!grads.projected[i]) continue;
    map_->homo_grad_sum[i] += grads.mean2d_abs_grad[i].norm();
    map_->observation_count[i] += 1;
  }

  adam_step(grads);
  ++iteration_;
  logs_.push_back({iteration_, loss, level, view.keyframe_id, map_->size()});

  if (cfg_.adaptive.interval > 0 && iteration_ % cfg_.adaptive.interval == 0)
    run_adaptive_control();
  return loss;
}

void MapOptimizer::adam_step(const GaussianGradients& grads) {
  const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2, eps = cfg_.adam_eps;
  const double lr_loc = location_lr();

  for (size_t i = 0; i < map_->size(); ++i) {
    Gaussian3D& g = map_->gaussians[i];
    double grad[kStateStride];
    grad[0] = grads.d_location[i].x();
    grad[1] = grads.d_location[i].y();
    grad[2] = grads.d_location[i].z();
    grad[3] = grads.d_rotation[i][0];
    grad[4] = grads.d_rotation[i][1];
    grad[5] = grads.d_rotation[i][2];
    grad[6] = grads.d_rotation[i][3];
    grad[7] = grads.d_log_scale[i].x();
    grad[8] = grads.d_log_scale[i].y();
    grad[9] = grads.d_log_scale[i].z();
    grad[10] = grads.d_opacity_logit[i];
    grad[11] = grads.d_color[i].x();
    grad[12] = grads.d_color[i].y();
    grad[13] = grads.d_color[i].z();

    const double lrs[kStateStride] = {lr_loc,          lr_loc,          lr_loc,
                                      cfg_.lr_rotation, cfg_.lr_rotation, cfg_.lr_rotation,
                                      cfg_.lr_rotation, cfg_.lr_scale,    cfg_.lr_scale,
                                      cfg_.lr_scale,    cfg_.lr_opacity,  cfg_.lr_color,
                                      cfg_.lr_color,    cfg_.lr_color};

    const int64_t t = ++adam_t_[i];
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
    double* m = &adam_m_[i * kStateStride];
    double* v = &adam_v_[i * kStateStride];
    double step[kStateStride];
    for (int k = 0; k < kStateStride; ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
      v[k] = b2 * v[k] + (1.0 - b2) * grad[k] * grad[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      step[k] = lrs[k] * mhat / (std::sqrt(vhat) + eps);
    }
    g.location -= Eigen::Vector3d(step[0], step[1], step[2]);
    Eigen::Vector4d q(g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z());
    q -= Eigen::Vector4d(step[3], step[4], step[5], step[6]);
    g.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized();
    g.log_scale -= Eigen::Vector3d(step[7], step[8], step[9]);
    g.opacity_logit -= step[10];
    g.color -= Eigen::Vector3d(step[11], step[12], step[13]);
  }
  ++map_->revision;
}

ControlCounts MapOptimizer::run_adaptive_control() {
  std::vector<int> remap;
  const ControlCounts counts = adaptive_control(*map_, cfg_.adaptive, scene_extent_, rng_, &remap);

  std::vector<double> new_m(map_->size() * kStateStride, 0.0);
  std::vector<double> new_v(map_->size() * kStateStride, 0.0);
  std::vector<int64_t> new_t(map_->size(), 0);
  for (size_t j = 0; j < remap.size(); ++j) {
    const int src = remap[j];
    if (src < 0) continue;
    std::copy_n(&adam_m_[static_cast<size_t>(src) * kStateStride], kStateStride,
                &new_m[j * kStateStride]);
    std::copy_n(&adam_v_[static_cast<size_t>(src) * kStateStride], kStateStride,
                &new_v[j * kStateStride]);
    new_t[j] = adam_t_[src];
  }
  adam_m_ = std::move(new_m);
  adam_v_ = std::move(new_v);
  adam_t_ = std::move(new_t);
  return counts;
}

}  // namespace msplat
