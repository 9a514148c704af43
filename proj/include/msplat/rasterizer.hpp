// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "msplat/gaussian_map.hpp"
#include "msplat/geometry.hpp"
#include "msplat/image.hpp"

namespace msplat {

struct RenderConfig {
  int tile_size = 16;
  double alpha_cap = 0.99;
  double termination_threshold = 1e-4;
  double cov2d_floor = 0.3;   // added to the projected covariance diagonal
  double z_near = 0.01;
  double sigma_bound = 3.0;   // footprint half-extent in marginal sigmas
  bool record_blend = true;   // keep per-pixel blend lists for the backward pass
};

struct SplatProjection {
  Eigen::Vector2d mean2d;
  Eigen::Matrix2d cov2d;  // includes the diagonal floor
  double depth = 0.0;
  Eigen::Vector3d color{0, 0, 0};
  double alpha_peak = 0.0;  // sigmoid(opacity_logit)
  int gaussian_index = -1;
};

// EWA projection of one Gaussian. `view` maps world into camera coordinates.
// Returns nullopt when the center is at depth <= z_near or lands outside the
// image bounds.
std::optional<SplatProjection> project_gaussian(const Gaussian3D& g, const Se3Pose& view,
                                                const PinholeCamera& cam, const RenderConfig& cfg);

struct RenderOutput {
  ImageRgb image;             // front-to-back alpha blend over black
  Image final_transmittance;  // per pixel, in [termination_threshold-ish, 1]
  // Projected splats sorted by (depth, gaussian_index); per-pixel blend lists
  // index into this vector, stored flat (offsets has rows*cols + 1 entries).
  std::vector<SplatProjection> splats;
  std::vector<Eigen::Matrix2d> conics;  // inverse cov2d, aligned with splats
  std::vector<uint32_t> contrib_offsets;
  std::vector<int32_t> contrib_splats;
  int width = 0, height = 0;
  uint64_t map_revision = 0;  // snapshot guard for the backward pass
};

// Tile-bucketed front-to-back rasterization. A pixel blends a splat when it
// lies inside the splat's axis-aligned sigma_bound box; a splat that would
// push transmittance below termination_threshold is skipped and the pixel
// terminates, matching the reference path.
RenderOutput render(const GaussianMap& map, const Se3Pose& view, const PinholeCamera& cam,
                    const RenderConfig& cfg);

struct GaussianGradients {
  std::vector<Eigen::Vector3d> d_location;
  std::vector<Eigen::Vector4d> d_rotation;  // (w, x, y, z), through normalization
  std::vector<Eigen::Vector3d> d_log_scale;
  std::vector<double> d_opacity_logit;
  std::vector<Eigen::Vector3d> d_color;
  // Per-Gaussian sums over pixels of the screen-space position gradient:
  // component-wise absolute values and the plain signed sum.
  std::vector<Eigen::Vector2d> mean2d_abs_grad;
  std::vector<Eigen::Vector2d> mean2d_signed_grad;
  std::vector<uint8_t> projected;  // 1 when the Gaussian survived projection

  void resize(size_t n);
};

// Analytic gradients of sum(dL_dimage * rendered_image) w.r.t. every Gaussian
// parameter. `out` must come from render() with record_blend enabled on the
// same map state; throws MismatchedSnapshot otherwise.
GaussianGradients render_backward(const RenderOutput& out, const ImageRgb& dL_dimage,
                                  const GaussianMap& map, const Se3Pose& view,
                                  const PinholeCamera& cam, const RenderConfig& cfg);

}  // namespace msplat
