// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "msplat/loss.hpp"
#include "msplat/optimizer.hpp"
#include "support.hpp"

using namespace msplat;
using testsupport::random_image;

namespace {

bool gray_identical(const Image& a, const Image& b) {
  if (!a.same_size(b)) return false;
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c)
      if (a.at(r, c) != b.at(r, c)) return false;
  return true;
}

// Renders the map from identity with one camera; used to build targets.
ImageRgb render_image(const GaussianMap& map, const Se3Pose& world_to_cam,
                      const PinholeCamera& cam) {
  RenderConfig cfg;
  cfg.record_blend = false;
  return render(map, world_to_cam, cam, cfg).image;
}

TrainingView single_level_view(int id, const Se3Pose& cam_to_world, ImageRgb target) {
  TrainingView v;
  v.keyframe_id = id;
  v.pose = cam_to_world;
  v.target_pyramid.push_back(std::move(target));
  return v;
}

}  // namespace

TEST_CASE("ssim of an image with itself is exactly one") {
  std::mt19937_64 rng(401);
  const ImageRgb a = random_image(rng, 24, 24);
  CHECK(ssim(a, a, LossConfig{}) == 1.0);
  CHECK(image_loss(a, a, LossConfig{}) == 0.0);
}

TEST_CASE("ssim is symmetric") {
  std::mt19937_64 rng(409);
  const ImageRgb a = random_image(rng, 20, 24);
  const ImageRgb b = random_image(rng, 20, 24);
  CHECK(ssim(a, b, LossConfig{}) == ssim(b, a, LossConfig{}));
}

TEST_CASE("ssim of constant images matches the closed form") {
  const ImageRgb a(16, 16, 0.3), b(16, 16, 0.5);
  const LossConfig cfg;
  const double expected = (2.0 * 0.3 * 0.5 + cfg.ssim_c1) / (0.3 * 0.3 + 0.5 * 0.5 + cfg.ssim_c1);
  CHECK(ssim(a, b, cfg) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("ssim agrees with the explicit windowed reference") {
  std::mt19937_64 rng(419);
  const LossConfig cfg;
  for (int trial = 0; trial < 3; ++trial) {
    const ImageRgb a = random_image(rng, 24, 26);
    const ImageRgb b = random_image(rng, 24, 26);
    CHECK(ssim(a, b, cfg) == doctest::Approx(testsupport::naive_ssim(a, b, cfg)).epsilon(1e-9));
  }
}

TEST_CASE("ssim rejects bad inputs") {
  CHECK_THROWS_AS(ssim(ImageRgb(8, 8, 0.5), ImageRgb(8, 8, 0.5), LossConfig{}), ImageTooSmall);
  CHECK_THROWS_AS(ssim(ImageRgb(24, 24, 0.5), ImageRgb(24, 23, 0.5), LossConfig{}),
                  DimensionMismatch);
  CHECK_THROWS_AS(image_loss(ImageRgb(24, 24, 0.5), ImageRgb(23, 24, 0.5), LossConfig{}),
                  DimensionMismatch);
}

TEST_CASE("with zero ssim weight the loss is the mean absolute error") {
  LossConfig cfg;
  cfg.lambda = 0.0;
  const ImageRgb a(16, 16, 0.4), b(16, 16, 0.3);
  CHECK(image_loss(a, b, cfg) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("image loss agrees with the reference combination") {
  std::mt19937_64 rng(421);
  const LossConfig cfg;
  const ImageRgb a = random_image(rng, 24, 24);
  const ImageRgb b = random_image(rng, 24, 24);
  CHECK(image_loss(a, b, cfg) ==
        doctest::Approx(testsupport::naive_image_loss(a, b, cfg)).epsilon(1e-9));
}

TEST_CASE("loss gradient matches central differences") {
  std::mt19937_64 rng(431);
  const LossConfig cfg;
  ImageRgb rendered = random_image(rng, 16, 16);
  const ImageRgb target = random_image(rng, 16, 16);
  const ImageRgb grad = image_loss_backward(rendered, target, cfg);

  std::uniform_int_distribution<int> upix(0, 15), uch(0, 2);
  const double eps = 1e-5;
  int probed = 0;
  while (probed < 12) {
    const int r = upix(rng), c = upix(rng), ch = uch(rng);
    // keep clear of the L1 kink
    if (std::abs(rendered.ch[ch].at(r, c) - target.ch[ch].at(r, c)) < 1e-3) continue;
    const double saved = rendered.ch[ch].at(r, c);
    rendered.ch[ch].at(r, c) = saved + eps;
    const double fp = image_loss(rendered, target, cfg);
    rendered.ch[ch].at(r, c) = saved - eps;
    const double fm = image_loss(rendered, target, cfg);
    rendered.ch[ch].at(r, c) = saved;
    const double fd = (fp - fm) / (2.0 * eps);
    CHECK(grad.ch[ch].at(r, c) == doctest::Approx(fd).epsilon(1e-6));
    ++probed;
  }
}

TEST_CASE("pyramid level zero is the input, deeper levels halve") {
  std::mt19937_64 rng(433);
  const ImageRgb rgb = random_image(rng, 64, 64);
  const auto one = build_pyramid(rgb.ch[0], 1, 11);
  REQUIRE(one.size() == 1);
  CHECK(gray_identical(one[0], rgb.ch[0]));

  const auto pyr = build_pyramid(rgb.ch[0], 3, 11);
  REQUIRE(pyr.size() == 3);
  CHECK(pyr[1].rows() == 32);
  CHECK(pyr[1].cols() == 32);
  CHECK(pyr[2].rows() == 16);
  CHECK(pyr[2].cols() == 16);

  CHECK_THROWS_AS(build_pyramid(rgb.ch[0], 4, 11), TooManyLevels);
  CHECK_THROWS_AS(build_pyramid(rgb.ch[0], 0, 11), BadConfig);
}

TEST_CASE("blurring and halving preserve constant images") {
  const Image half(32, 32, 0.5);
  CHECK(gray_identical(gaussian_blur5(half), half));
  const Image down = downsample_half(half);
  CHECK(down.rows() == 16);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) CHECK(down.at(r, c) == 0.5);

  const Image odd(32, 32, 0.3);
  const Image blurred = gaussian_blur5(odd);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) CHECK(blurred.at(r, c) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("a perfectly fitted view takes a vanishing step") {
  const PinholeCamera cam(35.0, 35.0, 15.5, 15.5, 32, 32);
  GaussianMap map;
  Se3Pose view;
  std::mt19937_64 rng(439);
  testsupport::random_gaussian_scene(rng, 3, cam, map, view);

  OptimizerConfig cfg;
  cfg.adaptive.interval = 0;
  MapOptimizer opt(&map, cam, cfg, 7);
  // Render the target through the exact pose arithmetic the optimizer uses so
  // the fitted residual is identically zero.
  const Se3Pose cam_to_world = invert(view);
  opt.add_view(single_level_view(0, cam_to_world, render_image(map, invert(cam_to_world), cam)));

  const std::vector<Gaussian3D> before = map.gaussians;
  const double loss = opt.optimize_iteration();
  CHECK(loss == 0.0);
  REQUIRE(opt.logs().size() == 1);
  CHECK(opt.logs()[0].level == 0);  // single-level pyramid caps the schedule
  CHECK(opt.logs()[0].loss == 0.0);

  for (size_t i = 0; i < before.size(); ++i) {
    const Gaussian3D &a = before[i], &b = map.gaussians[i];
    CHECK((a.location - b.location).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((a.rotation.coeffs() - b.rotation.coeffs()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((a.log_scale - b.log_scale).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(a.opacity_logit - b.opacity_logit) <= 1e-12);
    CHECK((a.color - b.color).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("a wrong color is recovered against a fixed target") {
  // Opacity sits deep in sigmoid saturation on both sides, so brightness
  // cannot be traded between opacity and color; the color itself must move.
  const PinholeCamera cam(50.0, 50.0, 23.5, 23.5, 48, 48);
  const Eigen::Vector3d true_color(0.8, 0.3, 0.5);

  Gaussian3D g;
  g.location = {0, 0, 2.0};
  g.log_scale = Eigen::Vector3d::Constant(std::log(0.08));
  g.opacity_logit = 6.0;
  g.color = true_color;
  GaussianMap truth;
  truth.push(g);
  ImageRgb target = render_image(truth, Se3Pose{}, cam);

  GaussianMap map;
  g.color = {0.5, 0.5, 0.5};
  map.push(g);

  OptimizerConfig cfg;
  cfg.adaptive.interval = 0;
  MapOptimizer opt(&map, cam, cfg, 11);
  opt.add_view(single_level_view(0, Se3Pose{}, std::move(target)));

  const double first = opt.optimize_iteration();
  double last = first;
  for (int i = 1; i < 200; ++i) last = opt.optimize_iteration();
  CHECK(last < first);
  CHECK((map.gaussians[0].color - true_color).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("multi-view training descends in hundred-iteration blocks") {
  const PinholeCamera cam(50.0, 50.0, 23.5, 23.5, 48, 48);
  std::mt19937_64 rng(443);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  GaussianMap truth;
  for (int i = 0; i < 5; ++i) {
    Gaussian3D g;
    g.location = {0.4 * u(rng), 0.4 * u(rng), 2.0 + 0.4 * u(rng)};
    g.log_scale = Eigen::Vector3d::Constant(std::log(0.10 + 0.04 * u(rng)));
    g.opacity_logit = 1.0;
    g.color = {0.5 + 0.4 * u(rng), 0.5 + 0.4 * u(rng), 0.5 + 0.4 * u(rng)};
    truth.push(g);
  }

  std::vector<Se3Pose> cam_to_world(4);
  for (int k = 0; k < 4; ++k) {
    cam_to_world[k].rotation =
        Eigen::Quaterniond(Eigen::AngleAxisd(testsupport::rad(2.0 * k - 3.0),
                                             Eigen::Vector3d::UnitY()));
    cam_to_world[k].translation = {0.03 * k, 0.0, 0.0};
  }

  GaussianMap map;
  for (const Gaussian3D& t : truth.gaussians) {
    Gaussian3D g = t;
    g.location += 0.02 * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    g.log_scale.array() += 0.15 * gauss(rng);
    g.opacity_logit += 0.3 * gauss(rng);
    for (int c = 0; c < 3; ++c)
      g.color[c] = std::clamp(g.color[c] + 0.15 * gauss(rng), 0.05, 0.95);
    map.push(g);
  }

  OptimizerConfig cfg;
  cfg.adaptive.interval = 0;
  MapOptimizer opt(&map, cam, cfg, 13);
  for (int k = 0; k < 4; ++k)
    opt.add_view(
        single_level_view(k, cam_to_world[k], render_image(truth, invert(cam_to_world[k]), cam)));

  for (int i = 0; i < 400; ++i) opt.optimize_iteration();
  REQUIRE(opt.logs().size() == 400);
  double mean[4] = {0, 0, 0, 0};
  for (int b = 0; b < 4; ++b) {
    for (int i = 0; i < 100; ++i) mean[b] += opt.logs()[b * 100 + i].loss;
    mean[b] /= 100.0;
  }
  CHECK(mean[0] > mean[1]);
  CHECK(mean[1] > mean[2]);
  CHECK(mean[2] > mean[3]);
}

TEST_CASE("density control leaves a calm map alone") {
  GaussianMap map;
  std::mt19937_64 scene_rng(449);
  for (int i = 0; i < 4; ++i) {
    Gaussian3D g;
    g.location = {static_cast<double>(i), 0.0, 2.0};
    g.log_scale = Eigen::Vector3d::Constant(std::log(0.01));
    g.opacity_logit = 0.0;
    g.color = {0.5, 0.5, 0.5};
    map.push(g);
  }
  const uint64_t rev = map.revision;
  const std::vector<Gaussian3D> before = map.gaussians;

  std::mt19937_64 rng(457);
  std::vector<int> remap;
  const ControlCounts counts = adaptive_control(map, AdaptiveControlConfig{}, 10.0, rng, &remap);
  CHECK(counts.cloned == 0);
  CHECK(counts.split == 0);
  CHECK(counts.pruned == 0);
  CHECK(map.size() == 4);
  CHECK(map.revision == rev + 1);
  REQUIRE(remap.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(remap[i] == i);
    CHECK((before[i].location - map.gaussians[i].location).norm() == 0.0);
  }
  for (size_t i = 0; i < map.size(); ++i) {
    CHECK(map.homo_grad_sum[i] == 0.0);
    CHECK(map.observation_count[i] == 0);
  }
}

TEST_CASE("transparent gaussians are pruned") {
  GaussianMap map;
  Gaussian3D faint;
  faint.opacity_logit = logit(0.004);
  Gaussian3D visible;
  visible.opacity_logit = logit(0.006);
  visible.location = {1, 0, 0};
  map.push(faint);
  map.push(visible);

  std::mt19937_64 rng(461);
  std::vector<int> remap;
  const ControlCounts counts = adaptive_control(map, AdaptiveControlConfig{}, 1.0, rng, &remap);
  CHECK(counts.pruned == 1);
  REQUIRE(map.size() == 1);
  CHECK(map.gaussians[0].location == Eigen::Vector3d(1, 0, 0));
  REQUIRE(remap.size() == 1);
  CHECK(remap[0] == 1);
}

TEST_CASE("large high-gradient gaussians split into shrunken children") {
  GaussianMap map;
  Gaussian3D big;
  big.location = {0, 0, 2};
  big.log_scale = Eigen::Vector3d::Constant(std::log(0.5));
  big.opacity_logit = 1.0;
  map.push(big);
  map.homo_grad_sum[0] = 1.0;  // mean gradient far above the trigger
  map.observation_count[0] = 1;

  const AdaptiveControlConfig cfg;
  std::mt19937_64 rng(463);
  std::vector<int> remap;
  const ControlCounts counts = adaptive_control(map, cfg, 10.0, rng, &remap);
  CHECK(counts.split == 1);
  CHECK(counts.cloned == 0);
  REQUIRE(map.size() == 2);
  const Eigen::Vector3d want_scale =
      big.log_scale.array() - std::log(cfg.split_scale_shrink);
  for (int c = 0; c < 2; ++c) {
    CHECK((map.gaussians[c].log_scale - want_scale).norm() == 0.0);
    CHECK(map.gaussians[c].log_scale.maxCoeff() < big.log_scale.maxCoeff());
    CHECK(remap[c] == -1);
    CHECK(map.gaussians[c].opacity_logit == big.opacity_logit);
  }
  // children scatter around the parent
  CHECK((map.gaussians[0].location - map.gaussians[1].location).norm() > 0.0);
}

TEST_CASE("small high-gradient gaussians clone in place") {
  GaussianMap map;
  Gaussian3D small;
  small.location = {0.5, -0.25, 2.0};
  small.log_scale = Eigen::Vector3d::Constant(std::log(0.005));
  small.opacity_logit = 0.5;
  small.color = {0.9, 0.1, 0.2};
  map.push(small);
  map.homo_grad_sum[0] = 0.01;
  map.observation_count[0] = 2;  // mean 0.005 > 4e-4

  std::mt19937_64 rng(467);
  std::vector<int> remap;
  const ControlCounts counts = adaptive_control(map, AdaptiveControlConfig{}, 10.0, rng, &remap);
  CHECK(counts.cloned == 1);
  CHECK(counts.split == 0);
  REQUIRE(map.size() == 2);
  CHECK((map.gaussians[0].location - map.gaussians[1].location).norm() == 0.0);
  CHECK((map.gaussians[0].color - map.gaussians[1].color).norm() == 0.0);
  CHECK(remap[0] == 0);
  CHECK(remap[1] == -1);
}

TEST_CASE("pyramid schedule graduates with selection count") {
  GaussianMap map;
  map.push(Gaussian3D{});
  MapOptimizer opt(&map, PinholeCamera(35.0, 35.0, 15.5, 15.5, 32, 32), OptimizerConfig{}, 3);
  CHECK(opt.scheduled_level(0) == 2);
  CHECK(opt.scheduled_level(14) == 2);
  CHECK(opt.scheduled_level(15) == 1);
  CHECK(opt.scheduled_level(29) == 1);
  CHECK(opt.scheduled_level(30) == 0);
  CHECK(opt.scheduled_level(100000) == 0);
}

TEST_CASE("optimizing without gaussians or views fails loudly") {
  GaussianMap empty;
  MapOptimizer opt(&empty, PinholeCamera(35.0, 35.0, 15.5, 15.5, 32, 32), OptimizerConfig{}, 3);
  CHECK_THROWS_AS(opt.optimize_iteration(), EmptyMap);

  GaussianMap map;
  map.push(Gaussian3D{});
  MapOptimizer no_views(&map, PinholeCamera(35.0, 35.0, 15.5, 15.5, 32, 32), OptimizerConfig{}, 3);
  CHECK_THROWS_AS(no_views.optimize_iteration(), EmptyMap);
}
