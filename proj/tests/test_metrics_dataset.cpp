// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "msplat/dataset.hpp"
#include "msplat/metrics.hpp"
#include "msplat/png_io.hpp"
#include "msplat/synthetic.hpp"
#include "support.hpp"

using namespace msplat;
using testsupport::random_image;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "msplat_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(static_cast<bool>(out));
  out << text;
}

// Non-collinear space curve; similarity alignment needs shape to grip.
std::vector<TimedPose> helix_trajectory(int n) {
  std::vector<TimedPose> poses;
  for (int i = 0; i < n; ++i) {
    const double s = 0.4 * i;
    TimedPose p;
    p.timestamp = 0.1 * i;
    p.pose.translation = {std::cos(s), std::sin(s), 0.25 * s};
    p.pose.rotation =
        Eigen::Quaterniond(Eigen::AngleAxisd(0.1 * i, Eigen::Vector3d::UnitZ()));
    poses.push_back(p);
  }
  return poses;
}

std::vector<TimedPose> random_trajectory(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<TimedPose> poses;
  for (int i = 0; i < n; ++i) {
    TimedPose p;
    p.timestamp = 0.1 * i;
    p.pose.translation = {u(rng), u(rng), u(rng)};
    poses.push_back(p);
  }
  return poses;
}

}  // namespace

TEST_CASE("psnr is infinite for identical images and exact for uniform error") {
  std::mt19937_64 rng(521);
  const ImageRgb a = random_image(rng, 16, 16);
  CHECK(std::isinf(psnr(a, a)));

  const ImageRgb hi(16, 16, 0.2), lo(16, 16, 0.1);
  CHECK(psnr(hi, lo) == doctest::Approx(20.0).epsilon(1e-9));

  CHECK_THROWS_AS(psnr(ImageRgb(16, 16, 0.1), ImageRgb(16, 15, 0.1)), DimensionMismatch);
}

TEST_CASE("psnr agrees with the reference implementation") {
  std::mt19937_64 rng(523);
  const ImageRgb a = random_image(rng, 20, 24);
  const ImageRgb b = random_image(rng, 20, 24);
  CHECK(psnr(a, b) == doctest::Approx(testsupport::naive_psnr(a, b)).epsilon(1e-9));
}

TEST_CASE("png images survive a write-read cycle") {
  const auto dir = temp_dir("png_roundtrip");
  std::mt19937_64 rng(541);
  const ImageRgb rgb = random_image(rng, 24, 20);
  const auto rgb_path = (dir / "img.png").string();
  write_png_rgb(rgb_path, rgb);
  const ImageRgb back = read_png_rgb(rgb_path);
  REQUIRE(back.rows() == 24);
  REQUIRE(back.cols() == 20);
  CHECK(psnr(rgb, back) > 50.0);  // 8-bit quantization only

  Image gray(9, 13);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 13; ++c) gray.at(r, c) = (r * 13 + c) / 255.0;
  const auto gray_path = (dir / "gray.png").string();
  write_png_gray(gray_path, gray);
  const Image gback = read_png_gray(gray_path);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 13; ++c)
      CHECK(gback.at(r, c) == doctest::Approx(gray.at(r, c)).epsilon(1e-9));

  Image16 depth;
  depth.rows = 3;
  depth.cols = 4;
  depth.data = {0, 1, 77, 500, 12345, 30000, 65535, 2, 9, 400, 65000, 123};
  const auto d_path = (dir / "depth.png").string();
  write_png_gray16(d_path, depth);
  const Image16 dback = read_png_gray16(d_path);
  REQUIRE(dback.rows == 3);
  REQUIRE(dback.cols == 4);
  CHECK(dback.data == depth.data);
}

TEST_CASE("trajectories round-trip through the text format") {
  const auto dir = temp_dir("tum_traj");
  std::mt19937_64 rng(547);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<TimedPose> poses;
  for (int i = 0; i < 6; ++i) {
    TimedPose p;
    p.timestamp = 0.25 * i;
    p.pose.translation = {u(rng), u(rng), u(rng)};
    p.pose.rotation = Eigen::Quaterniond(u(rng), u(rng), u(rng), u(rng)).normalized();
    poses.push_back(p);
  }
  const auto path = (dir / "trajectory.txt").string();
  write_trajectory_tum(path, poses);
  const auto back = read_trajectory_tum(path);
  REQUIRE(back.size() == poses.size());
  for (size_t i = 0; i < poses.size(); ++i) {
    CHECK(std::abs(back[i].timestamp - poses[i].timestamp) <= 1e-9);
    CHECK((back[i].pose.translation - poses[i].pose.translation).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((back[i].pose.rotation.coeffs() - poses[i].pose.rotation.coeffs())
              .cwiseAbs()
              .maxCoeff() <= 1e-8);
  }
}

TEST_CASE("trajectory reader skips comments and flags broken lines") {
  const auto dir = temp_dir("tum_traj_err");
  const auto good = dir / "good.txt";
  write_text(good,
             "# header comment\n"
             "\n"
             "1.0 0.1 0.2 0.3 0 0 0 1\n"
             "  # indented comment\n"
             "2.0 0.4 0.5 0.6 0 0 0 1\n");
  const auto poses = read_trajectory_tum(good.string());
  REQUIRE(poses.size() == 2);
  CHECK(poses[1].pose.translation.x() == doctest::Approx(0.4).epsilon(1e-12));

  const auto bad = dir / "bad.txt";
  write_text(bad, "1.0 0.1 0.2 0.3 0 0 0 1\n2.0 0.4 0.5\n");
  CHECK_THROWS_AS(read_trajectory_tum(bad.string()), UnparseableLine);

  CHECK_THROWS_AS(read_trajectory_tum((dir / "missing.txt").string()), MissingIndexFile);
}

TEST_CASE("trajectory error is zero against itself and similarity-invariant") {
  const auto ref = helix_trajectory(12);

  const AteResult self = ate_rmse(ref, ref);
  CHECK(self.rmse <= 1e-9);
  CHECK(self.scale == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(self.pairs == 12);

  const double s = 2.0;
  const Eigen::Matrix3d rot =
      Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  const Eigen::Vector3d shift(0.3, -0.2, 0.5);
  std::vector<TimedPose> est = ref;
  for (TimedPose& p : est) p.pose.translation = s * rot * p.pose.translation + shift;

  const AteResult aligned = ate_rmse(est, ref);
  CHECK(aligned.rmse <= 1e-9);
  CHECK(aligned.scale == doctest::Approx(1.0 / s).epsilon(1e-6));
  CHECK(aligned.pairs == 12);
}

TEST_CASE("trajectory error matches the from-scratch alignment") {
  std::mt19937_64 rng(557);
  for (int trial = 0; trial < 5; ++trial) {
    const auto ref = random_trajectory(rng, 8);
    auto est = random_trajectory(rng, 8);
    for (size_t i = 0; i < est.size(); ++i) est[i].timestamp = ref[i].timestamp;
    const double got = ate_rmse(est, ref).rmse;
    const double want = testsupport::naive_ate(est, ref);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("trajectory pairing tolerates jitter and drops strays") {
  const auto ref = helix_trajectory(10);
  std::vector<TimedPose> est;
  for (int i = 0; i < 10; i += 2) {
    TimedPose p = ref[i];
    p.timestamp += 0.005;  // within the association window
    est.push_back(p);
  }
  TimedPose stray = ref[0];
  stray.timestamp = 99.0;
  est.push_back(stray);

  const AteResult r = ate_rmse(est, ref);
  CHECK(r.pairs == 5);
  CHECK(r.rmse <= 1e-9);

  CHECK_THROWS_AS(ate_rmse({ref[0], ref[1]}, ref), TooFewPoses);
  auto far = ref;
  for (TimedPose& p : far) p.timestamp += 100.0;
  CHECK_THROWS_AS(ate_rmse(far, ref), TooFewPoses);
}

TEST_CASE("nearest pose lookup respects the time window") {
  const auto poses = helix_trajectory(3);  // t = 0.0, 0.1, 0.2
  const auto mid = nearest_pose(poses, 0.14, 0.05);
  REQUIRE(mid.has_value());
  CHECK(mid->timestamp == doctest::Approx(0.1).epsilon(1e-12));
  const auto low = nearest_pose(poses, 0.09, 0.05);
  REQUIRE(low.has_value());
  CHECK(low->timestamp == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(!nearest_pose(poses, 0.31, 0.05).has_value());
  CHECK(!nearest_pose({}, 0.0, 1.0).has_value());
}

TEST_CASE("a materialized synthetic sequence loads back faithfully") {
  const auto dir = temp_dir("tum_seq");
  SyntheticSpec spec;
  spec.scene = ScenePreset::kBackdrop;
  spec.trajectory = TrajectoryKind::kStatic;
  spec.frames = 3;
  spec.width = 32;
  spec.height = 32;
  spec.focal = 40.0;
  write_synthetic_sequence(dir.string(), spec);

  const Sequence seq = load_tum_sequence(dir.string());
  REQUIRE(seq.size() == 3);
  REQUIRE(seq.camera.has_value());
  CHECK(seq.camera->fx == doctest::Approx(40.0).epsilon(1e-9));
  CHECK(seq.camera->cx == doctest::Approx(15.5).epsilon(1e-9));
  CHECK(seq.camera->width == 32);
  REQUIRE(seq.has_depth());
  REQUIRE(seq.groundtruth.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(seq.timestamps[i] - i / 30.0) <= 1e-5);
    CHECK(seq.groundtruth[i].pose.translation.norm() <= 1e-8);
  }

  const Sequence direct = make_synthetic_sequence(spec);
  const ImageRgb loaded = seq.fetch_rgb(0);
  REQUIRE(loaded.rows() == 32);
  CHECK(psnr(loaded, direct.fetch_rgb(0)) > 50.0);

  const Image depth = seq.fetch_depth(0);
  for (int r = 0; r < depth.rows(); ++r)
    for (int c = 0; c < depth.cols(); ++c) CHECK(depth.at(r, c) == 3.0);
}

TEST_CASE("index files reject disorder unless resorting is allowed") {
  const auto dir = temp_dir("tum_idx");
  std::filesystem::create_directories(dir / "rgb");
  write_text(dir / "rgb.txt",
             "# timestamp filename\n"
             "2.0 rgb/b.png\n"
             "1.0 rgb/a.png\n"
             "3.0 rgb/c.png\n");
  CHECK_THROWS_AS(load_tum_sequence(dir.string()), BadConfig);

  TumLoadOptions opt;
  opt.allow_resort = true;
  const Sequence seq = load_tum_sequence(dir.string(), opt);
  REQUIRE(seq.size() == 3);
  CHECK(seq.timestamps[0] == 1.0);
  CHECK(seq.timestamps[2] == 3.0);
  CHECK(!seq.camera.has_value());
  CHECK(!seq.has_depth());
  CHECK(seq.groundtruth.empty());
}

TEST_CASE("index loading fails loudly on malformed or missing files") {
  CHECK_THROWS_AS(load_tum_sequence((std::filesystem::temp_directory_path() /
                                     "msplat_tests" / "no_such_dir")
                                        .string()),
                  MissingIndexFile);

  const auto dir = temp_dir("tum_badidx");
  write_text(dir / "rgb.txt", "1.0 rgb/a.png\nnot_a_timestamp rgb/b.png\n");
  CHECK_THROWS_AS(load_tum_sequence(dir.string()), UnparseableLine);

  const auto empty = temp_dir("tum_emptyidx");
  write_text(empty / "rgb.txt", "# only comments here\n\n");
  CHECK_THROWS_AS(load_tum_sequence(empty.string()), MissingIndexFile);
}

TEST_CASE("static synthetic sequences repeat the same frame") {
  SyntheticSpec spec;
  spec.scene = ScenePreset::kBackdrop;
  spec.trajectory = TrajectoryKind::kStatic;
  spec.frames = 2;
  spec.width = 24;
  spec.height = 24;
  spec.focal = 30.0;
  const Sequence seq = make_synthetic_sequence(spec);
  CHECK(testsupport::images_identical(seq.fetch_rgb(0), seq.fetch_rgb(1)));
}

TEST_CASE("procedural textures stay inside the displayable range") {
  for (int id = 0; id < 4; ++id)
    for (double u = -2.0; u <= 2.0; u += 0.25)
      for (double v = -2.0; v <= 2.0; v += 0.25) {
        const Eigen::Vector3d c = procedural_texture(id, u, v);
        for (int k = 0; k < 3; ++k) {
          CHECK(c[k] >= 0.02);
          CHECK(c[k] <= 0.98);
        }
      }
}

TEST_CASE("every trajectory starts at the identity") {
  for (const TrajectoryKind kind : {TrajectoryKind::kStatic, TrajectoryKind::kLateral,
                                    TrajectoryKind::kOrbit, TrajectoryKind::kArc}) {
    const Se3Pose p = trajectory_pose(kind, 0.0);
    CHECK(rotation_angle(p.rotation, Eigen::Quaterniond::Identity()) <= 1e-12);
    CHECK(p.translation.norm() <= 1e-12);
  }
}

TEST_CASE("look-at aims the optical axis at the target") {
  const Eigen::Vector3d eye(1.0, -0.5, 0.3), target(0.0, 0.0, 2.5);
  const Se3Pose pose = look_at(eye, target);
  const Eigen::Vector3d z = pose.rotation * Eigen::Vector3d::UnitZ();
  CHECK((z - (target - eye).normalized()).norm() <= 1e-12);
  CHECK((pose.translation - eye).norm() == 0.0);
  // proper rotation
  CHECK(std::abs(pose.rotation.norm() - 1.0) <= 1e-12);
}
