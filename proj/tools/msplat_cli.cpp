// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "msplat/config.hpp"
#include "msplat/metrics.hpp"
#include "msplat/pipeline.hpp"
#include "msplat/ply_io.hpp"
#include "msplat/png_io.hpp"
#include "msplat/rasterizer.hpp"
#include "msplat/synthetic.hpp"

namespace {

using namespace msplat;

ScenePreset parse_scene(const std::string& s) {
  if (s == "backdrop") return ScenePreset::kBackdrop;
  if (s == "tilted") return ScenePreset::kTiltedPlanes;
  if (s == "flat") return ScenePreset::kFlatCenter;
  throw BadConfig("unknown scene '" + s + "' (backdrop, tilted, flat)");
}

TrajectoryKind parse_trajectory(const std::string& s) {
  if (s == "static") return TrajectoryKind::kStatic;
  if (s == "lateral") return TrajectoryKind::kLateral;
  if (s == "orbit") return TrajectoryKind::kOrbit;
  if (s == "arc") return TrajectoryKind::kArc;
  throw BadConfig("unknown trajectory '" + s + "' (static, lateral, orbit, arc)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monocular photometric odometry feeding a Gaussian-splat mapper"};
  app.require_subcommand(1);

  // ---- run ----
  auto* run_cmd = app.add_subcommand("run", "Track a sequence and build a splat map");
  std::string run_data, run_out, run_config;
  bool run_synth = false, run_paced = false, run_inject = false, run_resort = false;
  std::string run_scene = "tilted", run_traj = "lateral";
  int run_frames = 60, run_width = 128, run_height = 128, run_max_frames = -1;
  double run_fps = 30.0, run_focal = 110.0;
  uint64_t run_seed = 0;
  std::vector<std::string> run_sets;
  run_cmd->add_option("--data", run_data, "TUM-layout dataset directory");
  run_cmd->add_flag("--synthetic", run_synth, "use a generated scene instead of --data");
  run_cmd->add_option("--out", run_out, "output directory")->required();
  run_cmd->add_option("--seed", run_seed, "run seed")->required();
  run_cmd->add_option("--config", run_config, "JSON config file");
  run_cmd->add_option("--set", run_sets, "config override path.to.key=value (repeatable)");
  run_cmd->add_flag("--paced", run_paced, "free-run mapping at the camera rate");
  run_cmd->add_flag("--inject-depth", run_inject, "seed point depths from dataset depth maps");
  run_cmd->add_flag("--resort", run_resort, "accept out-of-order index files");
  run_cmd->add_option("--max-frames", run_max_frames, "stop after this many frames");
  run_cmd->add_option("--scene", run_scene, "synthetic scene (backdrop, tilted, flat)");
  run_cmd->add_option("--trajectory", run_traj, "synthetic path (static, lateral, orbit, arc)");
  run_cmd->add_option("--frames", run_frames, "synthetic frame count");
  run_cmd->add_option("--fps", run_fps, "synthetic frame rate");
  run_cmd->add_option("--width", run_width, "synthetic image width");
  run_cmd->add_option("--height", run_height, "synthetic image height");
  run_cmd->add_option("--focal", run_focal, "synthetic focal length in pixels");

  // ---- synth ----
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset to disk");
  std::string synth_out, synth_scene = "tilted", synth_traj = "lateral";
  int synth_frames = 60, synth_width = 128, synth_height = 128;
  double synth_fps = 30.0, synth_focal = 110.0;
  synth_cmd->add_option("--out", synth_out, "dataset directory")->required();
  synth_cmd->add_option("--scene", synth_scene, "backdrop, tilted, flat");
  synth_cmd->add_option("--trajectory", synth_traj, "static, lateral, orbit, arc");
  synth_cmd->add_option("--frames", synth_frames, "frame count");
  synth_cmd->add_option("--fps", synth_fps, "frame rate");
  synth_cmd->add_option("--width", synth_width, "image width");
  synth_cmd->add_option("--height", synth_height, "image height");
  synth_cmd->add_option("--focal", synth_focal, "focal length in pixels");

  // ---- render ----
  auto* render_cmd = app.add_subcommand("render", "Render a splat file to a PNG");
  std::string render_ply, render_out;
  int render_width = 128, render_height = 128;
  double render_focal = 110.0;
  std::vector<double> render_pose;
  render_cmd->add_option("--ply", render_ply, "splat file")->required();
  render_cmd->add_option("--out", render_out, "output PNG")->required();
  render_cmd->add_option("--width", render_width, "image width");
  render_cmd->add_option("--height", render_height, "image height");
  render_cmd->add_option("--focal", render_focal, "focal length in pixels");
  render_cmd->add_option("--pose", render_pose,
                         "camera-to-world tx ty tz qx qy qz qw (default identity)")
      ->expected(7);

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "Trajectory ATE and image PSNR");
  std::string eval_est, eval_ref, eval_rendered, eval_target;
  double eval_max_dt = 0.02;
  eval_cmd->add_option("--estimate", eval_est, "estimated trajectory (TUM format)");
  eval_cmd->add_option("--reference", eval_ref, "reference trajectory (TUM format)");
  eval_cmd->add_option("--max-dt", eval_max_dt, "timestamp association window");
  eval_cmd->add_option("--rendered", eval_rendered, "rendered PNG");
  eval_cmd->add_option("--target", eval_target, "target PNG");

  // ---- export-ply ----
  auto* export_cmd = app.add_subcommand("export-ply", "Validate and re-encode a splat file");
  std::string export_in, export_out;
  export_cmd->add_option("--in", export_in, "input splat file")->required();
  export_cmd->add_option("--out", export_out, "output splat file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      if (run_synth == !run_data.empty())
        throw BadConfig("pass exactly one of --data or --synthetic");
      PipelineConfig cfg;
      if (!run_config.empty()) cfg = load_config_file(run_config);
      for (const std::string& s : run_sets) apply_override(cfg, s);
      cfg.seed = run_seed;
      if (run_paced) cfg.paced = true;
      if (run_inject) cfg.frontend.inject_true_depth = true;
      if (run_max_frames >= 0) cfg.max_frames = run_max_frames;

      Sequence seq;
      if (run_synth) {
        SyntheticSpec spec;
        spec.scene = parse_scene(run_scene);
        spec.trajectory = parse_trajectory(run_traj);
        spec.frames = run_frames;
        spec.fps = run_fps;
        spec.width = run_width;
        spec.height = run_height;
        spec.focal = run_focal;
        seq = make_synthetic_sequence(spec);
      } else {
        TumLoadOptions opt;
        opt.allow_resort = run_resort;
        seq = load_tum_sequence(run_data, opt);
      }
      const RunReport report = run_pipeline(seq, cfg, run_out);
      std::cout << "tracked " << report.frames_tracked << "/" << report.frames_processed
                << " frames, " << report.keyframes << " keyframes, " << report.gaussian_count
                << " gaussians, mean psnr "
                << (report.psnr_samples.empty() ? std::string("n/a")
                                                : std::to_string(report.mean_psnr))
                << "\nreport: " << (std::filesystem::path(run_out) / "report.json").string()
                << "\n";
      return 0;
    }

    if (*synth_cmd) {
      SyntheticSpec spec;
      spec.scene = parse_scene(synth_scene);
      spec.trajectory = parse_trajectory(synth_traj);
      spec.frames = synth_frames;
      spec.fps = synth_fps;
      spec.width = synth_width;
      spec.height = synth_height;
      spec.focal = synth_focal;
      write_synthetic_sequence(synth_out, spec);
      std::cout << "wrote " << spec.frames << " frames to " << synth_out << "\n";
      return 0;
    }

    if (*render_cmd) {
      const GaussianMap map = import_ply(render_ply);
      PinholeCamera cam(render_focal, render_focal, 0.5 * (render_width - 1),
                        0.5 * (render_height - 1), render_width, render_height);
      Se3Pose pose;
      if (!render_pose.empty()) {
        pose.translation = {render_pose[0], render_pose[1], render_pose[2]};
        pose.rotation = Eigen::Quaterniond(render_pose[6], render_pose[3], render_pose[4],
                                           render_pose[5])
                            .normalized();
      }
      RenderConfig rcfg;
      rcfg.record_blend = false;
      const RenderOutput out = render(map, invert(pose), cam, rcfg);
      write_png_rgb(render_out, out.image);
      std::cout << "rendered " << map.size() << " gaussians to " << render_out << "\n";
      return 0;
    }

    if (*eval_cmd) {
      bool did = false;
      if (!eval_est.empty() || !eval_ref.empty()) {
        if (eval_est.empty() || eval_ref.empty())
          throw BadConfig("--estimate and --reference go together");
        const auto est = read_trajectory_tum(eval_est);
        const auto ref = read_trajectory_tum(eval_ref);
        const AteResult ate = ate_rmse(est, ref, eval_max_dt);
        std::cout << "ate_rmse " << ate.rmse << " over " << ate.pairs << " pairs (scale "
                  << ate.scale << ")\n";
        did = true;
      }
      if (!eval_rendered.empty() || !eval_target.empty()) {
        if (eval_rendered.empty() || eval_target.empty())
          throw BadConfig("--rendered and --target go together");
        const double v = psnr(read_png_rgb(eval_rendered), read_png_rgb(eval_target));
        std::cout << "psnr " << v << "\n";
        did = true;
      }
      if (!did) throw BadConfig("eval needs trajectories and/or images");
      return 0;
    }

    if (*export_cmd) {
      const GaussianMap map = import_ply(export_in);
      export_ply(map, export_out);
      std::cout << "re-encoded " << map.size() << " gaussians ("
                << ply_payload_bytes(map.size()) << " payload bytes)\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
