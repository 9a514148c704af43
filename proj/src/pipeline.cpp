// SPDX-License-Identifier: Apache-2.0
#include "msplat/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "msplat/frontend.hpp"
#include "msplat/metrics.hpp"
#include "msplat/optimizer.hpp"
#include "msplat/pipeline.hpp"
#include "msplat/ply_io.hpp"
#include "msplat/queue.hpp"
#include "msplat/rasterizer.hpp"

namespace msplat {

namespace {

nlohmann::json psnr_value(double v) {
  if (std::isinf(v)) return "inf";
  if (std::isnan(v)) return "nan";
  return v;
}

struct EvalPoint {
  int index;
  double timestamp;
  Se3Pose pose;
};

}  // namespace

std::string report_to_json(const RunReport& r) {
  nlohmann::json j;
  j["frames_processed"] = r.frames_processed;
  j["frames_tracked"] = r.frames_tracked;
  j["keyframes"] = r.keyframes;
  j["marginalizations"] = r.marginalizations;
  j["max_window"] = r.max_window;
  j["gaussian_count"] = r.gaussian_count;
  j["iterations"] = r.iterations;
  j["mean_psnr"] = psnr_value(r.mean_psnr);
  nlohmann::json samples = nlohmann::json::array();
  for (const EvalSample& s : r.psnr_samples) {
    nlohmann::json e;
    e["frame_index"] = s.frame_index;
    e["timestamp"] = s.timestamp;
    e["psnr"] = psnr_value(s.psnr_db);
    samples.push_back(e);
  }
  j["psnr_samples"] = samples;
  if (r.ate >= 0.0) {
    j["ate_rmse"] = r.ate;
    j["ate_pairs"] = r.ate_pairs;
  } else {
    j["ate_rmse"] = nullptr;
    j["ate_pairs"] = 0;
  }
  j["ply_bytes"] = r.ply_bytes;
  j["wall_seconds"] = r.wall_seconds;
  j["failed"] = r.failed;
  j["error"] = r.error;
  return j.dump(2) + "\n";
}

RunReport run_pipeline(const Sequence& seq, const PipelineConfig& cfg,
                       const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  if (seq.size() == 0) {
    // Nothing to do; leave an empty report so the artifact set is complete.
    RunReport report;
    write_trajectory_tum((fs::path(out_dir) / "trajectory.txt").string(), {});
    std::ofstream rj((fs::path(out_dir) / "report.json").string());
    rj << report_to_json(report);
    return report;
  }
  if (!seq.camera) throw BadConfig("the sequence carries no camera calibration");

  const PinholeCamera cam = *seq.camera;
  const int frame_count =
      cfg.max_frames >= 0 ? std::min(seq.size(), cfg.max_frames) : seq.size();

  RunReport report;
  Frontend frontend(cam, cfg.frontend, cfg.seed);
  GaussianMap map;
  MapOptimizer mapper(&map, cam, cfg.optimizer, cfg.seed + 1);
  BoundedQueue<KeyframePacket> queue(static_cast<size_t>(cfg.queue_capacity));

  std::vector<TimedPose> trajectory;
  std::vector<EvalPoint> eval_points;
  std::exception_ptr tracker_error, mapper_error;
  std::atomic<bool> abort{false};

  const auto t_start = std::chrono::steady_clock::now();

  std::thread tracker([&] {
    try {
      const auto frame_budget =
          std::chrono::duration<double>(cfg.pace_hz > 0.0 ? 1.0 / cfg.pace_hz : 0.0);
      auto next_due = std::chrono::steady_clock::now();
      for (int i = 0; i < frame_count && !abort.load(); ++i) {
        if (cfg.paced) {
          std::this_thread::sleep_until(next_due);
          next_due += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
              frame_budget);
        }
        const ImageRgb rgb = seq.fetch_rgb(i);
        Image depth;
        const bool want_depth = cfg.frontend.inject_true_depth && seq.has_depth();
        if (want_depth) depth = seq.fetch_depth(i);
        const FrameResult fr =
            frontend.process_frame(rgb, seq.timestamps[i], want_depth ? &depth : nullptr);
        ++report.frames_processed;
        if (fr.tracked) {
          ++report.frames_tracked;
          trajectory.push_back({seq.timestamps[i], fr.pose});
          if (cfg.eval_every > 0 && i % cfg.eval_every == 0)
            eval_points.push_back({i, seq.timestamps[i], fr.pose});
        }
        if (fr.packet) {
          if (!queue.push(std::move(*fr.packet))) break;  // mapper went away
        }
      }
    } catch (...) {
      tracker_error = std::current_exception();
      abort.store(true);
    }
    queue.close();
  });

  std::thread mapping([&] {
    try {
      auto can_iterate = [&] { return !map.empty() && !mapper.views().empty(); };
      if (!cfg.paced) {
        // Lockstep: a fixed iteration budget per packet makes the whole run a
        // pure function of the inputs and the seed.
        while (auto pk = queue.pop()) {
          mapper.add_packet(*pk, cfg.map_init);
          if (!can_iterate()) continue;
          for (int it = 0; it < cfg.iterations_per_packet; ++it) mapper.optimize_iteration();
        }
      } else {
        while (true) {
          if (auto pk = queue.try_pop()) {
            mapper.add_packet(*pk, cfg.map_init);
            continue;
          }
          if (queue.closed() && queue.size() == 0) break;
          if (can_iterate())
            mapper.optimize_iteration();
          else
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
      }
      if (can_iterate())
        for (int it = 0; it < cfg.final_iterations; ++it) mapper.optimize_iteration();
    } catch (...) {
      mapper_error = std::current_exception();
      abort.store(true);
      queue.close();
      while (queue.try_pop()) {  // unblock a tracker stuck on push
      }
    }
  });

  tracker.join();
  mapping.join();

  report.keyframes = frontend.keyframes_created();
  report.marginalizations = frontend.marginalization_count();
  report.max_window = frontend.max_window_seen();
  report.gaussian_count = map.size();
  report.iterations = mapper.iteration();

  const std::exception_ptr first_error = tracker_error ? tracker_error : mapper_error;
  if (first_error) {
    report.failed = true;
    try {
      std::rethrow_exception(first_error);
    } catch (const std::exception& e) {
      report.error = e.what();
    }
  }

  // PSNR against the final map at the recorded eval poses.
  if (!report.failed && !map.empty()) {
    RenderConfig rcfg = cfg.optimizer.render;
    rcfg.record_blend = false;
    double sum = 0.0;
    for (const EvalPoint& ep : eval_points) {
      const ImageRgb target = seq.fetch_rgb(ep.index);
      const RenderOutput out = render(map, invert(ep.pose), cam, rcfg);
      const double v = psnr(out.image, target);
      report.psnr_samples.push_back({ep.index, ep.timestamp, v});
      sum += v;
    }
    if (!report.psnr_samples.empty()) sum /= report.psnr_samples.size();
    report.mean_psnr = report.psnr_samples.empty() ? 0.0 : sum;
  }

  if (!seq.groundtruth.empty() && trajectory.size() >= 3) {
    try {
      const AteResult ate = ate_rmse(trajectory, seq.groundtruth);
      report.ate = ate.rmse;
      report.ate_pairs = ate.pairs;
    } catch (const TooFewPoses&) {
    }
  }

  // Artifacts. Written even after a failure so a crashed run leaves evidence.
  const std::string ply_path = (fs::path(out_dir) / "map.ply").string();
  std::string artifact_error;
  try {
    if (!map.empty()) {
      export_ply(map, ply_path);
      report.ply_bytes = static_cast<size_t>(fs::file_size(ply_path));
    }
    write_trajectory_tum((fs::path(out_dir) / "trajectory.txt").string(), trajectory);
    std::ofstream csv((fs::path(out_dir) / "iterations.csv").string());
    csv << "iteration,loss,level,view_id,gaussian_count\n";
    csv.precision(17);
    for (const IterationLog& log : mapper.logs())
      csv << log.iteration << ',' << log.loss << ',' << log.level << ',' << log.view_id << ','
          << log.gaussian_count << '\n';
  } catch (const std::exception& e) {
    artifact_error = e.what();
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  {
    std::ofstream rj((fs::path(out_dir) / "report.json").string());
    rj << report_to_json(report);
  }

  if (first_error) std::rethrow_exception(first_error);
  if (!artifact_error.empty()) throw IoError("artifact write failed: " + artifact_error);
  return report;
}

}  // namespace msplat
