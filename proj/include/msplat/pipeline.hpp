// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "msplat/config.hpp"
#include "msplat/dataset.hpp"

namespace msplat {

struct EvalSample {
  int frame_index = -1;
  double timestamp = 0.0;
  double psnr_db = 0.0;  // +inf for a pixel-perfect render
};

struct RunReport {
  int frames_processed = 0;
  int frames_tracked = 0;
  int keyframes = 0;
  int marginalizations = 0;
  size_t max_window = 0;
  size_t gaussian_count = 0;
  int64_t iterations = 0;
  std::vector<EvalSample> psnr_samples;
  double mean_psnr = 0.0;  // over the samples; 0 when there are none
  double ate = -1.0;       // < 0 when groundtruth was missing or too sparse
  int ate_pairs = 0;
  size_t ply_bytes = 0;
  double wall_seconds = 0.0;
  bool failed = false;
  std::string error;
};

// Serializes the report; non-finite PSNR values become the string "inf".
std::string report_to_json(const RunReport& report);

// Tracking and mapping on two worker threads bridged by a bounded packet
// queue. Writes map.ply (+ json sidecar), trajectory.txt, iterations.csv and
// report.json into out_dir; on failure the partial artifacts and a report
// carrying the error are still written before the exception is rethrown.
// PSNR samples are taken after the run, rendering the final map at every
// recorded eval pose (frame indices divisible by eval_every).
RunReport run_pipeline(const Sequence& seq, const PipelineConfig& cfg,
                       const std::string& out_dir);

}  // namespace msplat
