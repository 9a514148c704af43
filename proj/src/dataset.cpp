// SPDX-License-Identifier: Apache-2.0
#include "msplat/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "msplat/png_io.hpp"

namespace msplat {

namespace {

struct IndexEntry {
  double timestamp;
  std::string path;
};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingIndexFile("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

bool is_blank_or_comment(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

std::vector<IndexEntry> read_index(const std::string& path, bool allow_resort) {
  std::vector<IndexEntry> entries;
  const std::vector<std::string> lines = read_lines(path);
  bool sorted = true;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (is_blank_or_comment(lines[i])) continue;
    std::istringstream ss(lines[i]);
    IndexEntry e;
    if (!(ss >> e.timestamp >> e.path) || !std::isfinite(e.timestamp))
      throw UnparseableLine(path + ":" + std::to_string(i + 1) + ": expected 'timestamp path'");
    if (!entries.empty() && e.timestamp < entries.back().timestamp) sorted = false;
    entries.push_back(std::move(e));
  }
  if (!sorted) {
    if (!allow_resort)
      throw BadConfig(path + ": timestamps are out of order (resorting is disabled)");
    std::stable_sort(entries.begin(), entries.end(),
                     [](const IndexEntry& a, const IndexEntry& b) {
                       return a.timestamp < b.timestamp;
                     });
  }
  return entries;
}

std::vector<TimedPose> read_groundtruth(const std::string& path) {
  std::vector<TimedPose> poses;
  const std::vector<std::string> lines = read_lines(path);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (is_blank_or_comment(lines[i])) continue;
    std::istringstream ss(lines[i]);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
      throw UnparseableLine(path + ":" + std::to_string(i + 1) +
                            ": expected 't tx ty tz qx qy qz qw'");
    TimedPose p;
    p.timestamp = t;
    p.pose.translation = {tx, ty, tz};
    p.pose.rotation = Eigen::Quaterniond(qw, qx, qy, qz).normalized();
    poses.push_back(p);
  }
  std::stable_sort(poses.begin(), poses.end(),
                   [](const TimedPose& a, const TimedPose& b) {
                     return a.timestamp < b.timestamp;
                   });
  return poses;
}

}  // namespace

std::optional<TimedPose> nearest_pose(const std::vector<TimedPose>& poses, double t,
                                      double max_dt) {
  if (poses.empty()) return std::nullopt;
  const auto it = std::lower_bound(poses.begin(), poses.end(), t,
                                   [](const TimedPose& p, double v) {
                                     return p.timestamp < v;
                                   });
  const TimedPose* best = nullptr;
  double best_dt = max_dt;
  if (it != poses.end() && std::abs(it->timestamp - t) <= best_dt) {
    best = &*it;
    best_dt = std::abs(it->timestamp - t);
  }
  if (it != poses.begin()) {
    const auto prev = std::prev(it);
    if (std::abs(prev->timestamp - t) <= best_dt) best = &*prev;
  }
  if (!best) return std::nullopt;
  return *best;
}

Sequence load_tum_sequence(const std::string& dir, const TumLoadOptions& opt) {
  namespace fs = std::filesystem;
  Sequence seq;
  const auto rgb_entries = read_index((fs::path(dir) / "rgb.txt").string(), opt.allow_resort);
  if (rgb_entries.empty()) throw MissingIndexFile(dir + "/rgb.txt lists no frames");

  auto rgb_paths = std::make_shared<std::vector<std::string>>();
  for (const IndexEntry& e : rgb_entries) {
    seq.timestamps.push_back(e.timestamp);
    rgb_paths->push_back((fs::path(dir) / e.path).string());
  }
  seq.fetch_rgb = [rgb_paths](int i) { return read_png_rgb(rgb_paths->at(i)); };

  const std::string depth_index = (fs::path(dir) / "depth.txt").string();
  if (fs::exists(depth_index)) {
    const auto depth_entries = read_index(depth_index, opt.allow_resort);
    // associate each rgb frame with the nearest depth frame in time
    auto depth_paths = std::make_shared<std::vector<std::string>>(seq.timestamps.size());
    auto has_depth = std::make_shared<std::vector<char>>(seq.timestamps.size(), 0);
    for (size_t i = 0; i < seq.timestamps.size(); ++i) {
      double best_dt = opt.association_max_dt;
      for (const IndexEntry& d : depth_entries) {
        const double dt = std::abs(d.timestamp - seq.timestamps[i]);
        if (dt <= best_dt) {
          best_dt = dt;
          (*depth_paths)[i] = (fs::path(dir) / d.path).string();
          (*has_depth)[i] = 1;
        }
      }
    }
    const double scale = opt.depth_scale;
    seq.fetch_depth = [depth_paths, has_depth, scale](int i) {
      if (!has_depth->at(i))
        throw IoError("no depth image associated with frame " + std::to_string(i));
      const Image16 raw = read_png_gray16(depth_paths->at(i));
      Image out(raw.rows, raw.cols, 0.0);
      for (int r = 0; r < raw.rows; ++r)
        for (int c = 0; c < raw.cols; ++c)
          out.at(r, c) = raw.at(r, c) / scale;
      return out;
    };
  }

  const std::string gt_path = (fs::path(dir) / "groundtruth.txt").string();
  if (fs::exists(gt_path)) seq.groundtruth = read_groundtruth(gt_path);

  const std::string calib_path = (fs::path(dir) / "calibration.txt").string();
  if (fs::exists(calib_path)) {
    std::ifstream in(calib_path);
    double fx, fy, cx, cy;
    if (!(in >> fx >> fy >> cx >> cy))
      throw UnparseableLine(calib_path + ":1: expected 'fx fy cx cy'");
    const ImageRgb first = seq.fetch_rgb(0);
    seq.camera = PinholeCamera(fx, fy, cx, cy, first.cols(), first.rows());
  }
  return seq;
}

}  // namespace msplat
