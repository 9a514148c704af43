// SPDX-License-Identifier: Apache-2.0
#include "msplat/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "msplat/dataset.hpp"
#include "msplat/errors.hpp"

namespace msplat {

double psnr(const ImageRgb& a, const ImageRgb& b) {
  if (!a.same_size(b)) throw DimensionMismatch("psnr needs equally sized images");
  double mse = 0.0;
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < a.rows(); ++r)
      for (int c = 0; c < a.cols(); ++c) {
        const double d = a.ch[ch].at(r, c) - b.ch[ch].at(r, c);
        mse += d * d;
      }
  mse /= 3.0 * a.rows() * a.cols();
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

AteResult ate_rmse(const std::vector<TimedPose>& estimate,
                   const std::vector<TimedPose>& reference, double max_dt) {
  std::vector<TimedPose> ref_sorted = reference;
  std::stable_sort(ref_sorted.begin(), ref_sorted.end(),
                   [](const TimedPose& a, const TimedPose& b) {
                     return a.timestamp < b.timestamp;
                   });
  std::vector<Eigen::Vector3d> src, dst;
  for (const TimedPose& e : estimate) {
    const auto match = nearest_pose(ref_sorted, e.timestamp, max_dt);
    if (!match) continue;
    src.push_back(e.pose.translation);
    dst.push_back(match->pose.translation);
  }
  if (src.size() < 3)
    throw TooFewPoses("only " + std::to_string(src.size()) +
                      " timestamp matches; need at least 3 for alignment");

  Eigen::Matrix3Xd s(3, src.size()), d(3, dst.size());
  for (size_t i = 0; i < src.size(); ++i) {
    s.col(i) = src[i];
    d.col(i) = dst[i];
  }
  const Eigen::Matrix4d t = Eigen::umeyama(s, d, true);
  AteResult out;
  const Eigen::Matrix3d sr = t.topLeftCorner<3, 3>();
  out.scale = std::cbrt(sr.determinant());
  out.rotation = sr / out.scale;
  out.translation = t.topRightCorner<3, 1>();
  out.pairs = static_cast<int>(src.size());
  double sq = 0.0;
  for (size_t i = 0; i < src.size(); ++i)
    sq += (sr * src[i] + out.translation - dst[i]).squaredNorm();
  out.rmse = std::sqrt(sq / src.size());
  return out;
}

void write_trajectory_tum(const std::string& path, const std::vector<TimedPose>& poses) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(9);
  out << std::fixed;
  for (const TimedPose& p : poses) {
    const Eigen::Quaterniond& q = p.pose.rotation;
    out << p.timestamp << ' ' << p.pose.translation.x() << ' ' << p.pose.translation.y() << ' '
        << p.pose.translation.z() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << ' '
        << q.w() << '\n';
  }
  if (!out) throw IoError("write to " + path + " failed");
}

std::vector<TimedPose> read_trajectory_tum(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingIndexFile("cannot open " + path);
  std::vector<TimedPose> poses;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    bool blank = true;
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) {
        blank = (c == '#');
        break;
      }
    if (blank) continue;
    std::istringstream ss(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
      throw UnparseableLine(path + ":" + std::to_string(line_no) +
                            ": expected 't tx ty tz qx qy qz qw'");
    TimedPose p;
    p.timestamp = t;
    p.pose.translation = {tx, ty, tz};
    p.pose.rotation = Eigen::Quaterniond(qw, qx, qy, qz).normalized();
    poses.push_back(p);
  }
  return poses;
}

}  // namespace msplat
