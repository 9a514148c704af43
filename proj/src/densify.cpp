// SPDX-License-Identifier: Apache-2.0
#include "msplat/densify.hpp"

#include <algorithm>
#include <fstream>

namespace msplat {

Mask low_gradient_mask(const GradientImage& grad, double threshold) {
  Mask m;
  m.rows = grad.rows();
  m.cols = grad.cols();
  m.data.resize(static_cast<size_t>(m.rows) * m.cols);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) m.set(r, c, grad.magnitude.at(r, c) < threshold);
  return m;
}

namespace {

inline double cross2(const Eigen::Vector2d& o, const Eigen::Vector2d& a,
                     const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

bool inside_ccw(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                const Eigen::Vector2d& p) {
  return cross2(a, b, p) >= 0.0 && cross2(b, c, p) >= 0.0 && cross2(c, a, p) >= 0.0;
}

}  // namespace

std::vector<InterpolatedPoint> interpolate_depth(const Triangulation2D& tri,
                                                 const std::vector<double>& vertex_inv_depths,
                                                 const Mask& mask, const ImageRgb& rgb,
                                                 const DensifyConfig& cfg) {
  if (vertex_inv_depths.size() != tri.vertices.size())
    throw DimensionMismatch("got " + std::to_string(vertex_inv_depths.size()) +
                            " depths for " + std::to_string(tri.vertices.size()) + " vertices");
  if (rgb.rows() != mask.rows || rgb.cols() != mask.cols)
    throw DimensionMismatch("mask and image dimensions disagree");
  if (cfg.stride < 1) throw BadConfig("stride must be >= 1");

  struct Box {
    double minx, maxx, miny, maxy;
  };
  std::vector<Box> boxes(tri.triangles.size());
  for (size_t t = 0; t < tri.triangles.size(); ++t) {
    const auto& v = tri.triangles[t];
    const auto &a = tri.vertices[v[0]], &b = tri.vertices[v[1]], &c = tri.vertices[v[2]];
    boxes[t] = {std::min({a.x(), b.x(), c.x()}), std::max({a.x(), b.x(), c.x()}),
                std::min({a.y(), b.y(), c.y()}), std::max({a.y(), b.y(), c.y()})};
  }

  std::vector<InterpolatedPoint> out;
  for (int r = 0; r < mask.rows; r += cfg.stride)
    for (int c = 0; c < mask.cols; c += cfg.stride) {
      if (!mask.at(r, c)) continue;
      const Eigen::Vector2d p(c, r);
      for (size_t t = 0; t < tri.triangles.size(); ++t) {
        const Box& bb = boxes[t];
        if (p.x() < bb.minx || p.x() > bb.maxx || p.y() < bb.miny || p.y() > bb.maxy) continue;
        const auto& v = tri.triangles[t];
        if (!inside_ccw(tri.vertices[v[0]], tri.vertices[v[1]], tri.vertices[v[2]], p)) continue;
        const double ra = vertex_inv_depths[v[0]];
        const double rb = vertex_inv_depths[v[1]];
        const double rc = vertex_inv_depths[v[2]];
        double inv_depth;
        if (cfg.average_metric_depth) {
          if (ra <= 0 || rb <= 0 || rc <= 0)
            throw NonPositiveInverseDepth("metric averaging needs positive inverse depths");
          inv_depth = 3.0 / (1.0 / ra + 1.0 / rb + 1.0 / rc);
        } else {
          inv_depth = (ra + rb + rc) / 3.0;
        }
        InterpolatedPoint ip;
        ip.pixel = p;
        ip.inv_depth = inv_depth;
        ip.source_triangle = static_cast<int>(t);
        ip.color = rgb.at(r, c);
        out.push_back(ip);
        break;
      }
    }
  return out;
}

void write_triangulation_svg(const std::string& path, const Triangulation2D& tri, int width,
                             int height) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& t : tri.triangles) {
    f << "<polygon points=\"";
    for (int k = 0; k < 3; ++k)
      f << tri.vertices[t[k]].x() << "," << tri.vertices[t[k]].y() << (k < 2 ? " " : "");
    f << "\" fill=\"none\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
  }
  for (const auto& v : tri.vertices)
    f << "<circle cx=\"" << v.x() << "\" cy=\"" << v.y() << "\" r=\"1\" fill=\"red\"/>\n";
  f << "</svg>\n";
}

}  // namespace msplat
