// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

#include "msplat/errors.hpp"

namespace msplat {

struct Triangulation2D {
  std::vector<Eigen::Vector2d> vertices;          // copy of the input points
  std::vector<std::array<int, 3>> triangles;      // CCW, indices into vertices
};

// Delaunay triangulation by incremental insertion with Lawson flips.
// Predicates are exact (128-bit integer) when every coordinate is an integer
// of magnitude <= 2^20 (the pixel-grid case), and filtered doubles otherwise.
// Cocircular quads take the lexicographically least diagonal. Duplicate
// points keep their vertex slot but get no triangles. Throws DegenerateInput
// for fewer than 3 points or an all-collinear set.
Triangulation2D triangulate(const std::vector<Eigen::Vector2d>& points);

// Exposed for tests: >0 left turn, <0 right turn, 0 collinear (within the
// predicate's filter).
int orient2d_sign(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c);

// >0 when d is strictly inside the circumcircle of CCW triangle (a,b,c).
int incircle_sign(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                  const Eigen::Vector2d& d);

}  // namespace msplat
