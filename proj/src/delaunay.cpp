// SPDX-License-Identifier: Apache-2.0
#include "msplat/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace msplat {

namespace {

constexpr double kIntLimit = 1048576.0;  // 2^20

bool all_integer(const std::vector<Eigen::Vector2d>& pts) {
  for (const auto& p : pts) {
    if (std::abs(p.x()) > kIntLimit || std::abs(p.y()) > kIntLimit) return false;
    if (p.x() != std::floor(p.x()) || p.y() != std::floor(p.y())) return false;
  }
  return true;
}

int sign_i128(__int128 v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }

int orient2d_exact(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  const int64_t ax = static_cast<int64_t>(a.x()), ay = static_cast<int64_t>(a.y());
  const int64_t bx = static_cast<int64_t>(b.x()), by = static_cast<int64_t>(b.y());
  const int64_t cx = static_cast<int64_t>(c.x()), cy = static_cast<int64_t>(c.y());
  const __int128 det = static_cast<__int128>(bx - ax) * (cy - ay) -
                       static_cast<__int128>(by - ay) * (cx - ax);
  return sign_i128(det);
}

int incircle_exact(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                   const Eigen::Vector2d& d) {
  const int64_t adx = static_cast<int64_t>(a.x()) - static_cast<int64_t>(d.x());
  const int64_t ady = static_cast<int64_t>(a.y()) - static_cast<int64_t>(d.y());
  const int64_t bdx = static_cast<int64_t>(b.x()) - static_cast<int64_t>(d.x());
  const int64_t bdy = static_cast<int64_t>(b.y()) - static_cast<int64_t>(d.y());
  const int64_t cdx = static_cast<int64_t>(c.x()) - static_cast<int64_t>(d.x());
  const int64_t cdy = static_cast<int64_t>(c.y()) - static_cast<int64_t>(d.y());
  const __int128 alift = static_cast<__int128>(adx) * adx + static_cast<__int128>(ady) * ady;
  const __int128 blift = static_cast<__int128>(bdx) * bdx + static_cast<__int128>(bdy) * bdy;
  const __int128 clift = static_cast<__int128>(cdx) * cdx + static_cast<__int128>(cdy) * cdy;
  const __int128 det = alift * (static_cast<__int128>(bdx) * cdy - static_cast<__int128>(bdy) * cdx) -
                       blift * (static_cast<__int128>(adx) * cdy - static_cast<__int128>(ady) * cdx) +
                       clift * (static_cast<__int128>(adx) * bdy - static_cast<__int128>(ady) * bdx);
  return sign_i128(det);
}

int orient2d_filtered(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                      const Eigen::Vector2d& c) {
  const double l = (b.x() - a.x()) * (c.y() - a.y());
  const double r = (b.y() - a.y()) * (c.x() - a.x());
  const double det = l - r;
  const double err = 4.0 * std::numeric_limits<double>::epsilon() * (std::abs(l) + std::abs(r));
  if (det > err) return 1;
  if (det < -err) return -1;
  return 0;
}

int incircle_filtered(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                      const Eigen::Vector2d& d) {
  const double adx = a.x() - d.x(), ady = a.y() - d.y();
  const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double det = alift * (bdx * cdy - bdy * cdx) - blift * (adx * cdy - ady * cdx) +
                     clift * (adx * bdy - ady * bdx);
  const double perm = alift * (std::abs(bdx * cdy) + std::abs(bdy * cdx)) +
                      blift * (std::abs(adx * cdy) + std::abs(ady * cdx)) +
                      clift * (std::abs(adx * bdy) + std::abs(ady * bdx));
  const double err = 16.0 * std::numeric_limits<double>::epsilon() * perm;
  if (det > err) return 1;
  if (det < -err) return -1;
  return 0;
}

struct Tri {
  int v[3];
  int nb[3];  // nb[i] faces edge (v[i+1], v[i+2]), -1 when open
  bool alive = true;
};

class Builder {
 public:
  explicit Builder(const std::vector<Eigen::Vector2d>& points)
      : pts_(points), n_input_(static_cast<int>(points.size())), exact_(all_integer(points)) {
    double span = 1.0, cx = 0.0, cy = 0.0;
    if (!pts_.empty()) {
      double minx = pts_[0].x(), maxx = minx, miny = pts_[0].y(), maxy = miny;
      for (const auto& p : pts_) {
        minx = std::min(minx, p.x());
        maxx = std::max(maxx, p.x());
        miny = std::min(miny, p.y());
        maxy = std::max(maxy, p.y());
      }
      span = std::max({maxx - minx, maxy - miny, 1.0});
      cx = 0.5 * (minx + maxx);
      cy = 0.5 * (miny + maxy);
    }
    if (exact_) {
      const double m = 268435456.0;  // 2^28, far beyond the 2^20 input limit
      pts_.push_back({-m, -m});
      pts_.push_back({3.0 * m, -m});
      pts_.push_back({-m, 3.0 * m});
    } else {
      const double m = span * 1048576.0;
      pts_.push_back({cx - 2.0 * m, cy - m});
      pts_.push_back({cx + 2.0 * m, cy - m});
      pts_.push_back({cx, cy + 2.0 * m});
    }
    Tri root;
    root.v[0] = n_input_;
    root.v[1] = n_input_ + 1;
    root.v[2] = n_input_ + 2;
    if (orient(root.v[0], root.v[1], root.v[2]) < 0) std::swap(root.v[1], root.v[2]);
    root.nb[0] = root.nb[1] = root.nb[2] = -1;
    tris_.push_back(root);
  }

  Triangulation2D run() {
    for (int i = 0; i < n_input_; ++i) insert(i);
    canonicalize_ties();
    Triangulation2D out;
    out.vertices.assign(pts_.begin(), pts_.begin() + n_input_);
    for (const Tri& t : tris_) {
      if (!t.alive) continue;
      if (t.v[0] >= n_input_ || t.v[1] >= n_input_ || t.v[2] >= n_input_) continue;
      std::array<int, 3> tri = {t.v[0], t.v[1], t.v[2]};
      if (orient(tri[0], tri[1], tri[2]) < 0) std::swap(tri[1], tri[2]);
      out.triangles.push_back(tri);
    }
    return out;
  }

 private:
  int orient(int a, int b, int c) const {
    return exact_ ? orient2d_exact(pts_[a], pts_[b], pts_[c])
                  : orient2d_filtered(pts_[a], pts_[b], pts_[c]);
  }
  int incircle(int a, int b, int c, int d) const {
    return exact_ ? incircle_exact(pts_[a], pts_[b], pts_[c], pts_[d])
                  : incircle_filtered(pts_[a], pts_[b], pts_[c], pts_[d]);
  }

  bool lex_less(int a, int b) const {
    if (pts_[a].x() != pts_[b].x()) return pts_[a].x() < pts_[b].x();
    if (pts_[a].y() != pts_[b].y()) return pts_[a].y() < pts_[b].y();
    return a < b;
  }

  // Canonical diagonal key for the cocircular tie rule.
  std::pair<int, int> diag_key(int a, int b) const {
    return lex_less(a, b) ? std::make_pair(a, b) : std::make_pair(b, a);
  }
  bool key_less(std::pair<int, int> a, std::pair<int, int> b) const {
    if (a.first != b.first) return lex_less(a.first, b.first);
    if (a.second != b.second) return lex_less(a.second, b.second);
    return false;
  }

  int apex_index(int tri, int neighbor) const {
    for (int i = 0; i < 3; ++i)
      if (tris_[tri].nb[i] == neighbor) return i;
    return -1;
  }

  void replace_neighbor(int tri, int old_nb, int new_nb) {
    if (tri < 0) return;
    for (int i = 0; i < 3; ++i)
      if (tris_[tri].nb[i] == old_nb) {
        tris_[tri].nb[i] = new_nb;
        return;
      }
  }

  // Walks toward p; falls back to a scan if the walk stalls.
  int locate(int pi) {
    int cur = hint_;
    const int cap = 4 * static_cast<int>(tris_.size()) + 64;
    for (int step = 0; step < cap; ++step) {
      if (!tris_[cur].alive) break;
      const Tri& t = tris_[cur];
      bool moved = false;
      for (int i = 0; i < 3; ++i) {
        if (orient(t.v[(i + 1) % 3], t.v[(i + 2) % 3], pi) < 0) {
          if (t.nb[i] < 0) return -1;
          cur = t.nb[i];
          moved = true;
          break;
        }
      }
      if (!moved) return cur;
    }
    for (int ti = 0; ti < static_cast<int>(tris_.size()); ++ti) {
      if (!tris_[ti].alive) continue;
      const Tri& t = tris_[ti];
      bool inside = true;
      for (int i = 0; i < 3; ++i)
        if (orient(t.v[(i + 1) % 3], t.v[(i + 2) % 3], pi) < 0) inside = false;
      if (inside) return ti;
    }
    return -1;
  }

  void insert(int pi) {
    const int loc = locate(pi);
    if (loc < 0) return;  // outside the super triangle: cannot happen, skip defensively
    const Tri& t = tris_[loc];
    for (int i = 0; i < 3; ++i)
      if (pts_[t.v[i]] == pts_[pi]) return;  // duplicate point keeps its slot, no triangles
    int on_edge = -1;
    for (int i = 0; i < 3; ++i)
      if (orient(t.v[(i + 1) % 3], t.v[(i + 2) % 3], pi) == 0) {
        on_edge = i;
        break;
      }
    std::vector<std::pair<int, int>> stack;  // (triangle, edge index opposite the new vertex)
    if (on_edge < 0)
      split_interior(loc, pi, stack);
    else
      split_edge(loc, on_edge, pi, stack);
    legalize(pi, stack);
    hint_ = static_cast<int>(tris_.size()) - 1;
  }

  void split_interior(int ti, int pi, std::vector<std::pair<int, int>>& stack) {
    const Tri old = tris_[ti];
    const int a = old.v[0], b = old.v[1], c = old.v[2];
    const int ext_a = old.nb[0], ext_b = old.nb[1], ext_c = old.nb[2];
    tris_[ti].alive = false;
    const int t0 = static_cast<int>(tris_.size());
    const int t1 = t0 + 1, t2 = t0 + 2;
    tris_.push_back({{a, b, pi}, {t1, t2, ext_c}, true});
    tris_.push_back({{b, c, pi}, {t2, t0, ext_a}, true});
    tris_.push_back({{c, a, pi}, {t0, t1, ext_b}, true});
    replace_neighbor(ext_c, ti, t0);
    replace_neighbor(ext_a, ti, t1);
    replace_neighbor(ext_b, ti, t2);
    stack.push_back({t0, 2});
    stack.push_back({t1, 2});
    stack.push_back({t2, 2});
  }

  void split_edge(int ti, int edge, int pi, std::vector<std::pair<int, int>>& stack) {
    const Tri told = tris_[ti];
    const int a = told.v[(edge + 1) % 3], b = told.v[(edge + 2) % 3], c = told.v[edge];
    const int ext_ca = told.nb[(edge + 2) % 3];  // across (c, a)
    const int ext_bc = told.nb[(edge + 1) % 3];  // across (b, c)
    const int ui = told.nb[edge];
    tris_[ti].alive = false;
    if (ui < 0) {
      const int t0 = static_cast<int>(tris_.size());
      const int t1 = t0 + 1;
      tris_.push_back({{a, pi, c}, {t1, ext_ca, -1}, true});
      tris_.push_back({{pi, b, c}, {ext_bc, t0, -1}, true});
      replace_neighbor(ext_ca, ti, t0);
      replace_neighbor(ext_bc, ti, t1);
      stack.push_back({t0, 1});
      stack.push_back({t1, 0});
      return;
    }
    const Tri uold = tris_[ui];
    const int uj = apex_index(ui, ti);
    const int d = uold.v[uj];
    // consistent CCW orientation means u traverses the shared edge as b -> a,
    // so u = (d, b, a) cyclically from its apex
    const int ext_db = uold.nb[(uj + 2) % 3];  // across (d, b), opposite a
    const int ext_ad = uold.nb[(uj + 1) % 3];  // across (a, d), opposite b
    tris_[ui].alive = false;
    const int t0 = static_cast<int>(tris_.size());
    const int t1 = t0 + 1, t2 = t0 + 2, t3 = t0 + 3;
    tris_.push_back({{a, pi, c}, {t1, ext_ca, t3}, true});   // t0
    tris_.push_back({{pi, b, c}, {ext_bc, t0, t2}, true});   // t1
    tris_.push_back({{b, pi, d}, {t3, ext_db, t1}, true});   // t2
    tris_.push_back({{pi, a, d}, {ext_ad, t2, t0}, true});   // t3
    replace_neighbor(ext_ca, ti, t0);
    replace_neighbor(ext_bc, ti, t1);
    replace_neighbor(ext_db, ui, t2);
    replace_neighbor(ext_ad, ui, t3);
    stack.push_back({t0, 1});
    stack.push_back({t1, 0});
    stack.push_back({t2, 1});
    stack.push_back({t3, 0});
  }

  // Lawson legalization around freshly inserted vertex pi. Each stack entry is
  // (triangle containing pi, edge index opposite pi).
  void legalize(int pi, std::vector<std::pair<int, int>>& stack) {
    while (!stack.empty()) {
      auto [ti, ei] = stack.back();
      stack.pop_back();
      if (!tris_[ti].alive) continue;
      if (tris_[ti].v[ei] != pi) continue;
      const int ni = tris_[ti].nb[ei];
      if (ni < 0) continue;
      const int nj = apex_index(ni, ti);
      if (nj < 0) continue;
      const int q = tris_[ni].v[nj];
      const Tri& t = tris_[ti];
      const int s = incircle(t.v[0], t.v[1], t.v[2], q);
      bool do_flip = s > 0;
      if (s == 0) {
        const int u = t.v[(ei + 1) % 3], w = t.v[(ei + 2) % 3];
        do_flip = key_less(diag_key(pi, q), diag_key(u, w));
      }
      if (!do_flip || !flip_valid(ti, ei, q)) continue;
      int f0, f1;
      flip(ti, ei, f0, f1);
      // both new triangles keep pi as vertex 0 (see flip); re-check their far edges
      stack.push_back({f0, 0});
      stack.push_back({f1, 0});
    }
  }

  bool flip_valid(int ti, int ei, int q) const {
    const Tri& t = tris_[ti];
    const int p = t.v[ei], u = t.v[(ei + 1) % 3], w = t.v[(ei + 2) % 3];
    return orient(p, u, q) > 0 && orient(q, w, p) > 0;
  }

  // Replaces diagonal (u, w) of quad (p, u, q, w) with (p, q). New triangles:
  // f0 = (p, u, q), f1 = (p, q, w); p is vertex 0 in both.
  void flip(int ti, int ei, int& f0, int& f1) {
    const Tri t = tris_[ti];
    const int p = t.v[ei], u = t.v[(ei + 1) % 3], w = t.v[(ei + 2) % 3];
    const int ni = t.nb[ei];
    const Tri n = tris_[ni];
    const int nj = apex_index(ni, ti);
    const int q = n.v[nj];
    // external neighbours; n = (q, w, u) cyclically (CCW mates traverse the
    // shared edge in opposite directions)
    const int ext_pu = t.nb[(ei + 2) % 3];  // across (p, u)
    const int ext_wp = t.nb[(ei + 1) % 3];  // across (w, p)
    const int ext_uq = n.nb[(nj + 1) % 3];  // across (u, q), opposite w
    const int ext_qw = n.nb[(nj + 2) % 3];  // across (q, w), opposite u
    tris_[ti].alive = false;
    tris_[ni].alive = false;
    f0 = static_cast<int>(tris_.size());
    f1 = f0 + 1;
    tris_.push_back({{p, u, q}, {ext_uq, f1, ext_pu}, true});
    tris_.push_back({{p, q, w}, {ext_qw, ext_wp, f0}, true});
    replace_neighbor(ext_pu, ti, f0);
    replace_neighbor(ext_wp, ti, f1);
    replace_neighbor(ext_uq, ni, f0);
    replace_neighbor(ext_qw, ni, f1);
    hint_ = f1;
  }

  // Gives every cocircular quad its canonical diagonal. Each accepted flip
  // strictly lowers the diagonal key, so the sweep terminates.
  void canonicalize_ties() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (int ti = 0; ti < static_cast<int>(tris_.size()); ++ti) {
        if (!tris_[ti].alive) continue;
        for (int ei = 0; ei < 3; ++ei) {
          if (!tris_[ti].alive) break;
          const int ni = tris_[ti].nb[ei];
          if (ni < 0 || ni < ti) continue;
          const int nj = apex_index(ni, ti);
          if (nj < 0) continue;
          const Tri& t = tris_[ti];
          const int q = tris_[ni].v[nj];
          if (incircle(t.v[0], t.v[1], t.v[2], q) != 0) continue;
          const int p = t.v[ei], u = t.v[(ei + 1) % 3], w = t.v[(ei + 2) % 3];
          if (!key_less(diag_key(p, q), diag_key(u, w))) continue;
          if (!flip_valid(ti, ei, q)) continue;
          int f0, f1;
          flip(ti, ei, f0, f1);
          changed = true;
          break;
        }
      }
    }
  }

  std::vector<Eigen::Vector2d> pts_;
  const int n_input_;
  const bool exact_;
  std::vector<Tri> tris_;
  int hint_ = 0;
};

}  // namespace

int orient2d_sign(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  std::vector<Eigen::Vector2d> v{a, b, c};
  return all_integer(v) ? orient2d_exact(a, b, c) : orient2d_filtered(a, b, c);
}

int incircle_sign(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                  const Eigen::Vector2d& d) {
  std::vector<Eigen::Vector2d> v{a, b, c, d};
  return all_integer(v) ? incircle_exact(a, b, c, d) : incircle_filtered(a, b, c, d);
}

Triangulation2D triangulate(const std::vector<Eigen::Vector2d>& points) {
  if (points.size() < 3)
    throw DegenerateInput("triangulation needs at least 3 points, got " +
                          std::to_string(points.size()));
  Builder builder(points);
  Triangulation2D out = builder.run();
  if (out.triangles.empty()) throw DegenerateInput("input points are collinear");
  return out;
}

}  // namespace msplat
