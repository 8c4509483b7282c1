#pragma once

#include <algorithm>
#include <array>
#include <set>
#include <vector>

#include "adaptbases/common.hpp"

namespace adaptbases {

struct NeighborGraph {
  std::vector<Location> nodes;
  std::set<std::pair<int, int>> edges;  // i < j

  bool has_edge(int i, int j) const {
    if (i > j) std::swap(i, j);
    return edges.count({i, j}) > 0;
  }
};

namespace detail {

struct Tri {
  std::array<int, 3> v;
  bool alive = true;
};

// Incircle test in extended precision; positive when p lies strictly inside
// the circumcircle of (a, b, c) taken counterclockwise.
inline long double incircle(const Location& a, const Location& b, const Location& c,
                            const Location& p) {
  const long double ax = (long double)a.x - p.x, ay = (long double)a.y - p.y;
  const long double bx = (long double)b.x - p.x, by = (long double)b.y - p.y;
  const long double cx = (long double)c.x - p.x, cy = (long double)c.y - p.y;
  const long double a2 = ax * ax + ay * ay;
  const long double b2 = bx * bx + by * by;
  const long double c2 = cx * cx + cy * cy;
  return ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx);
}

inline long double orient(const Location& a, const Location& b, const Location& c) {
  return ((long double)b.x - a.x) * ((long double)c.y - a.y) -
         ((long double)b.y - a.y) * ((long double)c.x - a.x);
}

}  // namespace detail

// Delaunay adjacency by Bowyer-Watson insertion. Co-circular degeneracies
// (e.g. regular lattices) are resolved by a deterministic index-ordered
// perturbation of the working coordinates; reported nodes keep the
// original coordinates.
inline NeighborGraph voronoi_neighbors(const std::vector<Location>& locs) {
  const int n = static_cast<int>(locs.size());
  if (n < 2) throw Error("DegenerateInput", "need at least 2 locations");

  NeighborGraph g;
  g.nodes = locs;

  bool all_coincident = true;
  for (int i = 1; i < n; ++i)
    if (locs[i].x != locs[0].x || locs[i].y != locs[0].y) all_coincident = false;
  if (all_coincident) throw Error("DegenerateInput", "all locations coincide");

  if (n == 2) {
    g.edges.insert({0, 1});
    return g;
  }

  double xmin = locs[0].x, xmax = locs[0].x, ymin = locs[0].y, ymax = locs[0].y;
  for (const auto& s : locs) {
    xmin = std::min(xmin, s.x);
    xmax = std::max(xmax, s.x);
    ymin = std::min(ymin, s.y);
    ymax = std::max(ymax, s.y);
  }
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-12});

  // index-ordered symbolic perturbation
  std::vector<Location> pts(n + 3);
  for (int i = 0; i < n; ++i) {
    std::uint64_t h = static_cast<std::uint64_t>(i);
    const std::uint64_t h1 = splitmix64(h);
    const std::uint64_t h2 = splitmix64(h);
    const double jx = (double(h1 % 2000003) / 2000003.0 - 0.5) * 2e-9 * span;
    const double jy = (double(h2 % 2000003) / 2000003.0 - 0.5) * 2e-9 * span;
    pts[i] = {locs[i].x + jx, locs[i].y + jy};
  }
  const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
  const double R = 64.0 * span + 1.0;
  pts[n] = {cx - 2.0 * R, cy - R};
  pts[n + 1] = {cx + 2.0 * R, cy - R};
  pts[n + 2] = {cx, cy + 2.0 * R};

  std::vector<detail::Tri> tris;
  tris.push_back({{n, n + 1, n + 2}, true});

  auto ccw = [&](std::array<int, 3>& t) {
    if (detail::orient(pts[t[0]], pts[t[1]], pts[t[2]]) < 0) std::swap(t[1], t[2]);
  };

  for (int i = 0; i < n; ++i) {
    std::vector<int> bad;
    for (int t = 0; t < static_cast<int>(tris.size()); ++t) {
      if (!tris[t].alive) continue;
      const auto& v = tris[t].v;
      if (detail::incircle(pts[v[0]], pts[v[1]], pts[v[2]], pts[i]) > 0) bad.push_back(t);
    }
    // boundary of the cavity: edges appearing in exactly one bad triangle
    std::vector<std::pair<int, int>> boundary;
    auto count_edge = [&](int a, int b) {
      int c = 0;
      for (int t : bad) {
        const auto& v = tris[t].v;
        for (int e = 0; e < 3; ++e) {
          const int ea = v[e], eb = v[(e + 1) % 3];
          if ((ea == a && eb == b) || (ea == b && eb == a)) ++c;
        }
      }
      return c;
    };
    for (int t : bad) {
      const auto& v = tris[t].v;
      for (int e = 0; e < 3; ++e) {
        const int a = v[e], b = v[(e + 1) % 3];
        if (count_edge(a, b) == 1) boundary.push_back({a, b});
      }
      tris[t].alive = false;
    }
    for (const auto& [a, b] : boundary) {
      std::array<int, 3> t = {a, b, i};
      ccw(t);
      tris.push_back({t, true});
    }
  }

  for (const auto& t : tris) {
    if (!t.alive) continue;
    const auto& v = t.v;
    if (v[0] >= n || v[1] >= n || v[2] >= n) continue;
    for (int e = 0; e < 3; ++e) {
      int a = v[e], b = v[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      g.edges.insert({a, b});
    }
  }
  return g;
}

}  // namespace adaptbases
