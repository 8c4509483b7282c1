#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "adaptbases/common.hpp"

namespace adaptbases {

// exp(-eps * ||s - u||^2); eps = 0 gives the flat limit 1.
inline double gaussian_rbf(const Location& s, const Location& u, double eps) {
  return std::exp(-eps * sq_dist(s, u));
}

// Compactly supported bisquare: {1 - (||s-u||/gamma)^2}^2 inside radius
// gamma, exactly 0 at and beyond it.
inline double bisquare(const Location& s, const Location& u, double gamma) {
  const double d = dist(s, u);
  if (d >= gamma) return 0.0;
  const double t = 1.0 - (d / gamma) * (d / gamma);
  return t * t;
}

struct CandidateKnotGrid {
  int partition = 0;
  std::vector<Location> knots;
  int count() const { return static_cast<int>(knots.size()); }
};

// ceil(sqrt(R)) x ceil(sqrt(R)) equidistant grid over the partition's
// bounding box, keeping only grid points whose nearest observation belongs
// to the partition.
inline CandidateKnotGrid candidate_knot_grid(const std::vector<Location>& all_locs,
                                             const std::vector<int>& labels, int partition,
                                             int target_R) {
  if (target_R < 1) throw validation_error("InvalidPriorBounds", "target R must be >= 1");
  std::vector<const Location*> mine;
  for (size_t i = 0; i < all_locs.size(); ++i)
    if (labels[i] == partition) mine.push_back(&all_locs[i]);
  if (mine.empty())
    throw Error("EmptyPartition", "partition " + std::to_string(partition) + " has no observations");

  double xmin = mine[0]->x, xmax = mine[0]->x, ymin = mine[0]->y, ymax = mine[0]->y;
  for (const auto* s : mine) {
    xmin = std::min(xmin, s->x);
    xmax = std::max(xmax, s->x);
    ymin = std::min(ymin, s->y);
    ymax = std::max(ymax, s->y);
  }
  const int m = static_cast<int>(std::ceil(std::sqrt(double(target_R))));
  CandidateKnotGrid grid;
  grid.partition = partition;
  for (int iy = 0; iy < m; ++iy) {
    for (int ix = 0; ix < m; ++ix) {
      Location u;
      u.x = m == 1 ? 0.5 * (xmin + xmax) : xmin + ix * (xmax - xmin) / (m - 1);
      u.y = m == 1 ? 0.5 * (ymin + ymax) : ymin + iy * (ymax - ymin) / (m - 1);
      // membership filter: nearest observation must lie in this partition
      double bestd = std::numeric_limits<double>::infinity();
      int best_label = partition;
      for (size_t i = 0; i < all_locs.size(); ++i) {
        const double d = sq_dist(u, all_locs[i]);
        if (d < bestd) {
          bestd = d;
          best_label = labels[i];
        }
      }
      if (best_label == partition) grid.knots.push_back(u);
    }
  }
  if (grid.knots.empty())
    throw Error("EmptyPartition",
                "no candidate knots retained for partition " + std::to_string(partition));
  return grid;
}

// N_k x r_k adaptive Gaussian RBF matrix; column order follows knot
// insertion order, r = 0 yields a 0-column matrix.
inline Eigen::MatrixXd adaptive_basis_matrix(const std::vector<Location>& locs,
                                             const std::vector<Location>& active_knots,
                                             double eps) {
  const int n = static_cast<int>(locs.size());
  const int r = static_cast<int>(active_knots.size());
  Eigen::MatrixXd phi(n, r);
  for (int m = 0; m < r; ++m)
    for (int i = 0; i < n; ++i) phi(i, m) = gaussian_rbf(locs[i], active_knots[m], eps);
  return phi;
}

struct BisquareLayerSpec {
  int resolution = 0;           // layer index
  std::vector<Location> knots;  // grid over the full domain
  double gamma = 1.0;           // 1.5 x minimum inter-knot distance
};

// Quad-tree layers: per-side counts 2/4/8 give knot totals 4/16/64 (G = 84).
inline std::vector<BisquareLayerSpec> default_bisquare_layers(
    const Rect& domain, const std::vector<int>& layer_counts = {4, 16, 64}) {
  std::vector<BisquareLayerSpec> layers;
  int res = 0;
  for (int count : layer_counts) {
    const int m = static_cast<int>(std::lround(std::sqrt(double(count))));
    if (m * m != count)
      throw validation_error("InvalidPriorBounds", "bisquare layer count must be a square");
    BisquareLayerSpec layer;
    layer.resolution = res++;
    const double dx = domain.width() / m, dy = domain.height() / m;
    for (int iy = 0; iy < m; ++iy)
      for (int ix = 0; ix < m; ++ix)
        layer.knots.push_back({domain.xmin + (ix + 0.5) * dx, domain.ymin + (iy + 0.5) * dy});
    layer.gamma = 1.5 * std::min(dx, dy);
    if (m == 1) layer.gamma = 1.5 * std::max(domain.width(), domain.height());
    layers.push_back(std::move(layer));
  }
  return layers;
}

// N x G matrix of bisquare functions, columns layer-major (coarsest first).
inline Eigen::MatrixXd global_basis_matrix(const std::vector<Location>& locs,
                                           const std::vector<BisquareLayerSpec>& layers) {
  if (layers.empty()) throw validation_error("InvalidPriorBounds", "no bisquare layers");
  const int n = static_cast<int>(locs.size());
  int G = 0;
  for (const auto& l : layers) G += static_cast<int>(l.knots.size());
  Eigen::MatrixXd H(n, G);
  int col = 0;
  for (const auto& layer : layers) {
    for (const auto& u : layer.knots) {
      for (int i = 0; i < n; ++i) H(i, col) = bisquare(locs[i], u, layer.gamma);
      ++col;
    }
  }
  return H;
}

}  // namespace adaptbases
