#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <fstream>
#include <optional>
#include <vector>

#include "adaptbases/basis.hpp"
#include "adaptbases/cluster.hpp"
#include "adaptbases/common.hpp"
#include "adaptbases/dataset.hpp"
#include "adaptbases/draws_io.hpp"

namespace adaptbases {

struct PredictiveSummary {
  std::vector<Location> locations;
  Eigen::VectorXd eta_mean;
  Eigen::VectorXd eta_sd;
  Eigen::VectorXd resp_mean;  // e^eta (Poisson) or logistic(eta) (Bernoulli)
  Eigen::VectorXd resp_sd;
  std::optional<Eigen::VectorXd> eta_lo;  // interval bounds on eta when requested
  std::optional<Eigen::VectorXd> eta_hi;
  double interval_level = 0.0;
};

// New locations inherit the label of the nearest labeled lattice point,
// the same rule used for the training observations.
inline std::vector<int> assign_new_locations(const std::vector<Location>& locs,
                                             const PartitionAssignment& pa) {
  std::vector<int> labels(locs.size());
  for (size_t i = 0; i < locs.size(); ++i) {
    int best = 0;
    double bestd = std::numeric_limits<double>::infinity();
    for (size_t l = 0; l < pa.lattice.size(); ++l) {
      const double d = sq_dist(locs[i], pa.lattice[l]);
      if (d < bestd) {
        bestd = d;
        best = static_cast<int>(l);
      }
    }
    labels[i] = pa.lattice_labels[best];
  }
  return labels;
}

inline double response_mean(Family fam, double eta) {
  return fam == Family::Poisson ? std::exp(eta) : 1.0 / (1.0 + std::exp(-eta));
}

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  const size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = q * double(n - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, n - 1);
  const double w = pos - double(lo);
  return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

}  // namespace detail

inline double eta_at(const PredictionDraw& d, const Location& s,
                     const Eigen::VectorXd& covariates, int label,
                     const std::vector<BisquareLayerSpec>& layers) {
  const int k = label - 1;
  double eta = 0.0;
  if (covariates.size() > 0) eta += d.beta[k].dot(covariates);
  for (size_t m = 0; m < d.knot_locs[k].size(); ++m)
    eta += d.delta[k][static_cast<int>(m)] * gaussian_rbf(s, d.knot_locs[k][m], d.epsilon[k]);
  int col = 0;
  for (const auto& layer : layers)
    for (const auto& u : layer.knots) eta += d.gamma[col++] * bisquare(s, u, layer.gamma);
  return eta;
}

// Evaluates eta(s*) under every retained draw and summarizes across draws.
// Covariates may have 0 columns; interval_level in (0,1) requests empirical
// predictive interval bounds on eta.
inline PredictiveSummary posterior_predict(const std::vector<PredictionDraw>& draws,
                                           const std::vector<Location>& new_locs,
                                           const Eigen::MatrixXd& covariates,
                                           const std::vector<int>& labels,
                                           const std::vector<BisquareLayerSpec>& layers,
                                           Family family, double interval_level = 0.0) {
  if (draws.empty()) throw Error("EmptyDraws", "no posterior draws");
  const int n = static_cast<int>(new_locs.size());
  if (labels.size() != new_locs.size())
    throw Error("DimensionMismatch", "labels do not match prediction locations");
  const int P = static_cast<int>(draws[0].beta.empty() ? 0 : draws[0].beta[0].size());
  if (P > 0 && (covariates.rows() != n || covariates.cols() != P))
    throw Error("MissingCovariates", "model has covariates but none were supplied");

  PredictiveSummary out;
  out.locations = new_locs;
  out.eta_mean.resize(n);
  out.eta_sd.resize(n);
  out.resp_mean.resize(n);
  out.resp_sd.resize(n);
  const bool want_interval = interval_level > 0.0 && interval_level < 1.0;
  if (want_interval) {
    out.eta_lo = Eigen::VectorXd(n);
    out.eta_hi = Eigen::VectorXd(n);
    out.interval_level = interval_level;
  }

  const size_t D = draws.size();
  std::vector<double> etas(D), resps(D);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x = P > 0 ? Eigen::VectorXd(covariates.row(i)) : Eigen::VectorXd();
    for (size_t d = 0; d < D; ++d) {
      etas[d] = eta_at(draws[d], new_locs[i], x, labels[i], layers);
      resps[d] = response_mean(family, etas[d]);
    }
    double em = 0.0, rm = 0.0;
    for (size_t d = 0; d < D; ++d) {
      em += etas[d];
      rm += resps[d];
    }
    em /= double(D);
    rm /= double(D);
    double ev = 0.0, rv = 0.0;
    for (size_t d = 0; d < D; ++d) {
      ev += (etas[d] - em) * (etas[d] - em);
      rv += (resps[d] - rm) * (resps[d] - rm);
    }
    const double denom = D > 1 ? double(D - 1) : 1.0;
    out.eta_mean[i] = em;
    out.eta_sd[i] = std::sqrt(ev / denom);
    out.resp_mean[i] = rm;
    out.resp_sd[i] = std::sqrt(rv / denom);
    if (want_interval) {
      std::vector<double> sorted = etas;
      std::sort(sorted.begin(), sorted.end());
      const double a = 0.5 * (1.0 - interval_level);
      (*out.eta_lo)[i] = detail::quantile_sorted(sorted, a);
      (*out.eta_hi)[i] = detail::quantile_sorted(sorted, 1.0 - a);
    }
  }
  return out;
}

struct GridSpec {
  Rect domain;
  int nx = 50;
  int ny = 50;
};

struct SurfaceSummary {
  std::vector<Location> grid;
  PredictiveSummary summary;
};

// posterior_predict on a rectangular grid of cell centers; covariates are
// zero on the grid (the surface shows the spatial random-effect structure).
inline SurfaceSummary surface_summary(const std::vector<PredictionDraw>& draws,
                                      const GridSpec& spec, const PartitionAssignment& pa,
                                      const std::vector<BisquareLayerSpec>& layers,
                                      Family family) {
  std::vector<Location> grid;
  for (int iy = 0; iy < spec.ny; ++iy)
    for (int ix = 0; ix < spec.nx; ++ix)
      grid.push_back({spec.domain.xmin + (ix + 0.5) * spec.domain.width() / spec.nx,
                      spec.domain.ymin + (iy + 0.5) * spec.domain.height() / spec.ny});
  const int P = static_cast<int>(draws[0].beta.empty() ? 0 : draws[0].beta[0].size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<int>(grid.size()), P);
  auto labels = assign_new_locations(grid, pa);
  SurfaceSummary out;
  out.grid = grid;
  out.summary = posterior_predict(draws, grid, X, labels, layers, family);
  return out;
}

inline void write_predictions_csv(const std::string& path, const PredictiveSummary& s) {
  std::ofstream f(path);
  if (!f) throw validation_error("IoError", "cannot open " + path + " for writing");
  const bool iv = s.eta_lo.has_value();
  f << "x,y,eta_mean,eta_sd,resp_mean,resp_sd";
  if (iv) f << ",lo,hi";
  f << "\n";
  for (size_t i = 0; i < s.locations.size(); ++i) {
    const int j = static_cast<int>(i);
    f << fmt_g17(s.locations[i].x) << ',' << fmt_g17(s.locations[i].y) << ','
      << fmt_g17(s.eta_mean[j]) << ',' << fmt_g17(s.eta_sd[j]) << ','
      << fmt_g17(s.resp_mean[j]) << ',' << fmt_g17(s.resp_sd[j]);
    if (iv) f << ',' << fmt_g17((*s.eta_lo)[j]) << ',' << fmt_g17((*s.eta_hi)[j]);
    f << "\n";
  }
}

// long-format x,y,value grids
inline void write_surface_csv(const std::string& path, const std::vector<Location>& grid,
                              const Eigen::VectorXd& values) {
  std::ofstream f(path);
  if (!f) throw validation_error("IoError", "cannot open " + path + " for writing");
  f << "x,y,value\n";
  for (size_t i = 0; i < grid.size(); ++i)
    f << fmt_g17(grid[i].x) << ',' << fmt_g17(grid[i].y) << ','
      << fmt_g17(values[static_cast<int>(i)]) << "\n";
}

}  // namespace adaptbases
