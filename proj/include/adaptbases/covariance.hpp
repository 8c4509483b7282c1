#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "adaptbases/common.hpp"

namespace adaptbases {

enum class CovFamily { Matern, Exponential };

struct CovarianceSpec {
  CovFamily family = CovFamily::Exponential;
  double nu = 0.5;       // smoothness
  double range = 1.0;    // phi / rho
  double sill = 1.0;     // sigma^2
  double nugget = 1e-8;  // diagonal jitter, relative to sill

  void check() const {
    if (nu <= 0 || range <= 0 || sill <= 0 || nugget < 0)
      throw validation_error("NonPositiveParameter", "covariance parameters must be > 0");
  }
};

// Matern correlation under the sqrt(2 nu) parameterization:
//   M_nu(d) = 2^{1-nu}/Gamma(nu) * (sqrt(2 nu) d/rho)^nu * K_nu(sqrt(2 nu) d/rho)
// Reduces to exp(-d/rho) at nu = 1/2.
inline double matern_correlation(double d, double nu, double range) {
  if (nu <= 0 || range <= 0)
    throw validation_error("NonPositiveParameter", "matern requires nu > 0, range > 0");
  if (d < 0) throw validation_error("NonPositiveParameter", "distance must be >= 0");
  if (d == 0.0) return 1.0;
  const double a = std::sqrt(2.0 * nu) * d / range;
  if (nu == 0.5) return std::exp(-a);
  const double lg = std::lgamma(nu);
  const double val =
      std::exp((1.0 - nu) * std::log(2.0) - lg + nu * std::log(a)) * std::cyl_bessel_k(nu, a);
  // clamp tiny negative round-off at large lags
  return std::min(1.0, std::max(0.0, val));
}

inline double covariance_value(double d, const CovarianceSpec& spec) {
  spec.check();
  if (spec.family == CovFamily::Exponential) return spec.sill * std::exp(-d / spec.range);
  return spec.sill * matern_correlation(d, spec.nu, spec.range);
}

inline Eigen::MatrixXd covariance_matrix(const std::vector<Location>& locs,
                                         const CovarianceSpec& spec) {
  spec.check();
  if (locs.empty()) throw validation_error("EmptyDataset", "no locations");
  const int n = static_cast<int>(locs.size());
  Eigen::MatrixXd K(n, n);
  for (int i = 0; i < n; ++i) {
    K(i, i) = spec.sill + spec.nugget;
    for (int j = 0; j < i; ++j) {
      const double v = covariance_value(dist(locs[i], locs[j]), spec);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

struct NonstationarySpec {
  std::vector<CovarianceSpec> subregion_specs;
  std::vector<Location> centers;
  double eta = 6.0;  // kernel smoothing parameter

  void check() const {
    if (subregion_specs.empty() || subregion_specs.size() != centers.size())
      throw validation_error("SpecMismatch", "centers/specs lengths differ or empty");
    if (eta <= 0) throw validation_error("NonPositiveParameter", "eta must be > 0");
    for (const auto& s : subregion_specs) s.check();
  }
};

// Four-subregion setup: Matern nu=0.5, sill 1, ranges (0.5, 0.4, 0.3, 0.2),
// centers at the quadrant midpoints of the domain, eta = 6. The default
// domain [0,5]^2 puts the centers at (1.25,1.25), (3.75,3.75), (1.25,3.75),
// (3.75,1.25).
inline NonstationarySpec default_nonstationary_spec(const Rect& domain = {0, 0, 5, 5},
                                                    double eta = 6.0) {
  NonstationarySpec spec;
  const double ranges[4] = {0.5, 0.4, 0.3, 0.2};
  const double qx = domain.width() / 4.0, qy = domain.height() / 4.0;
  const Location centers[4] = {{domain.xmin + qx, domain.ymin + qy},
                               {domain.xmax - qx, domain.ymax - qy},
                               {domain.xmin + qx, domain.ymax - qy},
                               {domain.xmax - qx, domain.ymin + qy}};
  for (int i = 0; i < 4; ++i) {
    CovarianceSpec c;
    c.family = CovFamily::Matern;
    c.nu = 0.5;
    c.range = ranges[i];
    c.sill = 1.0;
    c.nugget = 0.0;
    spec.subregion_specs.push_back(c);
    spec.centers.push_back(centers[i]);
  }
  spec.eta = eta;
  return spec;
}

// lambda_i(s) = kappa_eta(s - mu_i) / sum_j kappa_eta(s - mu_j),
// kappa_eta(t) = exp(-||t||^2 / eta).
inline std::vector<double> nonstationary_weights(const Location& s,
                                                 const NonstationarySpec& spec) {
  spec.check();
  const size_t m = spec.centers.size();
  std::vector<double> w(m);
  double total = 0.0;
  for (size_t i = 0; i < m; ++i) {
    w[i] = std::exp(-sq_dist(s, spec.centers[i]) / spec.eta);
    total += w[i];
  }
  for (double& wi : w) wi /= total;
  return w;
}

// C(s,t) = sum_i lambda_i(s) lambda_i(t) C_i(s,t); follows the formula
// literally, so the marginal variance C(s,s) = sum_i lambda_i(s)^2 sigma^2
// varies over space.
inline Eigen::MatrixXd nonstationary_covariance_matrix(const std::vector<Location>& locs,
                                                       const NonstationarySpec& spec,
                                                       double nugget = 1e-8) {
  spec.check();
  const int n = static_cast<int>(locs.size());
  const size_t m = spec.centers.size();
  std::vector<std::vector<double>> w(n);
  for (int i = 0; i < n; ++i) w[i] = nonstationary_weights(locs[i], spec);
  Eigen::MatrixXd K(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double d = dist(locs[i], locs[j]);
      double v = 0.0;
      for (size_t c = 0; c < m; ++c)
        v += w[i][c] * w[j][c] * covariance_value(d, spec.subregion_specs[c]);
      K(i, j) = v;
      K(j, i) = v;
    }
    K(i, i) += nugget;
  }
  return K;
}

}  // namespace adaptbases
