#pragma once

#include <Eigen/Dense>

#include "adaptbases/common.hpp"
#include "adaptbases/dataset.hpp"

namespace adaptbases {

struct GlmFit {
  Eigen::VectorXd coefficients;  // intercept first
  Eigen::VectorXd fitted;        // mean scale
  Eigen::VectorXd pearson_residuals;
  int iterations = 0;
  double deviance = 0.0;
};

namespace detail {

inline double glm_deviance(const Eigen::VectorXd& z, const Eigen::VectorXd& mu, Family fam) {
  double dev = 0.0;
  const int n = static_cast<int>(z.size());
  for (int i = 0; i < n; ++i) {
    if (fam == Family::Poisson) {
      const double t = z[i] > 0 ? z[i] * std::log(z[i] / mu[i]) : 0.0;
      dev += 2.0 * (t - (z[i] - mu[i]));
    } else {
      const double a = z[i] > 0 ? z[i] * std::log(z[i] / mu[i]) : 0.0;
      const double b = z[i] < 1 ? (1 - z[i]) * std::log((1 - z[i]) / (1 - mu[i])) : 0.0;
      dev += 2.0 * (a + b);
    }
  }
  return dev;
}

}  // namespace detail

// IRLS for the intercept-augmented nonspatial GLM; Pearson residuals feed
// the clustering pipeline. Converges on relative deviance change < 1e-8
// or 50 iterations.
inline GlmFit fit_nonspatial_glm(const SpatialDataset& data) {
  const int n = data.n();
  const int p = data.p();
  Eigen::MatrixXd X(n, p + 1);
  X.col(0).setOnes();
  if (p > 0) X.rightCols(p) = data.covariates;
  const Eigen::VectorXd& z = data.responses;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
  if (data.family == Family::Poisson) {
    const double zbar = std::max(z.mean(), 1e-8);
    beta[0] = std::log(zbar);
  } else {
    const double zbar = std::min(std::max(z.mean(), 1e-8), 1.0 - 1e-8);
    beta[0] = std::log(zbar / (1.0 - zbar));
  }

  double dev_prev = std::numeric_limits<double>::infinity();
  GlmFit fit;
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd mu(n), wt(n);
    for (int i = 0; i < n; ++i) {
      if (data.family == Family::Poisson) {
        mu[i] = std::exp(std::min(eta[i], 30.0));
        wt[i] = mu[i];
      } else {
        mu[i] = 1.0 / (1.0 + std::exp(-eta[i]));
        mu[i] = std::min(std::max(mu[i], 1e-12), 1.0 - 1e-12);
        wt[i] = mu[i] * (1.0 - mu[i]);
      }
    }
    // working response: eta + (z - mu) / wt
    Eigen::VectorXd y = eta.array() + (z - mu).array() / wt.array().max(1e-12);
    Eigen::MatrixXd Xw = wt.asDiagonal() * X;
    Eigen::MatrixXd A = X.transpose() * Xw;
    Eigen::VectorXd b = Xw.transpose() * y;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success)
      throw Error("SeparationOrDivergence", "IRLS normal equations are singular");
    beta = ldlt.solve(b);
    if (!beta.allFinite())
      throw Error("SeparationOrDivergence", "IRLS produced non-finite coefficients");

    eta = X * beta;
    for (int i = 0; i < n; ++i) {
      mu[i] = data.family == Family::Poisson
                  ? std::exp(std::min(eta[i], 30.0))
                  : std::min(std::max(1.0 / (1.0 + std::exp(-eta[i])), 1e-12), 1.0 - 1e-12);
    }
    const double dev = detail::glm_deviance(z, mu, data.family);
    fit.iterations = it + 1;
    const double denom = std::abs(dev_prev) < 1e-12 ? 1.0 : std::abs(dev_prev);
    if (std::isfinite(dev_prev) && std::abs(dev - dev_prev) / denom < 1e-8) {
      dev_prev = dev;
      fit.fitted = mu;
      break;
    }
    dev_prev = dev;
    fit.fitted = mu;
    if (it == 49)
      throw Error("SeparationOrDivergence", "IRLS failed to converge in 50 iterations");
  }

  fit.coefficients = beta;
  fit.deviance = dev_prev;
  fit.pearson_residuals.resize(n);
  for (int i = 0; i < n; ++i) {
    const double mu = fit.fitted[i];
    const double var = data.family == Family::Poisson ? mu : mu * (1.0 - mu);
    fit.pearson_residuals[i] = (z[i] - mu) / std::sqrt(std::max(var, 1e-12));
  }
  return fit;
}

}  // namespace adaptbases
