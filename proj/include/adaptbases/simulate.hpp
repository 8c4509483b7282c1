#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <random>
#include <variant>

#include "adaptbases/common.hpp"
#include "adaptbases/covariance.hpp"
#include "adaptbases/dataset.hpp"

namespace adaptbases {

struct SimulationRecipe {
  int n_fit = 5000;
  int n_validate = 1000;
  std::variant<CovarianceSpec, NonstationarySpec> field = NonstationarySpec(default_nonstationary_spec());
  Family family = Family::Poisson;
  Eigen::VectorXd beta_true = (Eigen::VectorXd(2) << 1.0, 1.0).finished();
  double covariate_lo = -0.5;
  double covariate_hi = 0.5;
  Rect domain{0.0, 0.0, 5.0, 5.0};
  std::uint64_t seed = 1;

  void check() const {
    if (n_fit < 1 || n_validate < 1)
      throw validation_error("InvalidRecipe", "n_fit and n_validate must be >= 1");
    if (!(covariate_lo < covariate_hi))
      throw validation_error("InvalidRecipe", "degenerate covariate range");
  }
};

struct LatentTruth {
  std::vector<Location> locations;  // fit locations then validation locations
  Eigen::VectorXd eta;
  Eigen::VectorXd w;
};

// Draw from N(0, cov) through the lower-triangular Cholesky factor.
inline Eigen::VectorXd sample_gp_realization(const Eigen::MatrixXd& cov, Rng& rng) {
  const int n = static_cast<int>(cov.rows());
  if (cov.isZero(0.0)) return Eigen::VectorXd::Zero(n);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw Error("FactorizationFailure", "covariance matrix is not positive definite");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = gauss(rng);
  return llt.matrixL() * z;
}

inline Eigen::VectorXd sample_gp_realization(const std::vector<Location>&,
                                             const Eigen::MatrixXd& cov,
                                             std::uint64_t seed) {
  Rng rng = make_rng(seed, 0);
  return sample_gp_realization(cov, rng);
}

struct SynthesizedData {
  SpatialDataset fit;
  SpatialDataset validate;
  LatentTruth truth;
};

// Generates the full simulation-study dataset: uniform locations, uniform
// covariates, a GP draw W from the requested field, eta = X beta + W, and
// Poisson (log link) or Bernoulli (logit link) responses.
inline SynthesizedData synthesize_dataset(const SimulationRecipe& recipe) {
  recipe.check();
  const int n = recipe.n_fit + recipe.n_validate;
  const int p = static_cast<int>(recipe.beta_true.size());
  Rng rng = make_rng(recipe.seed, 0);

  std::uniform_real_distribution<double> ux(recipe.domain.xmin, recipe.domain.xmax);
  std::uniform_real_distribution<double> uy(recipe.domain.ymin, recipe.domain.ymax);
  std::vector<Location> locs(n);
  for (auto& s : locs) {
    s.x = ux(rng);
    s.y = uy(rng);
  }

  std::uniform_real_distribution<double> uc(recipe.covariate_lo, recipe.covariate_hi);
  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = uc(rng);

  Eigen::MatrixXd cov;
  if (std::holds_alternative<CovarianceSpec>(recipe.field)) {
    cov = covariance_matrix(locs, std::get<CovarianceSpec>(recipe.field));
  } else {
    cov = nonstationary_covariance_matrix(locs, std::get<NonstationarySpec>(recipe.field));
  }
  Eigen::VectorXd w = sample_gp_realization(cov, rng);
  Eigen::VectorXd eta = X * recipe.beta_true + w;

  Eigen::VectorXd z(n);
  if (recipe.family == Family::Poisson) {
    for (int i = 0; i < n; ++i) {
      std::poisson_distribution<long> pois(std::exp(eta[i]));
      z[i] = static_cast<double>(pois(rng));
    }
  } else {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      const double prob = 1.0 / (1.0 + std::exp(-eta[i]));
      z[i] = u01(rng) < prob ? 1.0 : 0.0;
    }
  }

  SynthesizedData out;
  auto slice = [&](int lo, int count) {
    SpatialDataset d;
    d.locations.assign(locs.begin() + lo, locs.begin() + lo + count);
    d.responses = z.segment(lo, count);
    d.covariates = X.middleRows(lo, count);
    d.family = recipe.family;
    d.domain_bounds = recipe.domain;
    return d;
  };
  out.fit = slice(0, recipe.n_fit);
  out.validate = slice(recipe.n_fit, recipe.n_validate);
  out.truth.locations = locs;
  out.truth.eta = eta;
  out.truth.w = w;
  return out;
}

inline void write_truth_csv(const std::string& path, const LatentTruth& truth) {
  std::ofstream f(path);
  if (!f) throw validation_error("IoError", "cannot open " + path + " for writing");
  f << "x,y,eta,w\n";
  for (size_t i = 0; i < truth.locations.size(); ++i)
    f << fmt_g17(truth.locations[i].x) << ',' << fmt_g17(truth.locations[i].y) << ','
      << fmt_g17(truth.eta[static_cast<int>(i)]) << ','
      << fmt_g17(truth.w[static_cast<int>(i)]) << "\n";
}

}  // namespace adaptbases
