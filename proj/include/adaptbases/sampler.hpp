#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>
#include <vector>

#include "adaptbases/basis.hpp"
#include "adaptbases/cluster.hpp"
#include "adaptbases/common.hpp"
#include "adaptbases/config.hpp"
#include "adaptbases/dataset.hpp"
#include "adaptbases/glm.hpp"
#include "adaptbases/state.hpp"

namespace adaptbases {

// log f(z | eta) without the data-only constant (log z! for Poisson).
inline double loglik_core(Family fam, double z, double eta) {
  if (fam == Family::Poisson) return z * eta - std::exp(eta);
  // Bernoulli with logit link; softplus computed overflow-safe
  const double softplus = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
  return z * eta - softplus;
}

inline double log_likelihood(const SpatialDataset& data, const Eigen::VectorXd& eta) {
  if (eta.size() != data.n())
    throw Error("FamilyMismatch", "linear predictor length does not match data");
  double ll = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    ll += loglik_core(data.family, data.responses[i], eta[i]);
    if (data.family == Family::Poisson) ll -= std::lgamma(data.responses[i] + 1.0);
  }
  return ll;
}

struct MoveProbabilities {
  double birth = 0.0, death = 0.0, move = 0.0;
};

// b_0 = 1 and d_R = 1 at the boundaries, 1/3 each otherwise.
inline MoveProbabilities move_probabilities(int r, int R) {
  if (R <= 0) return {};
  if (r == 0) return {1.0, 0.0, 0.0};
  if (r == R) return {0.0, 1.0, 0.0};
  return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
}

// log p(r_new) - log p(r) under the truncated Poisson(lambda) on {0..R};
// the truncation constant cancels.
inline double truncated_poisson_log_prior_ratio(int r, int r_new, double lambda, int R) {
  if (r < 0 || r > R || r_new < 0 || r_new > R)
    throw Error("OutOfRange", "knot count outside {0..R}");
  return (r_new - r) * std::log(lambda) + std::lgamma(r + 1.0) - std::lgamma(r_new + 1.0);
}

inline double log_normal_pdf(double x, double variance) {
  return -0.5 * std::log(2.0 * M_PI * variance) - x * x / (2.0 * variance);
}

enum class MoveType { Birth, Death, Move };

struct KnotProposal {
  MoveType move = MoveType::Birth;
  int k = 0;               // partition (0-based)
  int add_index = -1;      // candidate-grid index to activate (Birth/Move)
  int remove_pos = -1;     // position in the active list to delete (Death/Move)
  double delta_star = 0.0; // proposed coefficient (Birth/Move)
};

struct AcceptStats {
  long attempts = 0;
  long accepts = 0;
  double rate() const { return attempts ? double(accepts) / double(attempts) : 0.0; }
  void merge(const AcceptStats& o) {
    attempts += o.attempts;
    accepts += o.accepts;
  }
};

struct ChainStats {
  AcceptStats beta, epsilon, delta, gamma, birth, death, move;
  void merge(const ChainStats& o) {
    beta.merge(o.beta);
    epsilon.merge(o.epsilon);
    delta.merge(o.delta);
    gamma.merge(o.gamma);
    birth.merge(o.birth);
    death.merge(o.death);
    move.merge(o.move);
  }
};

struct PosteriorDraws {
  std::vector<ModelState> snapshots;
  std::vector<double> loglik_trace;            // one per iteration
  std::vector<std::vector<int>> r_trace;       // iteration x K
  std::vector<std::vector<double>> eps_trace;  // iteration x K
  std::vector<std::vector<double>> tau2_trace; // iteration x K
  ChainStats stats;
  std::uint64_t seed = 0;
  std::uint64_t config_fingerprint = 0;
};

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// IG(a, b) posterior draw for a coefficient variance given its coefficients:
// IG(a + n/2, b + ||coeffs||^2 / 2).
inline double gibbs_update_variance(const Eigen::VectorXd& coeffs, double prior_shape,
                                    double prior_scale, Rng& rng) {
  if (prior_shape <= 0 || prior_scale <= 0)
    throw validation_error("InvalidPriorBounds", "IG prior needs shape, scale > 0");
  const double a = prior_shape + 0.5 * double(coeffs.size());
  const double b = prior_scale + 0.5 * coeffs.squaredNorm();
  std::gamma_distribution<double> g(a, 1.0 / b);
  double precision = g(rng);
  while (precision <= 0.0) precision = g(rng);
  return 1.0 / precision;
}

// RJMCMC engine for the partitioned adaptive-basis model. Holds the
// immutable fit context; run() executes the chain.
class Sampler {
 public:
  Sampler(const SpatialDataset& data, const PartitionAssignment& pa, const ModelConfig& cfg)
      : data_(&data), cfg_(cfg) {
    validate_config(cfg, data);
    if (static_cast<int>(pa.labels.size()) != data.n())
      throw validation_error("LengthMismatch", "partition labels do not match dataset");
    labels_ = pa.labels;
    K_ = 0;
    for (int l : labels_) K_ = std::max(K_, l);
    if (K_ < 1) throw validation_error("PartitionCountExceedsData", "no partitions present");
    N_ = data.n();
    P_ = data.p();

    rows_.resize(K_);
    for (int i = 0; i < N_; ++i) rows_[labels_[i] - 1].push_back(i);
    plocs_.resize(K_);
    pz_.resize(K_);
    pX_.resize(K_);
    for (int k = 0; k < K_; ++k) {
      const auto& rk = rows_[k];
      plocs_[k].reserve(rk.size());
      pz_[k].resize(rk.size());
      pX_[k].resize(rk.size(), P_);
      for (size_t i = 0; i < rk.size(); ++i) {
        plocs_[k].push_back(data.locations[rk[i]]);
        pz_[k][static_cast<int>(i)] = data.responses[rk[i]];
        if (P_ > 0) pX_[k].row(static_cast<int>(i)) = data.covariates.row(rk[i]);
      }
    }

    layers_ = default_bisquare_layers(data.domain_bounds, cfg.global_basis_resolutions);
    G_ = 0;
    for (const auto& l : layers_) G_ += static_cast<int>(l.knots.size());
    pH_.resize(K_);
    for (int k = 0; k < K_; ++k) pH_[k] = global_basis_matrix(plocs_[k], layers_);

    // per-column support of H for single-site gamma updates
    gsupport_.resize(G_);
    for (int k = 0; k < K_; ++k)
      for (int j = 0; j < G_; ++j)
        for (int i = 0; i < pH_[k].rows(); ++i)
          if (pH_[k](i, j) != 0.0) gsupport_[j].push_back({k, i, pH_[k](i, j)});

    grids_.resize(K_);
    for (int k = 0; k < K_; ++k) {
      // partitions can lose every candidate to the membership filter only if
      // empty, which rows_ construction precludes
      grids_[k] = candidate_knot_grid(data.locations, labels_, k + 1,
                                      cfg.candidate_grid_per_partition);
    }
  }

  int n_partitions() const { return K_; }
  int n_global_basis() const { return G_; }
  const std::vector<CandidateKnotGrid>& grids() const { return grids_; }
  const std::vector<BisquareLayerSpec>& layers() const { return layers_; }
  const std::vector<int>& labels() const { return labels_; }
  const ModelConfig& config() const { return cfg_; }

  // beta from the nonspatial GLM fit, epsilon at the prior midpoint, empty
  // knot sets, unit variances, gamma = 0.
  ModelState initial_state() const {
    ModelState st;
    Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(P_);
    if (P_ > 0) {
      GlmFit fit = fit_nonspatial_glm(*data_);
      beta0 = fit.coefficients.tail(P_);
    }
    st.parts.resize(K_);
    for (auto& p : st.parts) {
      p.beta = beta0;
      p.epsilon = 0.5 * (cfg_.epsilon_alpha + cfg_.epsilon_beta);
      p.tau2 = 1.0;
      p.delta.resize(0);
    }
    st.gamma = Eigen::VectorXd::Zero(G_);
    st.rho2 = 1.0;
    return st;
  }

  std::vector<Location> active_knot_locations(const ModelState& st, int k) const {
    std::vector<Location> out;
    for (int idx : st.parts[k].knots) out.push_back(grids_[k].knots[idx]);
    return out;
  }

  // Block-wise eta assembly over partitions; r = 0 blocks omit the adaptive
  // term. Returns eta in the original observation order.
  Eigen::VectorXd linear_predictor(const ModelState& st) const {
    check_state(st);
    Eigen::VectorXd eta(N_);
    for (int k = 0; k < K_; ++k) {
      Eigen::VectorXd ek = partition_eta(st, k);
      for (size_t i = 0; i < rows_[k].size(); ++i) eta[rows_[k][i]] = ek[static_cast<int>(i)];
    }
    return eta;
  }

  Eigen::VectorXd partition_eta(const ModelState& st, int k) const {
    const auto& p = st.parts[k];
    Eigen::VectorXd ek = pH_[k] * st.gamma;
    if (P_ > 0) ek += pX_[k] * p.beta;
    if (p.r() > 0) {
      Eigen::MatrixXd phi = adaptive_basis_matrix(plocs_[k], active_knot_locations(st, k),
                                                  p.epsilon);
      ek += phi * p.delta;
    }
    return ek;
  }

  double partition_loglik_core(const ModelState& st, int k) const {
    const Eigen::VectorXd ek = partition_eta(st, k);
    double ll = 0.0;
    for (int i = 0; i < ek.size(); ++i) ll += loglik_core(data_->family, pz_[k][i], ek[i]);
    return ll;
  }

  KnotProposal propose_knot_move(const ModelState& st, int k, Rng& rng) const {
    const auto& p = st.parts[k];
    const int r = p.r();
    const int R = grids_[k].count();
    const MoveProbabilities mp = move_probabilities(r, R);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double u = u01(rng);
    KnotProposal prop;
    prop.k = k;
    if (u < mp.birth) {
      prop.move = MoveType::Birth;
      prop.add_index = pick_vacant(p, R, rng);
      prop.delta_star = std::normal_distribution<double>(0.0, cfg_.coeff_proposal_sd)(rng);
    } else if (u < mp.birth + mp.death) {
      prop.move = MoveType::Death;
      prop.remove_pos = std::uniform_int_distribution<int>(0, r - 1)(rng);
    } else {
      prop.move = MoveType::Move;
      prop.remove_pos = std::uniform_int_distribution<int>(0, r - 1)(rng);
      prop.add_index = pick_vacant(p, R, rng);
      prop.delta_star = std::normal_distribution<double>(0.0, cfg_.coeff_proposal_sd)(rng);
    }
    return prop;
  }

  // Full log acceptance-ratio argument log(L * A * P); the dimension-matching
  // Jacobian is identically 1. Each contribution is accumulated as a sum of
  // individual log terms so matched birth/death pairs cancel exactly.
  double knot_acceptance_log_ratio(const ModelState& st, const KnotProposal& prop) const {
    validate_proposal(st, prop);
    const auto& p = st.parts[prop.k];
    const int r = p.r();
    const int R = grids_[prop.k].count();
    const double sigma2 = cfg_.coeff_proposal_sd * cfg_.coeff_proposal_sd;

    const ModelState proposed = apply_knot_move(st, prop, true);
    const double dll =
        partition_loglik_core(proposed, prop.k) - partition_loglik_core(st, prop.k);

    double lr = dll;
    if (prop.move == MoveType::Birth) {
      const MoveProbabilities mp_fwd = move_probabilities(r, R);
      const MoveProbabilities mp_rev = move_probabilities(r + 1, R);
      lr += truncated_poisson_log_prior_ratio(r, r + 1, cfg_.lambda, R);
      lr += std::log(double(r + 1)) - std::log(double(R - r));
      lr += log_normal_pdf(prop.delta_star, p.tau2) - log_normal_pdf(0.0, p.tau2);
      lr += std::log(mp_rev.death) - std::log(mp_fwd.birth);
      lr += std::log(double(R - r)) - std::log(double(r + 1));
      lr -= log_normal_pdf(prop.delta_star, sigma2);
    } else if (prop.move == MoveType::Death) {
      const double delta_j = p.delta[prop.remove_pos];
      const MoveProbabilities mp_fwd = move_probabilities(r, R);
      const MoveProbabilities mp_rev = move_probabilities(r - 1, R);
      lr += truncated_poisson_log_prior_ratio(r, r - 1, cfg_.lambda, R);
      lr += std::log(double(R - r + 1)) - std::log(double(r));
      lr += log_normal_pdf(0.0, p.tau2) - log_normal_pdf(delta_j, p.tau2);
      lr += std::log(mp_rev.birth) - std::log(mp_fwd.death);
      lr += std::log(double(r)) - std::log(double(R - r + 1));
      lr += log_normal_pdf(delta_j, sigma2);
    } else {
      const double delta_j = p.delta[prop.remove_pos];
      lr += log_normal_pdf(prop.delta_star, p.tau2) - log_normal_pdf(delta_j, p.tau2);
      lr += log_normal_pdf(delta_j, sigma2) - log_normal_pdf(prop.delta_star, sigma2);
    }
    return lr;
  }

  // Birth appends; Death removes knot J and its coefficient; Move replaces
  // both. Rejection leaves the state untouched.
  static ModelState apply_knot_move(ModelState st, const KnotProposal& prop, bool accept) {
    if (!accept) return st;
    auto& p = st.parts[prop.k];
    if (prop.move == MoveType::Birth || prop.move == MoveType::Move) {
      if (prop.move == MoveType::Move) erase_knot(p, prop.remove_pos);
      p.knots.push_back(prop.add_index);
      Eigen::VectorXd d(p.delta.size() + 1);
      d.head(p.delta.size()) = p.delta;
      d[d.size() - 1] = prop.delta_star;
      p.delta = std::move(d);
    } else {
      erase_knot(p, prop.remove_pos);
    }
    return st;
  }

  PosteriorDraws run(int n_threads = 1) { return run_with_state(initial_state(), n_threads); }

  PosteriorDraws run_with_state(ModelState st, int n_threads = 1) {
    check_state(st);
    PosteriorDraws draws;
    draws.seed = cfg_.seed;
    draws.config_fingerprint = fnv1a64(serialize_config(cfg_));

    // chain caches
    std::vector<Eigen::MatrixXd> phi(K_);
    std::vector<Eigen::VectorXd> eta(K_);
    std::vector<double> ll(K_);
    for (int k = 0; k < K_; ++k) {
      phi[k] = adaptive_basis_matrix(plocs_[k], active_knot_locations(st, k),
                                     st.parts[k].epsilon);
      eta[k] = partition_eta(st, k);
      ll[k] = core_sum(k, eta[k]);
    }

    std::vector<Rng> prng;
    for (int k = 0; k < K_; ++k) prng.push_back(make_rng(cfg_.seed, k + 1));
    Rng grng = make_rng(cfg_.seed, 0);

    std::vector<ChainStats> pstats(K_);
    ChainStats gstats;
    std::vector<StepSizes> steps(K_, StepSizes{cfg_.beta_step, cfg_.epsilon_step,
                                               cfg_.delta_step});
    double gamma_step = cfg_.gamma_step;
    std::vector<ChainStats> tune_window(K_);
    ChainStats gtune;

    const double sigma = cfg_.coeff_proposal_sd;
    const IgPrior tau_prior = cfg_.effective_tau2();
    const IgPrior rho_prior = cfg_.effective_rho2();

    auto partition_phase_a = [&](int k) {
      auto& p = st.parts[k];
      auto& rng = prng[k];
      std::uniform_real_distribution<double> u01(0.0, 1.0);

      if (P_ > 0 && !cfg_.shared_beta) {
        Eigen::VectorXd db(P_);
        for (int j = 0; j < P_; ++j)
          db[j] = std::normal_distribution<double>(0.0, steps[k].beta)(rng);
        Eigen::VectorXd deta = pX_[k] * db;
        Eigen::VectorXd cand = eta[k] + deta;
        const double ll_new = core_sum(k, cand);
        const Eigen::VectorXd bnew = p.beta + db;
        const double lp = (p.beta.squaredNorm() - bnew.squaredNorm()) /
                          (2.0 * cfg_.beta_prior_variance);
        pstats[k].beta.attempts++;
        tune_window[k].beta.attempts++;
        if (std::log(u01(rng)) < ll_new - ll[k] + lp) {
          p.beta = bnew;
          eta[k] = std::move(cand);
          ll[k] = ll_new;
          pstats[k].beta.accepts++;
          tune_window[k].beta.accepts++;
        }
      }

      {
        const double eps_new =
            p.epsilon + std::normal_distribution<double>(0.0, steps[k].epsilon)(rng);
        pstats[k].epsilon.attempts++;
        tune_window[k].epsilon.attempts++;
        const double u = u01(rng);
        if (eps_new > cfg_.epsilon_alpha && eps_new < cfg_.epsilon_beta) {
          if (p.r() == 0) {
            // no adaptive term: likelihood unchanged, uniform prior flat
            p.epsilon = eps_new;
            pstats[k].epsilon.accepts++;
            tune_window[k].epsilon.accepts++;
          } else {
            Eigen::MatrixXd phi_new =
                adaptive_basis_matrix(plocs_[k], active_knot_locations(st, k), eps_new);
            Eigen::VectorXd cand = eta[k] + (phi_new - phi[k]) * p.delta;
            const double ll_new = core_sum(k, cand);
            if (std::log(u) < ll_new - ll[k]) {
              p.epsilon = eps_new;
              phi[k] = std::move(phi_new);
              eta[k] = std::move(cand);
              ll[k] = ll_new;
              pstats[k].epsilon.accepts++;
              tune_window[k].epsilon.accepts++;
            }
          }
        }
      }

      if (cfg_.delta_refresh) {
        for (int m = 0; m < p.r(); ++m) {
          const double d_new =
              p.delta[m] + std::normal_distribution<double>(0.0, steps[k].delta)(rng);
          Eigen::VectorXd cand = eta[k] + (d_new - p.delta[m]) * phi[k].col(m);
          const double ll_new = core_sum(k, cand);
          const double lp =
              (p.delta[m] * p.delta[m] - d_new * d_new) / (2.0 * p.tau2);
          pstats[k].delta.attempts++;
          tune_window[k].delta.attempts++;
          if (std::log(u01(rng)) < ll_new - ll[k] + lp) {
            p.delta[m] = d_new;
            eta[k] = std::move(cand);
            ll[k] = ll_new;
            pstats[k].delta.accepts++;
            tune_window[k].delta.accepts++;
          }
        }
      }
    };

    auto partition_phase_b = [&](int k) {
      auto& p = st.parts[k];
      auto& rng = prng[k];
      std::uniform_real_distribution<double> u01(0.0, 1.0);

      p.tau2 = gibbs_update_variance(p.delta, tau_prior.shape, tau_prior.scale, rng);

      const int R = grids_[k].count();
      if (!cfg_.adaptive || R == 0) return;
      KnotProposal prop = propose_knot_move(st, k, rng);
      double lr = 0.0;
      Eigen::VectorXd deta;
      const double sigma2 = sigma * sigma;
      if (prop.move == MoveType::Birth) {
        Eigen::VectorXd col = rbf_column(k, prop.add_index, p.epsilon);
        deta = prop.delta_star * col;
        Eigen::VectorXd cand = eta[k] + deta;
        const double ll_new = core_sum(k, cand);
        const int r = p.r();
        const MoveProbabilities mp_fwd = move_probabilities(r, R);
        const MoveProbabilities mp_rev = move_probabilities(r + 1, R);
        lr = ll_new - ll[k];
        lr += truncated_poisson_log_prior_ratio(r, r + 1, cfg_.lambda, R);
        lr += std::log(double(r + 1)) - std::log(double(R - r));
        lr += log_normal_pdf(prop.delta_star, p.tau2) - log_normal_pdf(0.0, p.tau2);
        lr += std::log(mp_rev.death) - std::log(mp_fwd.birth);
        lr += std::log(double(R - r)) - std::log(double(r + 1));
        lr -= log_normal_pdf(prop.delta_star, sigma2);
        pstats[k].birth.attempts++;
        if (std::log(u01(rng)) < lr) {
          p.knots.push_back(prop.add_index);
          Eigen::VectorXd d(p.delta.size() + 1);
          d.head(p.delta.size()) = p.delta;
          d[d.size() - 1] = prop.delta_star;
          p.delta = std::move(d);
          phi[k].conservativeResize(Eigen::NoChange, phi[k].cols() + 1);
          phi[k].col(phi[k].cols() - 1) = col;
          eta[k] = std::move(cand);
          ll[k] = ll_new;
          pstats[k].birth.accepts++;
        }
      } else if (prop.move == MoveType::Death) {
        const int r = p.r();
        const double delta_j = p.delta[prop.remove_pos];
        Eigen::VectorXd cand = eta[k] - delta_j * phi[k].col(prop.remove_pos);
        const double ll_new = core_sum(k, cand);
        const MoveProbabilities mp_fwd = move_probabilities(r, R);
        const MoveProbabilities mp_rev = move_probabilities(r - 1, R);
        lr = ll_new - ll[k];
        lr += truncated_poisson_log_prior_ratio(r, r - 1, cfg_.lambda, R);
        lr += std::log(double(R - r + 1)) - std::log(double(r));
        lr += log_normal_pdf(0.0, p.tau2) - log_normal_pdf(delta_j, p.tau2);
        lr += std::log(mp_rev.birth) - std::log(mp_fwd.death);
        lr += std::log(double(r)) - std::log(double(R - r + 1));
        lr += log_normal_pdf(delta_j, sigma2);
        pstats[k].death.attempts++;
        if (std::log(u01(rng)) < lr) {
          erase_knot(p, prop.remove_pos);
          remove_column(phi[k], prop.remove_pos);
          eta[k] = std::move(cand);
          ll[k] = ll_new;
          pstats[k].death.accepts++;
        }
      } else {
        const double delta_j = p.delta[prop.remove_pos];
        Eigen::VectorXd col = rbf_column(k, prop.add_index, p.epsilon);
        Eigen::VectorXd cand =
            eta[k] + prop.delta_star * col - delta_j * phi[k].col(prop.remove_pos);
        const double ll_new = core_sum(k, cand);
        lr = ll_new - ll[k];
        lr += log_normal_pdf(prop.delta_star, p.tau2) - log_normal_pdf(delta_j, p.tau2);
        lr += log_normal_pdf(delta_j, sigma2) - log_normal_pdf(prop.delta_star, sigma2);
        pstats[k].move.attempts++;
        if (std::log(u01(rng)) < lr) {
          erase_knot(p, prop.remove_pos);
          remove_column(phi[k], prop.remove_pos);
          p.knots.push_back(prop.add_index);
          Eigen::VectorXd d(p.delta.size() + 1);
          d.head(p.delta.size()) = p.delta;
          d[d.size() - 1] = prop.delta_star;
          p.delta = std::move(d);
          phi[k].conservativeResize(Eigen::NoChange, phi[k].cols() + 1);
          phi[k].col(phi[k].cols() - 1) = col;
          eta[k] = std::move(cand);
          ll[k] = ll_new;
          pstats[k].move.accepts++;
        }
      }
    };

    auto parallel_for_partitions = [&](auto&& body) {
      if (n_threads <= 1 || K_ == 1) {
        for (int k = 0; k < K_; ++k) body(k);
        return;
      }
      const int T = std::min(n_threads, K_);
      std::vector<std::thread> pool;
      for (int t = 0; t < T; ++t)
        pool.emplace_back([&, t] {
          for (int k = t; k < K_; k += T) body(k);
        });
      for (auto& th : pool) th.join();
    };

    const int B = cfg_.iterations;
    draws.loglik_trace.reserve(B);
    for (int it = 1; it <= B; ++it) {
      parallel_for_partitions(partition_phase_a);

      std::uniform_real_distribution<double> u01(0.0, 1.0);
      if (P_ > 0 && cfg_.shared_beta) {
        Eigen::VectorXd db(P_);
        for (int j = 0; j < P_; ++j)
          db[j] = std::normal_distribution<double>(0.0, steps[0].beta)(grng);
        double dll = 0.0;
        std::vector<Eigen::VectorXd> cand(K_);
        for (int k = 0; k < K_; ++k) {
          cand[k] = eta[k] + pX_[k] * db;
          dll += core_sum(k, cand[k]) - ll[k];
        }
        const Eigen::VectorXd bnew = st.parts[0].beta + db;
        const double lp = (st.parts[0].beta.squaredNorm() - bnew.squaredNorm()) /
                          (2.0 * cfg_.beta_prior_variance);
        gstats.beta.attempts++;
        if (std::log(u01(grng)) < dll + lp) {
          for (int k = 0; k < K_; ++k) {
            st.parts[k].beta = bnew;
            ll[k] = core_sum(k, cand[k]);
            eta[k] = std::move(cand[k]);
          }
          gstats.beta.accepts++;
        }
      }

      // single-site gamma random walk over the compact column supports
      for (int j = 0; j < G_; ++j) {
        const double dg = std::normal_distribution<double>(0.0, gamma_step)(grng);
        const double g_new = st.gamma[j] + dg;
        double dll = 0.0;
        for (const auto& [k, i, v] : gsupport_[j]) {
          const double e_old = eta[k][i];
          dll += loglik_core(data_->family, pz_[k][i], e_old + dg * v) -
                 loglik_core(data_->family, pz_[k][i], e_old);
        }
        const double lp = (st.gamma[j] * st.gamma[j] - g_new * g_new) / (2.0 * st.rho2);
        gstats.gamma.attempts++;
        gtune.gamma.attempts++;
        if (std::log(u01(grng)) < dll + lp) {
          st.gamma[j] = g_new;
          for (const auto& [k, i, v] : gsupport_[j]) {
            const double e_old = eta[k][i];
            const double e_new = e_old + dg * v;
            ll[k] += loglik_core(data_->family, pz_[k][i], e_new) -
                     loglik_core(data_->family, pz_[k][i], e_old);
            eta[k][i] = e_new;
          }
          gstats.gamma.accepts++;
          gtune.gamma.accepts++;
        }
      }

      parallel_for_partitions(partition_phase_b);

      st.rho2 = gibbs_update_variance(st.gamma, rho_prior.shape, rho_prior.scale, grng);

      if (cfg_.adapt_steps && it <= cfg_.burn_in && it % 100 == 0) {
        for (int k = 0; k < K_; ++k) {
          tune(steps[k].beta, tune_window[k].beta);
          tune(steps[k].epsilon, tune_window[k].epsilon);
          tune(steps[k].delta, tune_window[k].delta);
          tune_window[k] = ChainStats{};
        }
        tune(gamma_step, gtune.gamma);
        gtune = ChainStats{};
      }

      double total_ll = 0.0;
      std::vector<int> rrow(K_);
      std::vector<double> erow(K_), trow(K_);
      for (int k = 0; k < K_; ++k) {
        total_ll += ll[k];
        rrow[k] = st.parts[k].r();
        erow[k] = st.parts[k].epsilon;
        trow[k] = st.parts[k].tau2;
      }
      if (data_->family == Family::Poisson) total_ll -= lgamma_const();
      if (!std::isfinite(total_ll))
        throw Error("NonFiniteLogPosterior",
                    "non-finite log posterior at iteration " + std::to_string(it));
      draws.loglik_trace.push_back(total_ll);
      draws.r_trace.push_back(std::move(rrow));
      draws.eps_trace.push_back(std::move(erow));
      draws.tau2_trace.push_back(std::move(trow));

      if (it > cfg_.burn_in && (it - cfg_.burn_in) % cfg_.thin == 0)
        draws.snapshots.push_back(st);
    }

    for (const auto& s : pstats) draws.stats.merge(s);
    draws.stats.merge(gstats);
    return draws;
  }

 private:
  struct StepSizes {
    double beta, epsilon, delta;
  };

  static void tune(double& step, const AcceptStats& window) {
    if (window.attempts < 20) return;
    const double rate = window.rate();
    if (rate < 0.20) step *= 0.8;
    else if (rate > 0.40) step *= 1.25;
  }

  static void erase_knot(PartitionState& p, int pos) {
    p.knots.erase(p.knots.begin() + pos);
    Eigen::VectorXd d(p.delta.size() - 1);
    int j = 0;
    for (int i = 0; i < p.delta.size(); ++i)
      if (i != pos) d[j++] = p.delta[i];
    p.delta = std::move(d);
  }

  static void remove_column(Eigen::MatrixXd& m, int col) {
    const int cols = static_cast<int>(m.cols());
    for (int c = col; c + 1 < cols; ++c) m.col(c) = m.col(c + 1);
    m.conservativeResize(Eigen::NoChange, cols - 1);
  }

  Eigen::VectorXd rbf_column(int k, int knot_index, double eps) const {
    const Location& u = grids_[k].knots[knot_index];
    const auto& locs = plocs_[k];
    Eigen::VectorXd col(locs.size());
    for (size_t i = 0; i < locs.size(); ++i)
      col[static_cast<int>(i)] = gaussian_rbf(locs[i], u, eps);
    return col;
  }

  double core_sum(int k, const Eigen::VectorXd& ek) const {
    double ll = 0.0;
    for (int i = 0; i < ek.size(); ++i) ll += loglik_core(data_->family, pz_[k][i], ek[i]);
    return ll;
  }

  double lgamma_const() const {
    if (lgamma_const_ < 0) {
      double c = 0.0;
      for (int i = 0; i < N_; ++i) c += std::lgamma(data_->responses[i] + 1.0);
      lgamma_const_ = c;
    }
    return lgamma_const_;
  }

  int pick_vacant(const PartitionState& p, int R, Rng& rng) const {
    std::vector<char> active(R, 0);
    for (int idx : p.knots) active[idx] = 1;
    std::vector<int> vacant;
    for (int i = 0; i < R; ++i)
      if (!active[i]) vacant.push_back(i);
    return vacant[std::uniform_int_distribution<int>(0, int(vacant.size()) - 1)(rng)];
  }

  void check_state(const ModelState& st) const {
    if (st.k() != K_ || st.gamma.size() != G_)
      throw Error("DimensionMismatch", "state does not match model dimensions");
    for (int k = 0; k < K_; ++k) {
      const auto& p = st.parts[k];
      if (p.delta.size() != p.r())
        throw Error("DimensionMismatch", "delta length does not match knot count");
      if (p.r() > grids_[k].count())
        throw Error("DimensionMismatch", "more active knots than candidates");
      if (P_ > 0 && p.beta.size() != P_)
        throw Error("DimensionMismatch", "beta length does not match covariates");
    }
  }

  void validate_proposal(const ModelState& st, const KnotProposal& prop) const {
    const auto& p = st.parts[prop.k];
    const int r = p.r();
    const int R = grids_[prop.k].count();
    auto bad = [&](const std::string& m) { throw Error("InvalidProposal", m); };
    if (prop.move == MoveType::Birth) {
      if (r >= R) bad("birth with no vacant slot");
      if (prop.add_index < 0 || prop.add_index >= R) bad("birth index out of range");
      for (int idx : p.knots)
        if (idx == prop.add_index) bad("birth of an active knot");
    } else if (prop.move == MoveType::Death) {
      if (r == 0) bad("death with no active knot");
      if (prop.remove_pos < 0 || prop.remove_pos >= r) bad("death position out of range");
    } else {
      if (r == 0 || r >= R) bad("move requires an occupied and a vacant slot");
      if (prop.remove_pos < 0 || prop.remove_pos >= r) bad("move position out of range");
      for (int i = 0; i < r; ++i)
        if (i != prop.remove_pos && p.knots[i] == prop.add_index)
          bad("move onto an active knot");
    }
  }

  const SpatialDataset* data_;
  ModelConfig cfg_;
  std::vector<int> labels_;
  int K_ = 0, N_ = 0, P_ = 0, G_ = 0;
  std::vector<std::vector<int>> rows_;
  std::vector<std::vector<Location>> plocs_;
  std::vector<Eigen::VectorXd> pz_;
  std::vector<Eigen::MatrixXd> pX_;
  std::vector<Eigen::MatrixXd> pH_;
  std::vector<std::vector<std::tuple<int, int, double>>> gsupport_;
  std::vector<CandidateKnotGrid> grids_;
  std::vector<BisquareLayerSpec> layers_;
  mutable double lgamma_const_ = -1.0;
};

}  // namespace adaptbases
