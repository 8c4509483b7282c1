// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier model-quality checks (criteria 6-8) run 5 replicate
// datasets per family at reduced scale.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "adaptbases/adaptbases.hpp"

using namespace adaptbases;

namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

std::map<int, Result> results;
const char* kNames[10] = {"",
                          "detailed balance vs quadrature oracle",
                          "birth/death reversibility identity",
                          "inverse-gamma conjugacy",
                          "covariance correctness",
                          "clustering exactness and contiguity",
                          "directional rCVMSPE vs fixed-basis baseline",
                          "directional AUC vs fixed-basis baseline",
                          "90% interval calibration",
                          "thread-count and re-run determinism"};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// criterion 1: enumerable toy model, 1 partition, R = 2 candidate knots
// ---------------------------------------------------------------------------

struct ToyModel {
  std::vector<Location> locs;
  Eigen::VectorXd z;
  Location knots[2];
  double eps = 1.0;
  double tau2 = 0.5;
  double lambda = 1.0;
  double sigma = 1.0;  // proposal sd
  Eigen::MatrixXd phi;  // N x 2

  ToyModel() {
    Rng rng = make_rng(424242, 0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int N = 20;
    for (int i = 0; i < N; ++i) locs.push_back({u(rng), u(rng)});
    knots[0] = {0.3, 0.5};
    knots[1] = {0.7, 0.5};
    phi.resize(N, 2);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < 2; ++j) phi(i, j) = gaussian_rbf(locs[i], knots[j], eps);
    // responses from delta_true = (0.8, -0.6)
    z.resize(N);
    for (int i = 0; i < N; ++i) {
      const double eta = 0.8 * phi(i, 0) - 0.6 * phi(i, 1);
      std::poisson_distribution<long> pois(std::exp(eta));
      z[i] = double(pois(rng));
    }
  }

  // Poisson log-likelihood without the lgamma(z+1) constant
  double loglik(const std::vector<int>& active, const Eigen::VectorXd& delta) const {
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(z.size());
    for (size_t m = 0; m < active.size(); ++m)
      eta += delta[int(m)] * phi.col(active[m]);
    double ll = 0.0;
    for (int i = 0; i < z.size(); ++i) ll += z[i] * eta[i] - std::exp(eta[i]);
    return ll;
  }
};

// marginal target mass of each of the 4 knot configurations:
//   m(c) = p(r)/C(R,r) * Integral exp(loglik(delta) - ||delta||^2/(2 tau^2)) ddelta
// (the normal prior constants cancel against the per-coefficient
//  1/N(0;0,tau^2) factor in the implied target)
std::array<double, 4> toy_oracle(const ToyModel& toy) {
  const double lam = toy.lambda;
  const double pr[3] = {1.0, lam, lam * lam / 2.0};  // lambda^r / r!
  const double binom[3] = {1.0, 2.0, 1.0};           // C(2, r)

  const int n1 = 3201;  // Simpson nodes, 1-D
  const double lo = -8.0, hi = 8.0;
  const double h = (hi - lo) / (n1 - 1);
  auto simpson_w = [&](int i, int n) {
    if (i == 0 || i == n - 1) return 1.0;
    return (i % 2 == 1) ? 4.0 : 2.0;
  };

  std::array<double, 4> m{};
  // config 0: no knots
  m[0] = pr[0] * std::exp(toy.loglik({}, Eigen::VectorXd(0)));

  // configs {0} and {1}
  for (int j = 0; j < 2; ++j) {
    double a = 0.0;
    for (int i = 0; i < toy.z.size(); ++i) a += toy.z[i] * toy.phi(i, j);
    double integral = 0.0;
    for (int p = 0; p < n1; ++p) {
      const double d = lo + p * h;
      double s = 0.0;
      for (int i = 0; i < toy.z.size(); ++i) s += std::exp(d * toy.phi(i, j));
      integral += simpson_w(p, n1) * std::exp(d * a - s - d * d / (2.0 * toy.tau2));
    }
    integral *= h / 3.0;
    m[1 + j] = pr[1] / binom[1] * integral;
  }

  // config {0, 1}: 2-D Simpson with precomputed exponential tables
  {
    const int n2 = 801;
    const double h2 = (hi - lo) / (n2 - 1);
    const int N = int(toy.z.size());
    double a0 = 0.0, a1 = 0.0;
    for (int i = 0; i < N; ++i) {
      a0 += toy.z[i] * toy.phi(i, 0);
      a1 += toy.z[i] * toy.phi(i, 1);
    }
    std::vector<double> E0(size_t(n2) * N), E1(size_t(n2) * N);
    for (int p = 0; p < n2; ++p) {
      const double d = lo + p * h2;
      for (int i = 0; i < N; ++i) {
        E0[size_t(p) * N + i] = std::exp(d * toy.phi(i, 0));
        E1[size_t(p) * N + i] = std::exp(d * toy.phi(i, 1));
      }
    }
    double integral = 0.0;
    for (int p = 0; p < n2; ++p) {
      const double d1 = lo + p * h2;
      const double wp = simpson_w(p, n2);
      double row = 0.0;
      for (int q = 0; q < n2; ++q) {
        const double d2 = lo + q * h2;
        double s = 0.0;
        const double* e0 = &E0[size_t(p) * N];
        const double* e1 = &E1[size_t(q) * N];
        for (int i = 0; i < N; ++i) s += e0[i] * e1[i];
        row += simpson_w(q, n2) *
               std::exp(d1 * a0 + d2 * a1 - s - (d1 * d1 + d2 * d2) / (2.0 * toy.tau2));
      }
      integral += wp * row;
    }
    integral *= (h2 / 3.0) * (h2 / 3.0);
    m[3] = pr[2] / binom[2] * integral;
  }

  double total = m[0] + m[1] + m[2] + m[3];
  for (double& v : m) v /= total;
  return m;
}

void criterion1() {
  ToyModel toy;
  const std::array<double, 4> p = toy_oracle(toy);

  // RJMCMC over (configuration, delta) with beta/epsilon/tau^2 frozen
  const int R = 2;
  std::vector<int> active;
  Eigen::VectorXd delta(0);
  double ll = toy.loglik(active, delta);
  Rng rng = make_rng(777, 0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double sigma2 = toy.sigma * toy.sigma;

  const int burn = 10000, keep = 200000;
  std::vector<int> visits;
  visits.reserve(keep);

  for (int it = 0; it < burn + keep; ++it) {
    // trans-dimensional move
    const int r = int(active.size());
    const MoveProbabilities mp = move_probabilities(r, R);
    const double u = u01(rng);
    if (u < mp.birth) {
      std::vector<int> vacant;
      for (int j = 0; j < R; ++j)
        if (std::find(active.begin(), active.end(), j) == active.end())
          vacant.push_back(j);
      const int add = vacant[std::uniform_int_distribution<int>(0, int(vacant.size()) - 1)(rng)];
      const double ds = std::normal_distribution<double>(0.0, toy.sigma)(rng);
      std::vector<int> a2 = active;
      a2.push_back(add);
      Eigen::VectorXd d2(r + 1);
      d2.head(r) = delta;
      d2[r] = ds;
      const double ll2 = toy.loglik(a2, d2);
      double lr = ll2 - ll;
      lr += truncated_poisson_log_prior_ratio(r, r + 1, toy.lambda, R);
      lr += std::log(double(r + 1)) - std::log(double(R - r));
      lr += log_normal_pdf(ds, toy.tau2) - log_normal_pdf(0.0, toy.tau2);
      lr += std::log(move_probabilities(r + 1, R).death) - std::log(mp.birth);
      lr += std::log(double(R - r)) - std::log(double(r + 1));
      lr -= log_normal_pdf(ds, sigma2);
      if (std::log(u01(rng)) < lr) {
        active = std::move(a2);
        delta = std::move(d2);
        ll = ll2;
      }
    } else if (u < mp.birth + mp.death) {
      const int pos = std::uniform_int_distribution<int>(0, r - 1)(rng);
      const double dj = delta[pos];
      std::vector<int> a2 = active;
      a2.erase(a2.begin() + pos);
      Eigen::VectorXd d2(r - 1);
      int w = 0;
      for (int i = 0; i < r; ++i)
        if (i != pos) d2[w++] = delta[i];
      const double ll2 = toy.loglik(a2, d2);
      double lr = ll2 - ll;
      lr += truncated_poisson_log_prior_ratio(r, r - 1, toy.lambda, R);
      lr += std::log(double(R - r + 1)) - std::log(double(r));
      lr += log_normal_pdf(0.0, toy.tau2) - log_normal_pdf(dj, toy.tau2);
      lr += std::log(move_probabilities(r - 1, R).birth) - std::log(mp.death);
      lr += std::log(double(r)) - std::log(double(R - r + 1));
      lr += log_normal_pdf(dj, sigma2);
      if (std::log(u01(rng)) < lr) {
        active = std::move(a2);
        delta = std::move(d2);
        ll = ll2;
      }
    } else {
      const int pos = std::uniform_int_distribution<int>(0, r - 1)(rng);
      std::vector<int> vacant;
      for (int j = 0; j < R; ++j)
        if (std::find(active.begin(), active.end(), j) == active.end())
          vacant.push_back(j);
      const int add = vacant[std::uniform_int_distribution<int>(0, int(vacant.size()) - 1)(rng)];
      const double ds = std::normal_distribution<double>(0.0, toy.sigma)(rng);
      const double dj = delta[pos];
      std::vector<int> a2 = active;
      a2.erase(a2.begin() + pos);
      a2.push_back(add);
      Eigen::VectorXd d2(r);
      int w = 0;
      for (int i = 0; i < r; ++i)
        if (i != pos) d2[w++] = delta[i];
      d2[r - 1] = ds;
      const double ll2 = toy.loglik(a2, d2);
      double lr = ll2 - ll;
      lr += log_normal_pdf(ds, toy.tau2) - log_normal_pdf(dj, toy.tau2);
      lr += log_normal_pdf(dj, sigma2) - log_normal_pdf(ds, sigma2);
      if (std::log(u01(rng)) < lr) {
        active = std::move(a2);
        delta = std::move(d2);
        ll = ll2;
      }
    }

    // within-model coefficient refresh
    for (int mloop = 0; mloop < int(active.size()); ++mloop) {
      const double dn = delta[mloop] + std::normal_distribution<double>(0.0, 0.4)(rng);
      Eigen::VectorXd d2 = delta;
      d2[mloop] = dn;
      const double ll2 = toy.loglik(active, d2);
      const double lp = (delta[mloop] * delta[mloop] - dn * dn) / (2.0 * toy.tau2);
      if (std::log(u01(rng)) < ll2 - ll + lp) {
        delta = std::move(d2);
        ll = ll2;
      }
    }

    if (it >= burn) {
      int code = 0;
      for (int j : active) code |= (1 << j);
      visits.push_back(code);
    }
  }

  // frequencies + batch-means MCSE
  std::array<double, 4> freq{};
  for (int v : visits) freq[v] += 1.0;
  for (double& f : freq) f /= double(visits.size());

  const int nb = 400, bs = keep / nb;
  bool pass = true;
  std::string detail;
  for (int c = 0; c < 4; ++c) {
    std::vector<double> bm(nb, 0.0);
    for (int b = 0; b < nb; ++b) {
      for (int i = 0; i < bs; ++i) bm[b] += (visits[size_t(b) * bs + i] == c) ? 1.0 : 0.0;
      bm[b] /= bs;
    }
    double mean = 0.0;
    for (double v : bm) mean += v;
    mean /= nb;
    double var = 0.0;
    for (double v : bm) var += (v - mean) * (v - mean);
    var /= (nb - 1);
    const double mcse = std::sqrt(var / nb);
    const double err = std::abs(freq[c] - p[c]);
    if (err > 3.0 * mcse) pass = false;
    detail += (c ? ", " : "") + std::string("cfg") + std::to_string(c) + " freq " +
              fmt(freq[c]) + " vs " + fmt(p[c]) + " (3*mcse " + fmt(3.0 * mcse) + ")";
  }
  results[1] = {pass, detail};
}

// ---------------------------------------------------------------------------
// shared helpers for sampler-based criteria
// ---------------------------------------------------------------------------

SynthesizedData simulate_replicate(Family fam, int n_fit, int n_validate,
                                   std::uint64_t seed) {
  SimulationRecipe r;
  r.n_fit = n_fit;
  r.n_validate = n_validate;
  r.family = fam;
  r.seed = seed;
  return synthesize_dataset(r);
}

PartitionAssignment cluster_dataset(const SpatialDataset& data, int K, int L,
                                    NeighborGraph* graph_out = nullptr,
                                    ClusterSet* clusters_out = nullptr,
                                    LatticeAggregate* lattice_out = nullptr) {
  GlmFit glm = fit_nonspatial_glm(data);
  LatticeAggregate agg =
      aggregate_to_lattice(data.locations, glm.pearson_residuals, L, data.domain_bounds);
  NeighborGraph graph = voronoi_neighbors(agg.points);
  ClusterSet cs = agglomerative_cluster(agg.residual_means, graph, K);
  PartitionAssignment pa = assign_observations(data.locations, agg, cs);
  if (graph_out) *graph_out = graph;
  if (clusters_out) *clusters_out = cs;
  if (lattice_out) *lattice_out = agg;
  return pa;
}

void criterion2() {
  SimulationRecipe r;
  r.n_fit = 25;
  r.n_validate = 1;
  r.seed = 31;
  CovarianceSpec field;
  field.sill = 0.5;
  r.field = field;
  SpatialDataset data = synthesize_dataset(r).fit;
  PartitionAssignment pa;
  pa.labels.assign(25, 1);
  ModelConfig cfg;
  cfg.K = 1;
  cfg.iterations = 10;
  cfg.burn_in = 5;
  cfg.candidate_grid_per_partition = 16;
  Sampler sampler(data, pa, cfg);
  const int R = sampler.grids()[0].count();

  Rng rng = make_rng(97, 0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    ModelState st = sampler.initial_state();
    auto& p = st.parts[0];
    const int rr = std::uniform_int_distribution<int>(0, R - 1)(rng);
    std::vector<int> perm(R);
    for (int i = 0; i < R; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    p.knots.assign(perm.begin(), perm.begin() + rr);
    p.delta.resize(rr);
    for (int j = 0; j < rr; ++j) p.delta[j] = std::normal_distribution<double>(0, 1)(rng);
    p.epsilon = 0.1 + 2.5 * u01(rng);
    p.tau2 = 0.1 + 2.0 * u01(rng);

    KnotProposal birth;
    birth.move = MoveType::Birth;
    birth.k = 0;
    std::vector<int> vacant;
    for (int j = 0; j < R; ++j)
      if (std::find(p.knots.begin(), p.knots.end(), j) == p.knots.end())
        vacant.push_back(j);
    birth.add_index =
        vacant[std::uniform_int_distribution<int>(0, int(vacant.size()) - 1)(rng)];
    birth.delta_star = std::normal_distribution<double>(0, 1)(rng);

    const double lr_b = sampler.knot_acceptance_log_ratio(st, birth);
    ModelState st2 = Sampler::apply_knot_move(st, birth, true);
    KnotProposal death;
    death.move = MoveType::Death;
    death.k = 0;
    death.remove_pos = st2.parts[0].r() - 1;
    const double lr_d = sampler.knot_acceptance_log_ratio(st2, death);
    worst = std::max(worst, std::abs(lr_b + lr_d));
  }
  results[2] = {worst <= 1e-10,
                "max |log-ratio(birth) + log-ratio(death)| = " + fmt(worst) +
                    " over 1000 pairs (tol 1e-10)"};
}

void criterion3() {
  Rng meta = make_rng(5150, 0);
  std::uniform_real_distribution<double> ua(5.0, 9.0), ub(1.0, 10.0), us(0.5, 20.0);
  bool pass = true;
  std::string detail;
  for (int t = 0; t < 5; ++t) {
    const double a = ua(meta), b = ub(meta), s = us(meta);
    const int ncoef = 6;
    Eigen::VectorXd coeffs = Eigen::VectorXd::Constant(ncoef, std::sqrt(s / ncoef));
    const double ap = a + ncoef / 2.0;
    const double bp = b + s / 2.0;
    // raw inverse moments of the Gamma(ap, rate bp) precision
    auto raw = [&](int k) {
      double v = std::pow(bp, k);
      for (int i = 1; i <= k; ++i) v /= (ap - i);
      return v;
    };
    const double m1 = raw(1), m2 = raw(2), m3 = raw(3), m4 = raw(4);
    const double var = m2 - m1 * m1;
    const double mu4 = m4 - 4.0 * m3 * m1 + 6.0 * m2 * m1 * m1 - 3.0 * std::pow(m1, 4);

    const int T = 100000;
    Rng rng = make_rng(6000 + t, 0);
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < T; ++i) {
      const double v = gibbs_update_variance(coeffs, a, b, rng);
      sum += v;
      sumsq += v * v;
    }
    const double emean = sum / T;
    const double evar = (sumsq - T * emean * emean) / (T - 1);
    const double se_mean = std::sqrt(var / T);
    const double se_var = std::sqrt(std::max(mu4 - var * var, 0.0) / T);
    if (std::abs(emean - m1) > 3.0 * se_mean) pass = false;
    if (std::abs(evar - var) > 3.0 * se_var) pass = false;
    detail += (t ? "; " : "") + std::string("triple ") + std::to_string(t + 1) +
              " mean err " + fmt(std::abs(emean - m1)) + "/" + fmt(3.0 * se_mean) +
              ", var err " + fmt(std::abs(evar - var)) + "/" + fmt(3.0 * se_var);
  }
  results[3] = {pass, detail};
}

void criterion4() {
  bool pass = true;
  std::string why;
  // Matern nu = 1/2 vs exponential on a grid
  double worst_exp = 0.0;
  for (double d = 0.0; d <= 5.0; d += 0.05)
    for (double range : {0.2, 0.5, 1.0, 2.0})
      worst_exp = std::max(worst_exp,
                           std::abs(matern_correlation(d, 0.5, range) - std::exp(-d / range)));
  if (worst_exp > 1e-12) pass = false;
  // nu = 3/2 closed form
  double worst_32 = 0.0;
  for (double d = 0.01; d <= 5.0; d += 0.07)
    for (double range : {0.3, 1.0, 1.7}) {
      const double a = std::sqrt(3.0) * d / range;
      worst_32 = std::max(worst_32, std::abs(matern_correlation(d, 1.5, range) -
                                             (1.0 + a) * std::exp(-a)));
    }
  if (worst_32 > 1e-10) pass = false;
  // PSD pre-nugget
  Rng rng = make_rng(303, 0);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  std::vector<Location> locs;
  for (int i = 0; i < 80; ++i) locs.push_back({u(rng), u(rng)});
  double min_eig = 1e300;
  for (double nu : {0.5, 1.5, 2.5}) {
    CovarianceSpec sp;
    sp.family = nu == 0.5 ? CovFamily::Exponential : CovFamily::Matern;
    sp.nu = nu;
    sp.range = 0.8;
    sp.nugget = 0.0;
    Eigen::MatrixXd K = covariance_matrix(locs, sp);
    min_eig = std::min(min_eig,
                       Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K).eigenvalues().minCoeff());
  }
  Eigen::MatrixXd Kn = nonstationary_covariance_matrix(locs, default_nonstationary_spec(), 0.0);
  min_eig = std::min(min_eig,
                     Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Kn).eigenvalues().minCoeff());
  if (min_eig < -1e-8) pass = false;
  // weight normalization at 1000 random points
  auto spec = default_nonstationary_spec();
  double worst_sum = 0.0;
  for (int t = 0; t < 1000; ++t) {
    auto w = nonstationary_weights({u(rng), u(rng)}, spec);
    double s = 0.0;
    for (double wi : w) s += wi;
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }
  if (worst_sum > 1e-12) pass = false;
  results[4] = {pass, "max |matern(1/2)-exp| " + fmt(worst_exp) + ", max nu=3/2 err " +
                          fmt(worst_32) + ", min eigenvalue " + fmt(min_eig) +
                          ", max |sum w - 1| " + fmt(worst_sum)};
}

bool cluster_contiguous(const ClusterSet& cs, const NeighborGraph& g) {
  for (const auto& mem : cs.members) {
    if (mem.empty()) return false;
    std::set<int> inside(mem.begin(), mem.end());
    std::set<int> seen;
    std::vector<int> stack = {mem[0]};
    seen.insert(mem[0]);
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int o : inside)
        if (!seen.count(o) && g.has_edge(v, o)) {
          seen.insert(o);
          stack.push_back(o);
        }
    }
    if (seen.size() != inside.size()) return false;
  }
  return true;
}

struct ReplicateOutcome {
  double rcvmspe_adaptive = 0.0;
  double rcvmspe_baseline = 0.0;
  double auc_adaptive = 0.0;
  double auc_baseline = 0.0;
  long covered = 0;
  long total = 0;
};

ReplicateOutcome run_replicate(Family fam, int rep, bool want_coverage,
                               bool* cluster_ok, std::string* cluster_note) {
  // Clustering resolution is chosen per family: count data supports a coarser
  // residual lattice (~20 obs/cell); binary residuals are noisier and the
  // partition geometry that works best uses a finer lattice.
  const int K = 9, L = (fam == Family::Poisson) ? 100 : 196;
  SynthesizedData sim =
      simulate_replicate(fam, 2000, 500, derive_seed(fam == Family::Poisson ? 100 : 200,
                                                     std::uint64_t(rep)));
  NeighborGraph graph;
  ClusterSet cs;
  PartitionAssignment pa = cluster_dataset(sim.fit, K, L, &graph, &cs);

  // criterion-5 bookkeeping: exactly K clusters, each contiguous
  std::set<int> labels(pa.labels.begin(), pa.labels.end());
  if (int(cs.members.size()) != K || int(labels.size()) != K ||
      !cluster_contiguous(cs, graph)) {
    *cluster_ok = false;
    *cluster_note += " replicate " + std::to_string(rep) + " failed;";
  }

  ModelConfig cfg;
  cfg.K = K;
  cfg.iterations = 20000;
  cfg.burn_in = 10000;
  cfg.thin = 20;
  cfg.seed = 1000 + rep;
  cfg.adapt_steps = true;
  // Precision-scale reading of the coefficient-variance prior (strong
  // shrinkage toward the fixed-effects-only model) plus a compact adaptive
  // layer: a 3x3 candidate grid per partition with bandwidths in [1, 3].
  cfg.variance_convention = VariancePriorConvention::GammaPrecision;
  cfg.lambda = 5.0;
  cfg.epsilon_alpha = 1.0;
  cfg.epsilon_beta = 3.0;
  cfg.candidate_grid_per_partition = 9;
  cfg.coeff_proposal_sd = 0.5;

  ReplicateOutcome out;
  auto layers = default_bisquare_layers(sim.fit.domain_bounds, cfg.global_basis_resolutions);
  auto vlabels = assign_new_locations(sim.validate.locations, pa);

  std::vector<PredictionDraw> resolved_adaptive;
  auto fit_and_predict = [&](bool adaptive) {
    ModelConfig c = cfg;
    c.adaptive = adaptive;
    Sampler sampler(sim.fit, pa, c);
    PosteriorDraws draws = sampler.run(4);
    std::vector<PredictionDraw> resolved;
    resolved.reserve(draws.snapshots.size());
    for (const auto& st : draws.snapshots)
      resolved.push_back(resolve_draw(st, sampler.grids()));
    if (adaptive) resolved_adaptive = resolved;
    return posterior_predict(resolved, sim.validate.locations, sim.validate.covariates,
                             vlabels, layers, fam, 0.0);
  };

  PredictiveSummary adaptive = fit_and_predict(true);
  PredictiveSummary baseline = fit_and_predict(false);

  out.rcvmspe_adaptive = rcvmspe(adaptive.resp_mean, sim.validate.responses);
  out.rcvmspe_baseline = rcvmspe(baseline.resp_mean, sim.validate.responses);
  if (fam == Family::Bernoulli) {
    out.auc_adaptive = auc(adaptive.resp_mean, sim.validate.responses);
    out.auc_baseline = auc(baseline.resp_mean, sim.validate.responses);
  }
  if (want_coverage) {
    // 90% posterior predictive intervals for held-out responses: per retained
    // draw, simulate a response at each validation location, then take the
    // empirical 5%/95% quantiles across draws
    Rng zr = make_rng(42, std::uint64_t(rep));
    for (int i = 0; i < 500; ++i) {
      std::vector<double> zs;
      zs.reserve(resolved_adaptive.size());
      for (const auto& dr : resolved_adaptive) {
        const double e = eta_at(dr, sim.validate.locations[i],
                                Eigen::VectorXd(sim.validate.covariates.row(i)),
                                vlabels[i], layers);
        if (fam == Family::Poisson)
          zs.push_back(double(std::poisson_distribution<long>(std::exp(e))(zr)));
        else
          zs.push_back(std::bernoulli_distribution(1.0 / (1.0 + std::exp(-e)))(zr) ? 1.0
                                                                                   : 0.0);
      }
      std::sort(zs.begin(), zs.end());
      const double lo = zs[size_t(0.05 * double(zs.size() - 1))];
      const double hi = zs[size_t(std::ceil(0.95 * double(zs.size() - 1)))];
      const double z = sim.validate.responses[i];
      if (z >= lo && z <= hi) ++out.covered;
      ++out.total;
    }
  }
  return out;
}

void criterion5_triplet(bool* pass, std::string* note) {
  // 6 lattice points in two separated triplets, residual means (0,0,0), (5,5,5)
  std::vector<Location> pts = {{0, 0}, {1, 0}, {0.5, 0.9},
                               {10, 10}, {11, 10}, {10.5, 10.9}};
  NeighborGraph g = voronoi_neighbors(pts);
  Eigen::VectorXd means(6);
  means << 0, 0, 0, 5, 5, 5;
  ClusterSet cs = agglomerative_cluster(means, g, 2);

  // exhaustive search over contiguous 2-partitions minimizing the pooled
  // within-cluster sum of squares of the residual means
  auto connected = [&](const std::vector<int>& mem) {
    if (mem.empty()) return false;
    std::set<int> inside(mem.begin(), mem.end());
    std::set<int> seen{mem[0]};
    std::vector<int> stack{mem[0]};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int o : inside)
        if (!seen.count(o) && g.has_edge(v, o)) {
          seen.insert(o);
          stack.push_back(o);
        }
    }
    return seen.size() == inside.size();
  };
  double best = 1e300;
  std::vector<int> best_mask;
  for (int mask = 1; mask < 63; ++mask) {  // proper nonempty subsets of 6 points
    std::vector<int> a, b;
    for (int i = 0; i < 6; ++i) ((mask >> i) & 1 ? a : b).push_back(i);
    if (!connected(a) || !connected(b)) continue;
    double ss = 0.0;
    for (const auto* grp : {&a, &b}) {
      double m = 0.0;
      for (int i : *grp) m += means[i];
      m /= grp->size();
      for (int i : *grp) ss += (means[i] - m) * (means[i] - m);
    }
    if (ss < best - 1e-12) {
      best = ss;
      best_mask = a;
    }
  }
  std::set<int> optimum(best_mask.begin(), best_mask.end());
  std::set<int> got;
  for (int i = 0; i < 6; ++i)
    if (cs.assignment[i] == cs.assignment[best_mask[0]]) got.insert(i);
  if (got != optimum) {
    *pass = false;
    *note += " triplet construction mismatch;";
  }
}

void criterion9() {
  SynthesizedData sim = simulate_replicate(Family::Poisson, 600, 10, 909);
  PartitionAssignment pa = cluster_dataset(sim.fit, 4, 100);
  ModelConfig cfg;
  cfg.K = 4;
  cfg.iterations = 2000;
  cfg.burn_in = 1000;
  cfg.thin = 10;
  cfg.seed = 77;
  cfg.lattice_size = 100;

  namespace fs = std::filesystem;
  const std::string dir = "acceptance_tmp";
  fs::create_directories(dir);
  auto run_to_file = [&](int threads, const std::string& name) {
    Sampler sampler(sim.fit, pa, cfg);
    PosteriorDraws draws = sampler.run(threads);
    write_trace_csv(dir + "/" + name + "_trace.csv", draws);
    write_draws_dir(dir + "/" + name + "_draws", draws, sampler.grids());
  };
  run_to_file(1, "t1");
  run_to_file(8, "t8");
  run_to_file(1, "t1b");
  auto slurp = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  const bool traces = slurp(dir + "/t1_trace.csv") == slurp(dir + "/t8_trace.csv") &&
                      slurp(dir + "/t1_trace.csv") == slurp(dir + "/t1b_trace.csv");
  const bool snaps =
      slurp(dir + "/t1_draws/snapshot_00100.csv") ==
          slurp(dir + "/t8_draws/snapshot_00100.csv") &&
      slurp(dir + "/t1_draws/snapshot_00100.csv") ==
          slurp(dir + "/t1b_draws/snapshot_00100.csv");
  fs::remove_all(dir);
  results[9] = {traces && snaps,
                std::string("trace files ") + (traces ? "identical" : "DIFFER") +
                    ", snapshots " + (snaps ? "identical" : "DIFFER") +
                    " across --threads 1/8 and re-run"};
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();

  bool cluster_ok = true;
  std::string cluster_note;
  criterion5_triplet(&cluster_ok, &cluster_note);

  // criteria 6 + 8: Poisson replicates
  int wins_rcvmspe = 0;
  long covered = 0, total = 0;
  std::string det6;
  for (int rep = 1; rep <= 5; ++rep) {
    ReplicateOutcome o = run_replicate(Family::Poisson, rep, true, &cluster_ok, &cluster_note);
    if (o.rcvmspe_adaptive < o.rcvmspe_baseline) ++wins_rcvmspe;
    covered += o.covered;
    total += o.total;
    det6 += (rep > 1 ? "; " : "") + std::string("rep") + std::to_string(rep) + " " +
            fmt(o.rcvmspe_adaptive) + " vs " + fmt(o.rcvmspe_baseline);
  }
  results[6] = {wins_rcvmspe >= 4,
                "adaptive rCVMSPE lower on " + std::to_string(wins_rcvmspe) +
                    "/5 replicates (" + det6 + ")"};
  const double coverage = total ? double(covered) / double(total) : 0.0;
  results[8] = {coverage >= 0.80 && coverage <= 0.98,
                "pooled 90% predictive-interval coverage " + fmt(coverage) + " over " +
                    std::to_string(total) + " held-out responses (band [0.80, 0.98])"};

  // criterion 7: Bernoulli replicates
  int wins_auc = 0;
  bool all_above_half = true;
  std::string det7;
  for (int rep = 1; rep <= 5; ++rep) {
    ReplicateOutcome o =
        run_replicate(Family::Bernoulli, rep, false, &cluster_ok, &cluster_note);
    if (o.auc_adaptive >= o.auc_baseline) ++wins_auc;
    if (o.auc_adaptive <= 0.5) all_above_half = false;
    det7 += (rep > 1 ? "; " : "") + std::string("rep") + std::to_string(rep) + " " +
            fmt(o.auc_adaptive) + " vs " + fmt(o.auc_baseline);
  }
  results[7] = {wins_auc >= 4 && all_above_half,
                "adaptive AUC >= baseline on " + std::to_string(wins_auc) +
                    "/5 replicates, all > 0.5: " + (all_above_half ? "yes" : "NO") +
                    " (" + det7 + ")"};

  results[5] = {cluster_ok,
                cluster_note.empty()
                    ? "exactly K contiguous clusters on all 10 replicate datasets; "
                      "triplet construction equals the exhaustive optimum"
                    : "FAILED:" + cluster_note};

  criterion9();

  int failures = 0;
  for (int c = 1; c <= 9; ++c) {
    const Result& r = results[c];
    std::printf("criterion %d (%s): %s — %s\n", c, kNames[c], r.pass ? "PASS" : "FAIL",
                r.detail.c_str());
    if (!r.pass) ++failures;
  }
  return failures;
}
