#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "adaptbases/common.hpp"
#include "adaptbases/dataset.hpp"

namespace adaptbases {

// Convention for the inverse-gamma variance priors. The default reads the
// hyperparameters as (shape, scale) on the variance; the alternative reads
// them as (shape, rate) of a gamma prior on the precision, which induces
// IG(shape, 1/rate) on the variance.
enum class VariancePriorConvention { IgVariance, GammaPrecision };

struct IgPrior {
  double shape = 0.5;
  double scale = 2000.0;
};

struct ModelConfig {
  int K = 9;                      // partition count
  double lambda = 5.0;            // truncated-Poisson rate for r_k
  double epsilon_alpha = 0.01;    // Unif(alpha, beta) bandwidth prior
  double epsilon_beta = 3.0;
  double beta_prior_variance = 100.0;
  IgPrior tau2_prior{0.5, 2000.0};
  IgPrior rho2_prior{0.5, 2000.0};
  VariancePriorConvention variance_convention = VariancePriorConvention::IgVariance;

  double coeff_proposal_sd = 1.0;  // sigma for birth/move delta proposals
  double beta_step = 0.05;         // random-walk step sizes
  double epsilon_step = 0.2;
  double gamma_step = 0.05;
  double delta_step = 0.2;

  int iterations = 100000;
  int burn_in = 50000;
  int thin = 10;
  std::uint64_t seed = 1;

  int candidate_grid_per_partition = 25;   // target R_k
  std::vector<int> global_basis_resolutions = {4, 16, 64};
  int lattice_size = 400;                  // L for the clustering lattice
  bool shared_beta = false;
  bool adaptive = true;        // knot birth/death/move moves enabled
  bool delta_refresh = true;   // within-model delta random-walk updates
  bool adapt_steps = false;    // step-size tuning during burn-in

  // Effective (shape, scale) of the IG prior on the variance itself.
  IgPrior effective_tau2() const {
    if (variance_convention == VariancePriorConvention::IgVariance) return tau2_prior;
    return {tau2_prior.shape, 1.0 / tau2_prior.scale};
  }
  IgPrior effective_rho2() const {
    if (variance_convention == VariancePriorConvention::IgVariance) return rho2_prior;
    return {rho2_prior.shape, 1.0 / rho2_prior.scale};
  }
};

struct ConfigViolation {
  std::string code;
  std::string message;
};

inline std::vector<ConfigViolation> config_violations(const ModelConfig& cfg,
                                                      const SpatialDataset& data) {
  std::vector<ConfigViolation> v;
  if (data.n() == 0) v.push_back({"EmptyDataset", "dataset has no observations"});
  if (cfg.K < 1) v.push_back({"InvalidPriorBounds", "K must be >= 1"});
  if (cfg.lambda <= 0) v.push_back({"InvalidPriorBounds", "lambda must be > 0"});
  if (!(cfg.epsilon_alpha > 0) || !(cfg.epsilon_alpha < cfg.epsilon_beta))
    v.push_back({"InvalidPriorBounds", "bandwidth prior requires 0 < alpha < beta"});
  if (cfg.beta_prior_variance <= 0)
    v.push_back({"InvalidPriorBounds", "beta_prior_variance must be > 0"});
  if (cfg.tau2_prior.shape <= 0 || cfg.tau2_prior.scale <= 0 ||
      cfg.rho2_prior.shape <= 0 || cfg.rho2_prior.scale <= 0)
    v.push_back({"InvalidPriorBounds", "variance prior hyperparameters must be > 0"});
  if (cfg.coeff_proposal_sd <= 0 || cfg.beta_step <= 0 || cfg.epsilon_step <= 0 ||
      cfg.gamma_step <= 0 || cfg.delta_step <= 0)
    v.push_back({"InvalidPriorBounds", "proposal step sizes must be > 0"});
  if (!(cfg.burn_in < cfg.iterations))
    v.push_back({"InvalidPriorBounds", "burn_in must be < iterations"});
  if (cfg.burn_in < 0) v.push_back({"InvalidPriorBounds", "burn_in must be >= 0"});
  if (cfg.thin < 1) v.push_back({"InvalidPriorBounds", "thin must be >= 1"});
  if (cfg.candidate_grid_per_partition < 1)
    v.push_back({"InvalidPriorBounds", "candidate_grid_per_partition must be >= 1"});
  if (cfg.lattice_size < 1 ||
      static_cast<int>(std::lround(std::sqrt(double(cfg.lattice_size)))) *
              static_cast<int>(std::lround(std::sqrt(double(cfg.lattice_size)))) !=
          cfg.lattice_size)
    v.push_back({"NonSquareLattice", "lattice_size must be a perfect square"});
  if (cfg.K > cfg.lattice_size || cfg.K > data.n())
    v.push_back({"PartitionCountExceedsData",
                 "K exceeds the number of aggregation lattice cells"});
  for (int r : cfg.global_basis_resolutions)
    if (r < 1) v.push_back({"InvalidPriorBounds", "global basis resolution must be >= 1"});
  return v;
}

inline void validate_config(const ModelConfig& cfg, const SpatialDataset& data) {
  auto v = config_violations(cfg, data);
  if (!v.empty()) {
    std::string msg;
    for (const auto& e : v) msg += e.code + ": " + e.message + "; ";
    throw validation_error(v.front().code, msg);
  }
}

// Flat `key = value` UTF-8 config file, keys mirror ModelConfig fields.
inline std::string serialize_config(const ModelConfig& c) {
  std::ostringstream o;
  o << "K = " << c.K << "\n";
  o << "lambda = " << fmt_g17(c.lambda) << "\n";
  o << "epsilon_alpha = " << fmt_g17(c.epsilon_alpha) << "\n";
  o << "epsilon_beta = " << fmt_g17(c.epsilon_beta) << "\n";
  o << "beta_prior_variance = " << fmt_g17(c.beta_prior_variance) << "\n";
  o << "tau2_shape = " << fmt_g17(c.tau2_prior.shape) << "\n";
  o << "tau2_scale = " << fmt_g17(c.tau2_prior.scale) << "\n";
  o << "rho2_shape = " << fmt_g17(c.rho2_prior.shape) << "\n";
  o << "rho2_scale = " << fmt_g17(c.rho2_prior.scale) << "\n";
  o << "variance_convention = "
    << (c.variance_convention == VariancePriorConvention::IgVariance ? "ig_variance"
                                                                     : "gamma_precision")
    << "\n";
  o << "coeff_proposal_sd = " << fmt_g17(c.coeff_proposal_sd) << "\n";
  o << "beta_step = " << fmt_g17(c.beta_step) << "\n";
  o << "epsilon_step = " << fmt_g17(c.epsilon_step) << "\n";
  o << "gamma_step = " << fmt_g17(c.gamma_step) << "\n";
  o << "delta_step = " << fmt_g17(c.delta_step) << "\n";
  o << "iterations = " << c.iterations << "\n";
  o << "burn_in = " << c.burn_in << "\n";
  o << "thin = " << c.thin << "\n";
  o << "seed = " << c.seed << "\n";
  o << "candidate_grid_per_partition = " << c.candidate_grid_per_partition << "\n";
  o << "global_basis_resolutions = ";
  for (size_t i = 0; i < c.global_basis_resolutions.size(); ++i)
    o << (i ? "," : "") << c.global_basis_resolutions[i];
  o << "\n";
  o << "lattice_size = " << c.lattice_size << "\n";
  o << "shared_beta = " << (c.shared_beta ? "true" : "false") << "\n";
  o << "adaptive = " << (c.adaptive ? "true" : "false") << "\n";
  o << "delta_refresh = " << (c.delta_refresh ? "true" : "false") << "\n";
  o << "adapt_steps = " << (c.adapt_steps ? "true" : "false") << "\n";
  return o.str();
}

namespace detail {
inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}
inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw validation_error("BadConfig", "expected boolean, got '" + s + "'");
}
}  // namespace detail

inline ModelConfig parse_config(std::istream& in) {
  ModelConfig c;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw validation_error("BadConfig", "expected 'key = value': " + t);
    std::string key = detail::trim(t.substr(0, eq));
    std::string val = detail::trim(t.substr(eq + 1));
    if (key == "K") c.K = std::stoi(val);
    else if (key == "lambda") c.lambda = std::stod(val);
    else if (key == "epsilon_alpha") c.epsilon_alpha = std::stod(val);
    else if (key == "epsilon_beta") c.epsilon_beta = std::stod(val);
    else if (key == "beta_prior_variance") c.beta_prior_variance = std::stod(val);
    else if (key == "tau2_shape") c.tau2_prior.shape = std::stod(val);
    else if (key == "tau2_scale") c.tau2_prior.scale = std::stod(val);
    else if (key == "rho2_shape") c.rho2_prior.shape = std::stod(val);
    else if (key == "rho2_scale") c.rho2_prior.scale = std::stod(val);
    else if (key == "variance_convention") {
      if (val == "ig_variance") c.variance_convention = VariancePriorConvention::IgVariance;
      else if (val == "gamma_precision")
        c.variance_convention = VariancePriorConvention::GammaPrecision;
      else throw validation_error("BadConfig", "unknown variance_convention '" + val + "'");
    }
    else if (key == "coeff_proposal_sd") c.coeff_proposal_sd = std::stod(val);
    else if (key == "beta_step") c.beta_step = std::stod(val);
    else if (key == "epsilon_step") c.epsilon_step = std::stod(val);
    else if (key == "gamma_step") c.gamma_step = std::stod(val);
    else if (key == "delta_step") c.delta_step = std::stod(val);
    else if (key == "iterations") c.iterations = std::stoi(val);
    else if (key == "burn_in") c.burn_in = std::stoi(val);
    else if (key == "thin") c.thin = std::stoi(val);
    else if (key == "seed") c.seed = std::stoull(val);
    else if (key == "candidate_grid_per_partition")
      c.candidate_grid_per_partition = std::stoi(val);
    else if (key == "global_basis_resolutions") {
      c.global_basis_resolutions.clear();
      std::stringstream ss(val);
      std::string tok;
      while (std::getline(ss, tok, ',')) c.global_basis_resolutions.push_back(std::stoi(tok));
    }
    else if (key == "lattice_size") c.lattice_size = std::stoi(val);
    else if (key == "shared_beta") c.shared_beta = detail::parse_bool(val);
    else if (key == "adaptive") c.adaptive = detail::parse_bool(val);
    else if (key == "delta_refresh") c.delta_refresh = detail::parse_bool(val);
    else if (key == "adapt_steps") c.adapt_steps = detail::parse_bool(val);
    else throw validation_error("BadConfig", "unknown key '" + key + "'");
  }
  return c;
}

inline ModelConfig read_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw validation_error("IoError", "cannot open " + path);
  return parse_config(f);
}

inline void write_config_file(const std::string& path, const ModelConfig& c) {
  std::ofstream f(path);
  if (!f) throw validation_error("IoError", "cannot open " + path + " for writing");
  f << serialize_config(c);
}

}  // namespace adaptbases
