#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iostream>

#include "adaptbases/adaptbases.hpp"

namespace fs = std::filesystem;
using namespace adaptbases;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitLineage = 4;

int exit_code_for(const Error& e) {
  const std::string& c = e.code();
  if (c == "DisconnectedGraph" || c == "FactorizationFailure" ||
      c == "NonFiniteLogPosterior" || c == "SeparationOrDivergence")
    return kExitNumerical;
  if (c == "LineageMismatch") return kExitLineage;
  return kExitValidation;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct RecipeFile {
  SimulationRecipe recipe;
  std::string text;  // resolved snapshot for the manifest
};

RecipeFile read_recipe(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw validation_error("IoError", "cannot open " + path);
  SimulationRecipe r;
  std::string field_kind = "nonstationary";
  CovarianceSpec stationary;
  double eta = 6.0;
  std::string line;
  std::ostringstream snapshot;
  while (std::getline(f, line)) {
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    snapshot << t << "\n";
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw validation_error("BadConfig", "expected 'key = value': " + t);
    std::string key = detail::trim(t.substr(0, eq));
    std::string val = detail::trim(t.substr(eq + 1));
    if (key == "n_fit") r.n_fit = std::stoi(val);
    else if (key == "n_validate") r.n_validate = std::stoi(val);
    else if (key == "family") r.family = family_from_string(val);
    else if (key == "field") field_kind = val;
    else if (key == "nu") stationary.nu = std::stod(val);
    else if (key == "range") stationary.range = std::stod(val);
    else if (key == "sill") stationary.sill = std::stod(val);
    else if (key == "nugget") stationary.nugget = std::stod(val);
    else if (key == "eta") eta = std::stod(val);
    else if (key == "beta") {
      std::vector<double> b;
      std::stringstream ss(val);
      std::string tok;
      while (std::getline(ss, tok, ',')) b.push_back(std::stod(tok));
      r.beta_true = Eigen::Map<Eigen::VectorXd>(b.data(), static_cast<int>(b.size()));
    }
    else if (key == "covariate_lo") r.covariate_lo = std::stod(val);
    else if (key == "covariate_hi") r.covariate_hi = std::stod(val);
    else if (key == "domain") {
      std::vector<double> d;
      std::stringstream ss(val);
      std::string tok;
      while (std::getline(ss, tok, ',')) d.push_back(std::stod(tok));
      if (d.size() != 4) throw validation_error("BadConfig", "domain needs 4 values");
      r.domain = {d[0], d[1], d[2], d[3]};
    }
    else if (key == "seed") r.seed = std::stoull(val);
    else throw validation_error("BadConfig", "unknown recipe key '" + key + "'");
  }
  stationary.family = stationary.nu == 0.5 ? CovFamily::Exponential : CovFamily::Matern;
  if (field_kind == "stationary") r.field = stationary;
  else if (field_kind == "nonstationary") r.field = default_nonstationary_spec(r.domain, eta);
  else throw validation_error("BadConfig", "field must be stationary or nonstationary");
  return {r, snapshot.str()};
}

Rect rect_from(const std::vector<double>& d) {
  if (d.size() != 4) throw validation_error("BadConfig", "domain needs 4 values");
  return {d[0], d[1], d[2], d[3]};
}

void run_simulate_once(const SimulationRecipe& recipe, const std::string& snapshot,
                       const std::string& out) {
  Timer timer;
  fs::create_directories(out);
  SynthesizedData data = synthesize_dataset(recipe);
  write_dataset_csv(out + "/fit.csv", data.fit);
  write_dataset_csv(out + "/validate.csv", data.validate);
  write_truth_csv(out + "/truth.csv", data.truth);
  RunManifest m;
  m.command = "simulate";
  m.config_snapshot = snapshot;
  m.outputs = {"fit.csv", "validate.csv", "truth.csv"};
  m.seed = recipe.seed;
  m.family = to_string(recipe.family);
  m.domain = {recipe.domain.xmin, recipe.domain.ymin, recipe.domain.xmax, recipe.domain.ymax};
  m.duration_seconds = timer.seconds();
  write_manifest(out + "/manifest.json", m);
}

struct FitArtifacts {
  ModelConfig cfg;
  Family family;
  Rect domain;
  std::vector<PredictionDraw> draws;
  PartitionAssignment partition;
  std::vector<BisquareLayerSpec> layers;
  RunManifest manifest;
};

FitArtifacts load_fit_dir(const std::string& dir) {
  FitArtifacts a;
  a.manifest = read_manifest(dir + "/manifest.json");
  std::istringstream cfg_in(a.manifest.config_snapshot);
  a.cfg = parse_config(cfg_in);
  a.family = family_from_string(a.manifest.family);
  a.domain = rect_from(a.manifest.domain);
  a.draws = read_draws_dir(dir + "/draws");
  a.partition = read_partition(dir + "/partition.csv", dir + "/lattice.csv");
  a.layers = default_bisquare_layers(a.domain, a.cfg.global_basis_resolutions);
  return a;
}

void check_lineage(const RunManifest& fit_manifest, bool force) {
  if (force) return;
  // fit records the partition manifest path and its hash at fit time;
  // refuse when the partition on disk no longer matches.
  for (const auto& in : fit_manifest.inputs) {
    if (in.rfind("partition_manifest:", 0) != 0) continue;
    const std::string path = in.substr(std::string("partition_manifest:").size());
    if (!fs::exists(path))
      throw Error("LineageMismatch", "partition manifest " + path + " is missing");
    if (hash_file_hex(path) != fit_manifest.parent_manifest_hash)
      throw Error("LineageMismatch", "partition manifest " + path +
                                         " does not match the one used for fitting");
  }
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Adaptive radial-basis SGLMM pipeline"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate synthetic datasets");
  std::string sim_recipe, sim_out = "sim";
  int replicates = 1;
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  sim->add_option("--recipe", sim_recipe, "recipe file")->required();
  sim->add_option("--out", sim_out, "output directory");
  sim->add_option("--replicates", replicates, "number of replicate datasets");
  sim->add_option("--seed", sim_seed, "override recipe seed")->each([&](const std::string&) {
    sim_seed_set = true;
  });

  // cluster
  auto* clu = app.add_subcommand("cluster", "partition the spatial domain");
  std::string clu_data, clu_family = "poisson", clu_out = "cluster";
  std::vector<double> clu_domain = {0, 0, 5, 5};
  int clu_K = 9, clu_L = 400;
  clu->add_option("--data", clu_data, "dataset CSV")->required();
  clu->add_option("--family", clu_family, "poisson or bernoulli");
  clu->add_option("--domain", clu_domain, "xmin,ymin,xmax,ymax")->expected(4);
  clu->add_option("-K,--partitions", clu_K, "number of partitions");
  clu->add_option("-L,--lattice", clu_L, "lattice size (perfect square)");
  clu->add_option("--out", clu_out, "output directory");

  // fit
  auto* fit = app.add_subcommand("fit", "run the RJMCMC sampler");
  std::string fit_data, fit_partition, fit_config, fit_out = "fit";
  int threads = 1;
  std::uint64_t fit_seed = 0;
  bool fit_seed_set = false;
  fit->add_option("--data", fit_data, "dataset CSV")->required();
  fit->add_option("--partition", fit_partition, "cluster output directory")->required();
  fit->add_option("--config", fit_config, "model config file");
  fit->add_option("--seed", fit_seed, "override config seed")->each([&](const std::string&) {
    fit_seed_set = true;
  });
  fit->add_option("--threads", threads, "partition worker threads");
  fit->add_option("--out", fit_out, "output directory");

  // predict
  auto* pre = app.add_subcommand("predict", "posterior prediction at new locations");
  std::string pre_fit, pre_targets, pre_out = "predict";
  double pre_level = 0.0;
  pre->add_option("--fit", pre_fit, "fit output directory")->required();
  pre->add_option("--targets", pre_targets, "target locations CSV (x,y,z[,x1..xP])")->required();
  pre->add_option("--level", pre_level, "predictive interval level, e.g. 0.9");
  pre->add_option("--out", pre_out, "output directory");

  // evaluate
  auto* eva = app.add_subcommand("evaluate", "held-out prediction metrics");
  std::string eva_fit, eva_targets, eva_out = "evaluate";
  bool force = false;
  eva->add_option("--fit", eva_fit, "fit output directory")->required();
  eva->add_option("--targets", eva_targets, "held-out dataset CSV")->required();
  eva->add_option("--out", eva_out, "output directory");
  eva->add_flag("--force", force, "skip lineage verification");

  // surface
  auto* sur = app.add_subcommand("surface", "gridded posterior surfaces");
  std::string sur_fit, sur_out = "surface";
  int nx = 50, ny = 50;
  sur->add_option("--fit", sur_fit, "fit output directory")->required();
  sur->add_option("--nx", nx, "grid cells in x");
  sur->add_option("--ny", ny, "grid cells in y");
  sur->add_option("--out", sur_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  if (sim->parsed()) {
    RecipeFile rf = read_recipe(sim_recipe);
    if (sim_seed_set) rf.recipe.seed = sim_seed;
    if (replicates <= 1) {
      run_simulate_once(rf.recipe, rf.text, sim_out);
    } else {
      for (int rep = 1; rep <= replicates; ++rep) {
        SimulationRecipe r = rf.recipe;
        r.seed = derive_seed(rf.recipe.seed, static_cast<std::uint64_t>(rep));
        run_simulate_once(r, rf.text, sim_out + "/rep_" + std::to_string(rep));
      }
    }
    return kExitOk;
  }

  if (clu->parsed()) {
    Timer timer;
    const Rect domain = rect_from(clu_domain);
    const Family fam = family_from_string(clu_family);
    SpatialDataset data = read_dataset_csv(clu_data, fam, domain);
    if (clu_K < 1 || clu_K > clu_L)
      throw validation_error("PartitionCountExceedsData", "need 1 <= K <= L");
    GlmFit glm = fit_nonspatial_glm(data);
    LatticeAggregate lattice =
        aggregate_to_lattice(data.locations, glm.pearson_residuals, clu_L, domain);
    if (static_cast<int>(lattice.points.size()) < clu_K)
      throw validation_error("PartitionCountExceedsData",
                             "K exceeds occupied lattice cells (" +
                                 std::to_string(lattice.points.size()) + ")");
    NeighborGraph graph = voronoi_neighbors(lattice.points);
    ClusterSet clusters = agglomerative_cluster(lattice.residual_means, graph, clu_K);
    PartitionAssignment pa = assign_observations(data.locations, lattice, clusters);
    fs::create_directories(clu_out);
    write_partition_csv(clu_out + "/partition.csv", data.locations, pa.labels);
    write_lattice_csv(clu_out + "/lattice.csv", pa);
    RunManifest m;
    m.command = "cluster";
    m.config_snapshot = "K = " + std::to_string(clu_K) + "\nL = " + std::to_string(clu_L) + "\n";
    m.inputs = {clu_data};
    m.outputs = {"partition.csv", "lattice.csv"};
    m.family = to_string(fam);
    m.domain = clu_domain;
    m.duration_seconds = timer.seconds();
    write_manifest(clu_out + "/manifest.json", m);
    return kExitOk;
  }

  if (fit->parsed()) {
    Timer timer;
    RunManifest pm = read_manifest(fit_partition + "/manifest.json");
    const Family fam = family_from_string(pm.family);
    const Rect domain = rect_from(pm.domain);
    SpatialDataset data = read_dataset_csv(fit_data, fam, domain);
    PartitionAssignment pa =
        read_partition(fit_partition + "/partition.csv", fit_partition + "/lattice.csv");
    ModelConfig cfg = fit_config.empty() ? ModelConfig{} : read_config_file(fit_config);
    if (fit_seed_set) cfg.seed = fit_seed;

    Sampler sampler(data, pa, cfg);
    PosteriorDraws draws = sampler.run(threads);

    fs::create_directories(fit_out);
    write_trace_csv(fit_out + "/trace.csv", draws);
    write_draws_dir(fit_out + "/draws", draws, sampler.grids());
    fs::copy_file(fit_partition + "/partition.csv", fit_out + "/partition.csv",
                  fs::copy_options::overwrite_existing);
    fs::copy_file(fit_partition + "/lattice.csv", fit_out + "/lattice.csv",
                  fs::copy_options::overwrite_existing);
    {
      nlohmann::json acc;
      auto put = [&](const char* name, const AcceptStats& s) {
        acc[name] = {{"attempts", s.attempts}, {"accepts", s.accepts}, {"rate", s.rate()}};
      };
      put("beta", draws.stats.beta);
      put("epsilon", draws.stats.epsilon);
      put("delta", draws.stats.delta);
      put("gamma", draws.stats.gamma);
      put("birth", draws.stats.birth);
      put("death", draws.stats.death);
      put("move", draws.stats.move);
      std::ofstream f(fit_out + "/acceptance.json");
      f << acc.dump(2) << "\n";
    }
    RunManifest m;
    m.command = "fit";
    m.config_snapshot = serialize_config(cfg);
    m.inputs = {fit_data, "partition_manifest:" + fit_partition + "/manifest.json"};
    m.outputs = {"trace.csv", "draws/", "acceptance.json", "partition.csv", "lattice.csv"};
    m.seed = cfg.seed;
    m.family = pm.family;
    m.domain = pm.domain;
    m.parent_manifest_hash = hash_file_hex(fit_partition + "/manifest.json");
    m.duration_seconds = timer.seconds();
    write_manifest(fit_out + "/manifest.json", m);
    std::cout << "fit complete: " << draws.snapshots.size() << " snapshots, walltime "
              << m.duration_seconds << " s\n";
    return kExitOk;
  }

  auto predict_at_targets = [](const FitArtifacts& a, const std::string& targets_csv,
                               double level) {
    SpatialDataset targets = read_dataset_csv(targets_csv, a.family, a.domain);
    auto labels = assign_new_locations(targets.locations, a.partition);
    PredictiveSummary s = posterior_predict(a.draws, targets.locations, targets.covariates,
                                            labels, a.layers, a.family, level);
    return std::make_pair(std::move(targets), std::move(s));
  };

  if (pre->parsed()) {
    Timer timer;
    FitArtifacts a = load_fit_dir(pre_fit);
    auto [targets, summary] = predict_at_targets(a, pre_targets, pre_level);
    fs::create_directories(pre_out);
    write_predictions_csv(pre_out + "/predictions.csv", summary);
    RunManifest m;
    m.command = "predict";
    m.config_snapshot = a.manifest.config_snapshot;
    m.inputs = {pre_fit, pre_targets};
    m.outputs = {"predictions.csv"};
    m.seed = a.manifest.seed;
    m.family = a.manifest.family;
    m.domain = a.manifest.domain;
    m.parent_manifest_hash = hash_file_hex(pre_fit + "/manifest.json");
    m.duration_seconds = timer.seconds();
    write_manifest(pre_out + "/manifest.json", m);
    return kExitOk;
  }

  if (eva->parsed()) {
    Timer timer;
    FitArtifacts a = load_fit_dir(eva_fit);
    check_lineage(a.manifest, force);
    auto [targets, summary] = predict_at_targets(a, eva_targets, 0.0);
    fs::create_directories(eva_out);
    nlohmann::json metrics;
    metrics["rcvmspe"] = rcvmspe(summary.resp_mean, targets.responses);
    if (a.family == Family::Bernoulli)
      metrics["auc"] = auc(summary.resp_mean, targets.responses);
    {
      std::ofstream f(eva_out + "/metrics.json");
      f << metrics.dump(2) << "\n";
    }
    RunManifest m;
    m.command = "evaluate";
    m.config_snapshot = a.manifest.config_snapshot;
    m.inputs = {eva_fit, eva_targets};
    m.outputs = {"metrics.json"};
    m.seed = a.manifest.seed;
    m.family = a.manifest.family;
    m.domain = a.manifest.domain;
    m.parent_manifest_hash = hash_file_hex(eva_fit + "/manifest.json");
    m.duration_seconds = timer.seconds();
    write_manifest(eva_out + "/manifest.json", m);
    return kExitOk;
  }

  if (sur->parsed()) {
    Timer timer;
    FitArtifacts a = load_fit_dir(sur_fit);
    GridSpec spec{a.domain, nx, ny};
    SurfaceSummary s = surface_summary(a.draws, spec, a.partition, a.layers, a.family);
    fs::create_directories(sur_out);
    write_surface_csv(sur_out + "/surface_mean.csv", s.grid, s.summary.resp_mean);
    write_surface_csv(sur_out + "/surface_sd.csv", s.grid, s.summary.resp_sd);
    write_surface_csv(sur_out + "/surface_eta_mean.csv", s.grid, s.summary.eta_mean);
    write_surface_csv(sur_out + "/surface_eta_sd.csv", s.grid, s.summary.eta_sd);
    RunManifest m;
    m.command = "surface";
    m.config_snapshot = a.manifest.config_snapshot;
    m.inputs = {sur_fit};
    m.outputs = {"surface_mean.csv", "surface_sd.csv", "surface_eta_mean.csv",
                 "surface_eta_sd.csv"};
    m.seed = a.manifest.seed;
    m.family = a.manifest.family;
    m.domain = a.manifest.domain;
    m.parent_manifest_hash = hash_file_hex(sur_fit + "/manifest.json");
    m.duration_seconds = timer.seconds();
    write_manifest(sur_out + "/manifest.json", m);
    return kExitOk;
  }

  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
