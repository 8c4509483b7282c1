#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "adaptbases/sampler.hpp"

namespace adaptbases {

// trace.csv: iteration, log-likelihood, then r_k, eps_k, tau2_k per partition.
inline void write_trace_csv(const std::string& path, const PosteriorDraws& draws) {
  std::ofstream f(path);
  if (!f) throw validation_error("IoError", "cannot open " + path + " for writing");
  const int K = draws.r_trace.empty() ? 0 : static_cast<int>(draws.r_trace[0].size());
  f << "iteration,loglik";
  for (int k = 1; k <= K; ++k) f << ",r_" << k << ",eps_" << k << ",tau2_" << k;
  f << "\n";
  for (size_t it = 0; it < draws.loglik_trace.size(); ++it) {
    f << (it + 1) << ',' << fmt_g17(draws.loglik_trace[it]);
    for (int k = 0; k < K; ++k)
      f << ',' << draws.r_trace[it][k] << ',' << fmt_g17(draws.eps_trace[it][k]) << ','
        << fmt_g17(draws.tau2_trace[it][k]);
    f << "\n";
  }
}

// Serializable snapshot with knot indices resolved to coordinates.
struct PredictionDraw {
  std::vector<Eigen::VectorXd> beta;             // per partition
  std::vector<std::vector<Location>> knot_locs;  // per partition
  std::vector<Eigen::VectorXd> delta;            // per partition
  std::vector<double> epsilon;                   // per partition
  std::vector<double> tau2;                      // per partition
  Eigen::VectorXd gamma;
  double rho2 = 1.0;
};

inline PredictionDraw resolve_draw(const ModelState& st,
                                   const std::vector<CandidateKnotGrid>& grids) {
  PredictionDraw d;
  const int K = st.k();
  d.beta.resize(K);
  d.knot_locs.resize(K);
  d.delta.resize(K);
  d.epsilon.resize(K);
  d.tau2.resize(K);
  for (int k = 0; k < K; ++k) {
    d.beta[k] = st.parts[k].beta;
    for (int idx : st.parts[k].knots) d.knot_locs[k].push_back(grids[k].knots[idx]);
    d.delta[k] = st.parts[k].delta;
    d.epsilon[k] = st.parts[k].epsilon;
    d.tau2[k] = st.parts[k].tau2;
  }
  d.gamma = st.gamma;
  d.rho2 = st.rho2;
  return d;
}

// Per-snapshot CSV rows: kind,partition,index,x,y,value with kinds
// beta, knot (x,y = knot location, value = coefficient), epsilon, tau2,
// gamma, rho2. Partition and index are 1-based where meaningful, 0 otherwise.
inline void write_snapshot_csv(const std::string& path, const PredictionDraw& d) {
  std::ofstream f(path);
  if (!f) throw validation_error("IoError", "cannot open " + path + " for writing");
  f << "kind,partition,index,x,y,value\n";
  const int K = static_cast<int>(d.epsilon.size());
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < d.beta[k].size(); ++j)
      f << "beta," << (k + 1) << ',' << (j + 1) << ",0,0," << fmt_g17(d.beta[k][j]) << "\n";
    for (size_t m = 0; m < d.knot_locs[k].size(); ++m)
      f << "knot," << (k + 1) << ',' << (m + 1) << ',' << fmt_g17(d.knot_locs[k][m].x) << ','
        << fmt_g17(d.knot_locs[k][m].y) << ',' << fmt_g17(d.delta[k][static_cast<int>(m)])
        << "\n";
    f << "epsilon," << (k + 1) << ",0,0,0," << fmt_g17(d.epsilon[k]) << "\n";
    f << "tau2," << (k + 1) << ",0,0,0," << fmt_g17(d.tau2[k]) << "\n";
  }
  for (int j = 0; j < d.gamma.size(); ++j)
    f << "gamma,0," << (j + 1) << ",0,0," << fmt_g17(d.gamma[j]) << "\n";
  f << "rho2,0,0,0,0," << fmt_g17(d.rho2) << "\n";
}

inline PredictionDraw read_snapshot_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw validation_error("IoError", "cannot open " + path);
  std::string line;
  std::getline(f, line);
  struct Row {
    std::string kind;
    int part, index;
    double x, y, value;
  };
  std::vector<Row> rows;
  int K = 0, G = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto t = detail::split_csv_line(line);
    Row r{t[0], std::stoi(t[1]), std::stoi(t[2]), std::stod(t[3]), std::stod(t[4]),
          std::stod(t[5])};
    K = std::max(K, r.part);
    if (r.kind == "gamma") G = std::max(G, r.index);
    rows.push_back(std::move(r));
  }
  PredictionDraw d;
  d.beta.resize(K);
  d.knot_locs.resize(K);
  d.delta.resize(K);
  d.epsilon.assign(K, 0.0);
  d.tau2.assign(K, 1.0);
  d.gamma = Eigen::VectorXd::Zero(G);
  std::vector<std::vector<double>> betas(K), deltas(K);
  for (const auto& r : rows) {
    if (r.kind == "beta") betas[r.part - 1].push_back(r.value);
    else if (r.kind == "knot") {
      d.knot_locs[r.part - 1].push_back({r.x, r.y});
      deltas[r.part - 1].push_back(r.value);
    } else if (r.kind == "epsilon") d.epsilon[r.part - 1] = r.value;
    else if (r.kind == "tau2") d.tau2[r.part - 1] = r.value;
    else if (r.kind == "gamma") d.gamma[r.index - 1] = r.value;
    else if (r.kind == "rho2") d.rho2 = r.value;
    else throw validation_error("BadRow", "unknown snapshot row kind '" + r.kind + "'");
  }
  for (int k = 0; k < K; ++k) {
    d.beta[k] = Eigen::Map<Eigen::VectorXd>(betas[k].data(), betas[k].size());
    d.delta[k] = Eigen::Map<Eigen::VectorXd>(deltas[k].data(), deltas[k].size());
  }
  return d;
}

inline std::string snapshot_name(size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "snapshot_%05zu.csv", i + 1);
  return buf;
}

inline void write_draws_dir(const std::string& dir, const PosteriorDraws& draws,
                            const std::vector<CandidateKnotGrid>& grids) {
  std::filesystem::create_directories(dir);
  for (size_t i = 0; i < draws.snapshots.size(); ++i)
    write_snapshot_csv(dir + "/" + snapshot_name(i), resolve_draw(draws.snapshots[i], grids));
}

inline std::vector<PredictionDraw> read_draws_dir(const std::string& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<PredictionDraw> out;
  for (const auto& p : files) out.push_back(read_snapshot_csv(p.string()));
  if (out.empty()) throw Error("EmptyDraws", "no snapshots found in " + dir);
  return out;
}

}  // namespace adaptbases
