#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <limits>
#include <map>
#include <vector>

#include "adaptbases/common.hpp"
#include "adaptbases/dataset.hpp"
#include "adaptbases/delaunay.hpp"

namespace adaptbases {

struct LatticeAggregate {
  std::vector<Location> points;     // occupied lattice points only
  Eigen::VectorXd residual_means;   // eps_bar per occupied point
  std::vector<int> counts;          // observations mapped to each point
};

// sqrt(L) x sqrt(L) regular grid of cell centers over the domain; each
// observation maps to its nearest lattice point, empty cells are dropped.
inline LatticeAggregate aggregate_to_lattice(const std::vector<Location>& locs,
                                             const Eigen::VectorXd& residuals,
                                             int lattice_size, const Rect& domain) {
  const int m = static_cast<int>(std::lround(std::sqrt(double(lattice_size))));
  if (m * m != lattice_size)
    throw Error("NonSquareLattice", "lattice size must be a perfect square");
  const double dx = domain.width() / m, dy = domain.height() / m;
  std::vector<Location> grid(lattice_size);
  for (int iy = 0; iy < m; ++iy)
    for (int ix = 0; ix < m; ++ix)
      grid[iy * m + ix] = {domain.xmin + (ix + 0.5) * dx, domain.ymin + (iy + 0.5) * dy};

  std::vector<double> sums(lattice_size, 0.0);
  std::vector<int> counts(lattice_size, 0);
  for (size_t i = 0; i < locs.size(); ++i) {
    int best = 0;
    double bestd = std::numeric_limits<double>::infinity();
    for (int l = 0; l < lattice_size; ++l) {
      const double d = sq_dist(locs[i], grid[l]);
      if (d < bestd) {
        bestd = d;
        best = l;
      }
    }
    sums[best] += residuals[static_cast<int>(i)];
    counts[best] += 1;
  }

  LatticeAggregate out;
  std::vector<double> means;
  for (int l = 0; l < lattice_size; ++l) {
    if (counts[l] == 0) continue;
    out.points.push_back(grid[l]);
    means.push_back(sums[l] / counts[l]);
    out.counts.push_back(counts[l]);
  }
  out.residual_means =
      Eigen::Map<Eigen::VectorXd>(means.data(), static_cast<int>(means.size()));
  return out;
}

struct ClusterSet {
  std::vector<int> assignment;             // node index -> label in 1..K
  std::vector<std::vector<int>> members;   // per-cluster node index lists
  std::vector<double> residual_means;      // eps_bar per cluster
  std::vector<int> sizes;                  // node counts per cluster
  std::vector<double> merge_trace;         // accepted merge dissimilarities
};

struct PartitionAssignment {
  std::vector<int> labels;          // per observation, 1..K
  std::vector<Location> lattice;    // occupied lattice points
  std::vector<int> lattice_labels;  // per lattice point, 1..K
  std::vector<double> lattice_eps_bar;

  int k_effective() const {
    int kmax = 0;
    for (int l : labels) kmax = std::max(kmax, l);
    return kmax;
  }
};

namespace detail {

struct SpanStats {
  int count = 0;
  double dist_sum = 0.0;
};

}  // namespace detail

// Pooled-mean dissimilarity between two clusters:
//   [N1 N2/(N1+N2) (eps1 - eps2)^2] / Ebar,
// where Ebar averages Euclidean distance over Voronoi-neighbor pairs that
// span the clusters; +infinity when no spanning pair exists.
inline double cluster_dissimilarity(const std::vector<int>& c1, const std::vector<int>& c2,
                                    const Eigen::VectorXd& residual_means,
                                    const NeighborGraph& graph) {
  double sum1 = 0.0, sum2 = 0.0;
  for (int i : c1) sum1 += residual_means[i];
  for (int i : c2) sum2 += residual_means[i];
  const double n1 = double(c1.size()), n2 = double(c2.size());
  const double e1 = sum1 / n1, e2 = sum2 / n2;

  int span = 0;
  double dsum = 0.0;
  for (int i : c1)
    for (int j : c2)
      if (graph.has_edge(i, j)) {
        ++span;
        dsum += dist(graph.nodes[i], graph.nodes[j]);
      }
  if (span == 0) return std::numeric_limits<double>::infinity();
  const double ebar = dsum / span;
  const double diff = e1 - e2;
  return (n1 * n2 / (n1 + n2)) * diff * diff / ebar;
}

// Agglomerative merging from singletons down to K clusters; at each step the
// pair with the minimum finite dissimilarity merges, ties broken by the
// lexicographically smallest label pair, and the merged cluster keeps the
// smaller label.
inline ClusterSet agglomerative_cluster(const Eigen::VectorXd& residual_means,
                                        const NeighborGraph& graph, int K) {
  const int n = static_cast<int>(graph.nodes.size());
  if (n < K) throw Error("DisconnectedGraph", "fewer lattice nodes than clusters requested");

  // live clusters keyed by their current (0-based) label
  std::map<int, std::vector<int>> members;
  std::map<int, double> sums;
  for (int i = 0; i < n; ++i) {
    members[i] = {i};
    sums[i] = residual_means[i];
  }
  // spanning-edge stats per live cluster pair
  std::map<std::pair<int, int>, detail::SpanStats> span;
  for (const auto& [a, b] : graph.edges) {
    auto& s = span[{a, b}];
    s.count += 1;
    s.dist_sum += dist(graph.nodes[a], graph.nodes[b]);
  }

  ClusterSet out;
  while (static_cast<int>(members.size()) > K) {
    double best = std::numeric_limits<double>::infinity();
    std::pair<int, int> best_pair{-1, -1};
    for (const auto& [key, s] : span) {
      const auto [k1, k2] = key;
      const double n1 = double(members[k1].size()), n2 = double(members[k2].size());
      const double e1 = sums[k1] / n1, e2 = sums[k2] / n2;
      const double ebar = s.dist_sum / s.count;
      const double diff = e1 - e2;
      const double d = (n1 * n2 / (n1 + n2)) * diff * diff / ebar;
      if (d < best) {
        best = d;
        best_pair = key;
      }
    }
    if (best_pair.first < 0)
      throw Error("DisconnectedGraph",
                  "graph disconnects into " + std::to_string(members.size()) +
                      " components; cannot reach K=" + std::to_string(K));

    const auto [k1, k2] = best_pair;  // k1 < k2; min label survives
    out.merge_trace.push_back(best);
    auto& m1 = members[k1];
    auto& m2 = members[k2];
    m1.insert(m1.end(), m2.begin(), m2.end());
    sums[k1] += sums[k2];
    members.erase(k2);
    sums.erase(k2);

    // fold k2's spanning stats into k1
    std::map<std::pair<int, int>, detail::SpanStats> updates;
    for (auto it = span.begin(); it != span.end();) {
      const auto [a, b] = it->first;
      if (a == k2 || b == k2) {
        const int other = (a == k2) ? b : a;
        if (other != k1) {
          auto key = std::minmax(other, k1);
          auto& u = updates[{key.first, key.second}];
          u.count += it->second.count;
          u.dist_sum += it->second.dist_sum;
        }
        it = span.erase(it);
      } else {
        ++it;
      }
    }
    for (const auto& [key, s] : updates) {
      auto& t = span[key];
      t.count += s.count;
      t.dist_sum += s.dist_sum;
    }
  }

  // compact surviving labels to 1..K in ascending order
  out.assignment.assign(n, 0);
  int label = 0;
  for (const auto& [k, mem] : members) {
    ++label;
    out.members.push_back(mem);
    out.sizes.push_back(static_cast<int>(mem.size()));
    double s = 0.0;
    for (int i : mem) {
      out.assignment[i] = label;
      s += residual_means[i];
    }
    out.residual_means.push_back(s / mem.size());
  }
  return out;
}

// Each observation inherits the label of its nearest lattice point; ties go
// to the lowest lattice index.
inline PartitionAssignment assign_observations(const std::vector<Location>& locs,
                                               const LatticeAggregate& lattice,
                                               const ClusterSet& clusters) {
  PartitionAssignment out;
  out.lattice = lattice.points;
  out.lattice_labels = clusters.assignment;
  out.lattice_eps_bar.assign(lattice.residual_means.data(),
                             lattice.residual_means.data() + lattice.residual_means.size());
  out.labels.resize(locs.size());
  for (size_t i = 0; i < locs.size(); ++i) {
    int best = 0;
    double bestd = std::numeric_limits<double>::infinity();
    for (size_t l = 0; l < lattice.points.size(); ++l) {
      const double d = sq_dist(locs[i], lattice.points[l]);
      if (d < bestd) {
        bestd = d;
        best = static_cast<int>(l);
      }
    }
    out.labels[i] = clusters.assignment[best];
  }
  return out;
}

inline void write_partition_csv(const std::string& path, const std::vector<Location>& locs,
                                const std::vector<int>& labels) {
  std::ofstream f(path);
  if (!f) throw validation_error("IoError", "cannot open " + path + " for writing");
  f << "x,y,label\n";
  for (size_t i = 0; i < locs.size(); ++i)
    f << fmt_g17(locs[i].x) << ',' << fmt_g17(locs[i].y) << ',' << labels[i] << "\n";
}

inline void write_lattice_csv(const std::string& path, const PartitionAssignment& pa) {
  std::ofstream f(path);
  if (!f) throw validation_error("IoError", "cannot open " + path + " for writing");
  f << "x,y,label,eps_bar\n";
  for (size_t l = 0; l < pa.lattice.size(); ++l)
    f << fmt_g17(pa.lattice[l].x) << ',' << fmt_g17(pa.lattice[l].y) << ','
      << pa.lattice_labels[l] << ',' << fmt_g17(pa.lattice_eps_bar[l]) << "\n";
}

inline PartitionAssignment read_partition(const std::string& partition_csv,
                                          const std::string& lattice_csv) {
  PartitionAssignment pa;
  {
    std::ifstream f(partition_csv);
    if (!f) throw validation_error("IoError", "cannot open " + partition_csv);
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      auto t = detail::split_csv_line(line);
      pa.labels.push_back(std::stoi(t[2]));
    }
  }
  {
    std::ifstream f(lattice_csv);
    if (!f) throw validation_error("IoError", "cannot open " + lattice_csv);
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      auto t = detail::split_csv_line(line);
      pa.lattice.push_back({std::stod(t[0]), std::stod(t[1])});
      pa.lattice_labels.push_back(std::stoi(t[2]));
      pa.lattice_eps_bar.push_back(std::stod(t[3]));
    }
  }
  return pa;
}

}  // namespace adaptbases
