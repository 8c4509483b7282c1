#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adaptbases/common.hpp"

namespace adaptbases {

enum class Family { Poisson, Bernoulli };

inline std::string to_string(Family f) {
  return f == Family::Poisson ? "poisson" : "bernoulli";
}

inline Family family_from_string(const std::string& s) {
  if (s == "poisson") return Family::Poisson;
  if (s == "bernoulli") return Family::Bernoulli;
  throw validation_error("InvalidFamily", "unknown family '" + s + "'");
}

struct SpatialDataset {
  std::vector<Location> locations;
  Eigen::VectorXd responses;
  Eigen::MatrixXd covariates;  // N x P, P may be 0
  Family family = Family::Poisson;
  Rect domain_bounds;

  int n() const { return static_cast<int>(locations.size()); }
  int p() const { return static_cast<int>(covariates.cols()); }

  void validate() const {
    const int N = n();
    if (N == 0) throw validation_error("EmptyDataset", "dataset has no observations");
    if (responses.size() != N || covariates.rows() != N)
      throw validation_error("LengthMismatch", "locations/responses/covariates disagree on N");
    std::set<std::pair<double, double>> seen;
    for (const auto& s : locations) {
      if (!std::isfinite(s.x) || !std::isfinite(s.y))
        throw validation_error("NonFiniteLocation", "non-finite coordinate");
      if (!domain_bounds.contains(s))
        throw validation_error("LocationOutOfBounds", "location outside domain bounds");
      if (!seen.insert({s.x, s.y}).second)
        throw validation_error("DuplicateLocation", "duplicate location");
    }
    for (int i = 0; i < N; ++i) {
      const double z = responses[i];
      if (family == Family::Poisson) {
        if (z < 0 || z != std::floor(z))
          throw validation_error("InvalidResponse", "Poisson response must be a nonnegative integer");
      } else {
        if (z != 0.0 && z != 1.0)
          throw validation_error("InvalidResponse", "Bernoulli response must be 0 or 1");
      }
    }
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

// Dataset CSV: header `x,y,z[,x1..xP]`.
inline void write_dataset_csv(const std::string& path, const SpatialDataset& data) {
  std::ofstream f(path);
  if (!f) throw validation_error("IoError", "cannot open " + path + " for writing");
  f << "x,y,z";
  for (int j = 0; j < data.p(); ++j) f << ",x" << (j + 1);
  f << "\n";
  for (int i = 0; i < data.n(); ++i) {
    f << fmt_g17(data.locations[i].x) << ',' << fmt_g17(data.locations[i].y) << ','
      << fmt_g17(data.responses[i]);
    for (int j = 0; j < data.p(); ++j) f << ',' << fmt_g17(data.covariates(i, j));
    f << "\n";
  }
}

inline SpatialDataset read_dataset_csv(const std::string& path, Family family,
                                       const Rect& domain) {
  std::ifstream f(path);
  if (!f) throw validation_error("IoError", "cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw validation_error("EmptyDataset", path + " is empty");
  auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "x" || header[1] != "y" || header[2] != "z")
    throw validation_error("BadHeader", path + ": expected header x,y,z[,x1..xP]");
  const int P = static_cast<int>(header.size()) - 3;

  std::vector<Location> locs;
  std::vector<double> zs;
  std::vector<double> xs;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (static_cast<int>(fields.size()) != P + 3)
      throw validation_error("BadRow", path + ": row has wrong field count");
    locs.push_back({std::stod(fields[0]), std::stod(fields[1])});
    zs.push_back(std::stod(fields[2]));
    for (int j = 0; j < P; ++j) xs.push_back(std::stod(fields[3 + j]));
  }
  const int N = static_cast<int>(locs.size());
  SpatialDataset data;
  data.locations = std::move(locs);
  data.responses = Eigen::Map<Eigen::VectorXd>(zs.data(), N);
  data.covariates.resize(N, P);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < P; ++j) data.covariates(i, j) = xs[i * P + j];
  data.family = family;
  data.domain_bounds = domain;
  data.validate();
  return data;
}

}  // namespace adaptbases
