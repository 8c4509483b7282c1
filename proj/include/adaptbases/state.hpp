#pragma once

#include <Eigen/Dense>
#include <vector>

#include "adaptbases/common.hpp"

namespace adaptbases {

struct PartitionState {
  Eigen::VectorXd beta;    // length P
  std::vector<int> knots;  // active candidate-grid indices, insertion order
  Eigen::VectorXd delta;   // length r = knots.size()
  double epsilon = 1.0;    // bandwidth
  double tau2 = 1.0;

  int r() const { return static_cast<int>(knots.size()); }
};

struct ModelState {
  std::vector<PartitionState> parts;
  Eigen::VectorXd gamma;  // global bisquare coefficients, length G
  double rho2 = 1.0;

  int k() const { return static_cast<int>(parts.size()); }
};

}  // namespace adaptbases
