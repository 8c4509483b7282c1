#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "adaptbases/common.hpp"

namespace adaptbases {

// sqrt(mean((Z - Zhat)^2)) on held-out observations.
inline double rcvmspe(const Eigen::VectorXd& predicted, const Eigen::VectorXd& observed) {
  if (predicted.size() != observed.size() || predicted.size() == 0)
    throw Error("LengthMismatch", "rcvmspe inputs must have equal nonzero length");
  return std::sqrt((predicted - observed).squaredNorm() / double(predicted.size()));
}

// Mann-Whitney AUC: probability a random positive outscores a random
// negative, ties counted 0.5.
inline double auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  if (scores.size() != labels.size())
    throw Error("LengthMismatch", "scores and labels must have equal length");
  long npos = 0, nneg = 0;
  for (int i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1.0) ++npos;
    else if (labels[i] == 0.0) ++nneg;
    else throw Error("DegenerateLabels", "labels must be 0 or 1");
  }
  if (npos == 0 || nneg == 0)
    throw Error("DegenerateLabels", "need at least one positive and one negative label");
  double wins = 0.0;
  for (int i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1.0) continue;
    for (int j = 0; j < labels.size(); ++j) {
      if (labels[j] != 0.0) continue;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / (double(npos) * double(nneg));
}

}  // namespace adaptbases
