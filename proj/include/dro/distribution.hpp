#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace dro {

/// Finite atomic probability measure on R^m.
struct DiscreteDistribution {
  std::vector<Eigen::VectorXd> atoms;
  Eigen::VectorXd weights;

  bool is_normalized(double tol = 1e-9) const {
    if (weights.size() != static_cast<Eigen::Index>(atoms.size())) return false;
    if (weights.size() > 0 && weights.minCoeff() < 0.0) return false;
    return std::abs(weights.sum() - 1.0) <= tol;
  }
};

std::string to_json_string(const DiscreteDistribution& dist);

}  // namespace dro
