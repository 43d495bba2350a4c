#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "rabikit/errors.hpp"

namespace rabikit {

// Pointwise lower/upper envelope of a fitted curve at a stated sigma level.
struct ConfidenceBand {
  std::vector<double> x;
  std::vector<double> lo;
  std::vector<double> hi;
  double sigma_level = 2.0;
};

// Outcome of a least-squares fit. `params` holds every declared model
// parameter (fixed ones at their pinned value); `covariance` rows/columns of
// fixed parameters are zero. residual_norm is the weighted sum of squared
// residuals.
struct FitResult {
  std::vector<std::string> param_names;
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;
  int dof = 0;
  ConfidenceBand band;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> pinned_params;  // parameters stuck at a bound

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < param_names.size(); ++i)
      if (param_names[i] == name) return static_cast<int>(i);
    throw ValidationError("FitResult: no parameter named '" + name + "'");
  }
  double value(const std::string& name) const {
    return params[index_of(name)];
  }
  double sigma(const std::string& name) const {
    const int i = index_of(name);
    return std::sqrt(std::max(0.0, covariance(i, i)));
  }
};

}  // namespace rabikit
