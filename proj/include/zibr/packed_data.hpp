#pragma once

#include "zibr/model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace zibr {

/// Column-flattened copy of a Dataset with per-observation logs precomputed.
/// Observations of individual i occupy rows [start[i], start[i+1]).
struct PackedData {
  std::vector<std::size_t> start;
  Eigen::VectorXd y;
  Eigen::VectorXd log_y;    // log y, 0 where y == 0
  Eigen::VectorXd log1m_y;  // log(1 - y)
  std::vector<unsigned char> positive;
  Eigen::MatrixXd x;  // total x p
  Eigen::MatrixXd z;  // total x r
  int p = 0;
  int r = 0;
  std::size_t n_positive = 0;

  static PackedData from(const Dataset& data);

  std::size_t n() const { return start.empty() ? 0 : start.size() - 1; }
  std::size_t total() const { return static_cast<std::size_t>(y.size()); }
  std::size_t begin(std::size_t i) const { return start[i]; }
  std::size_t end(std::size_t i) const { return start[i + 1]; }
};

/// Fixed-effect parts of both linear predictors, per observation, for one theta.
struct FixedPredictors {
  Eigen::VectorXd x_alpha;
  Eigen::VectorXd z_beta;
  double phi = 1.0;
  double lgamma_phi = 0.0;

  static FixedPredictors compute(const ZibrParams& params, const PackedData& data);
};

namespace kernel {

/// Logistic (presence) part of log p(y_i | a_i).
double logistic_part(const PackedData& data, const FixedPredictors& fixed, std::size_t i, double a_i);

/// Beta (abundance) part of log p(y_i | b_i), positive observations only.
double beta_part(const PackedData& data, const FixedPredictors& fixed, std::size_t i, double b_i);

/// Beta log-density with log y, log(1 - y) and lgamma(phi) supplied; eta = logit(u).
double beta_log_density_eta(double log_y, double log1m_y, double eta, double phi, double lgamma_phi);

}  // namespace kernel
}  // namespace zibr
