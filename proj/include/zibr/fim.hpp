#pragma once

#include "zibr/model.hpp"
#include "zibr/packed_data.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace zibr {

/// Parameter order shared by every derivative, accumulator and SE vector:
///   a, b, alpha[0..p), beta[0..r), sigma1_sq, sigma2_sq, phi
std::vector<std::string> parameter_manifest(int p, int r);
Eigen::VectorXd flatten(const ZibrParams& params);

struct ScoreHessian {
  Eigen::VectorXd score;
  Eigen::MatrixXd hessian;
};

/// Analytic gradient and Hessian of the complete-data log-likelihood w.r.t. theta
/// (natural scales: variances, phi).
ScoreHessian score_and_hessian(const ZibrParams& params, const PackedData& data,
                               const RandomEffects& effects);

/// Stochastic approximation of the observed information (Louis):
///   D <- D + gamma (score - D)
///   G <- G + gamma (hessian + score score' - G)
///   H  = G - D D'
struct FimAccumulator {
  Eigen::VectorXd d;
  Eigen::MatrixXd g;
  Eigen::MatrixXd h;
  std::vector<std::string> manifest;
  int updates = 0;

  static FimAccumulator zeros(int p, int r);
};

FimAccumulator fim_update(const FimAccumulator& acc, const Eigen::VectorXd& score,
                          const Eigen::MatrixXd& hessian, double gamma);

/// Multi-chain update: score averaged over chains, hessian + score score' averaged over chains.
FimAccumulator fim_update(const FimAccumulator& acc, std::span<const ScoreHessian> per_chain,
                          double gamma);

struct StandardErrors {
  std::optional<Eigen::VectorXd> se;
  std::optional<Eigen::MatrixXd> covariance;
  double min_eigenvalue = 0.0;  // of -H
};

/// sqrt(diag((-H)^-1)) when -H is positive definite; otherwise no SEs and the offending eigenvalue.
StandardErrors standard_errors(const FimAccumulator& acc);
StandardErrors standard_errors(const Eigen::MatrixXd& h);

}  // namespace zibr
