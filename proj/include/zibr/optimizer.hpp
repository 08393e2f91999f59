#pragma once

#include "zibr/model.hpp"
#include "zibr/packed_data.hpp"

#include <Eigen/Dense>

#include <functional>
#include <span>

namespace zibr {

struct OptimOptions {
  double gradient_tolerance = 1e-7;  // infinity norm
  int max_iterations = 100;
};

struct OptimResult {
  Eigen::VectorXd argmax;
  double objective_value = 0.0;
  int n_iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  bool separation = false;  // logistic part only
};

/// Objective value with gradient and Hessian in the optimizer's coordinates.
struct ObjectiveDerivatives {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

/// Per-observation derivatives of the Beta log-density w.r.t. eta = logit(u) and phi.
struct BetaTermDerivatives {
  double value;
  double d_eta;
  double d_phi;
  double d_eta_eta;
  double d_eta_phi;
  double d_phi_phi;
};

BetaTermDerivatives beta_term_derivatives(double log_y, double log1m_y, double eta, double phi,
                                          double lgamma_phi, double digamma_phi, double trigamma_phi);

/// Beta-part objective in coordinates (beta, log phi), averaged over the chains' effects:
///   (1/m) sum_l sum_{i,t: y>0} log Beta(y_it; u_it(b_i^l, beta) phi, (1 - u_it) phi).
ObjectiveDerivatives beta_part_objective(const PackedData& data, std::span<const RandomEffects> effects,
                                         const Eigen::VectorXd& beta, double log_phi);
double beta_part_value(const PackedData& data, std::span<const RandomEffects> effects,
                       const Eigen::VectorXd& beta, double log_phi);

/// Logistic-part objective in alpha, averaged over chains, offsets a_i^l.
ObjectiveDerivatives logistic_part_objective(const PackedData& data,
                                             std::span<const RandomEffects> effects,
                                             const Eigen::VectorXd& alpha);
double logistic_part_value(const PackedData& data, std::span<const RandomEffects> effects,
                           const Eigen::VectorXd& alpha);

/// Joint maximization over (beta, phi). argmax = (beta..., phi) with phi on its natural scale;
/// gradient_norm is measured in (beta, log phi).
OptimResult maximize_beta_part(const PackedData& data, std::span<const RandomEffects> effects,
                               const Eigen::VectorXd& beta_init, double phi_init,
                               const OptimOptions& options = {});

/// Newton-Raphson for alpha with the logistic-regression Hessian.
OptimResult maximize_logistic_part(const PackedData& data, std::span<const RandomEffects> effects,
                                   const Eigen::VectorXd& alpha_init,
                                   const OptimOptions& options = {});

namespace detail {

using DerivativeFn = std::function<ObjectiveDerivatives(const Eigen::VectorXd&)>;
using ValueFn = std::function<double(const Eigen::VectorXd&)>;

/// Damped Newton ascent with Armijo backtracking; falls back to steepest ascent when the
/// Hessian is not negative definite. Accepted steps never decrease the objective.
OptimResult newton_ascent(const DerivativeFn& derivs, const ValueFn& value, Eigen::VectorXd x0,
                          const OptimOptions& options, double max_step = 10.0);

}  // namespace detail
}  // namespace zibr
