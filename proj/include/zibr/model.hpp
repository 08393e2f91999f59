#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace zibr {

/// Full parameter vector of the zero-inflated Beta mixed model.
///
/// Presence:  logit(p_it) = a_i + x_it' alpha,   a_i ~ N(a, sigma1_sq)
/// Abundance: logit(u_it) = b_i + z_it' beta,    b_i ~ N(b, sigma2_sq)
/// y_it = 0 with probability 1 - p_it, otherwise Beta(u_it phi, (1 - u_it) phi).
struct ZibrParams {
  double phi = 1.0;
  double a = 0.0;
  double b = 0.0;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  double sigma1_sq = 1.0;
  double sigma2_sq = 1.0;

  int p() const { return static_cast<int>(alpha.size()); }
  int r() const { return static_cast<int>(beta.size()); }

  /// Throws DomainError when phi <= 0, a variance is negative or anything is non-finite.
  void validate() const;
  bool all_finite() const;
};

struct Observation {
  double time = 0.0;
  double y = 0.0;
  Eigen::VectorXd x;  // logistic-part covariates, length p
  Eigen::VectorXd z;  // Beta-part covariates, length r
};

struct Individual {
  std::string id;
  std::vector<Observation> obs;
};

/// Longitudinal data; individuals may have different numbers of observations.
struct Dataset {
  std::vector<Individual> individuals;
  int p = 0;
  int r = 0;
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;

  std::size_t n() const { return individuals.size(); }
  std::size_t total_observations() const;

  /// Checks covariate dimensions and 0 <= y < 1 everywhere.
  void validate() const;
};

/// Keeps the listed x and z columns (in the given order); names follow along.
/// Throws DimensionError on an out-of-range index.
Dataset select_covariates(const Dataset& data, const std::vector<int>& x_keep,
                          const std::vector<int>& z_keep);

/// Row i holds (a_i, b_i).
using RandomEffects = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

double log_sigmoid(double x);
double sigmoid(double x);

/// (sigmoid(x), sigmoid(-x)) from a single exponential.
inline std::pair<double, double> sigmoid_pair(double x) {
  const double e = std::exp(-std::abs(x));
  const double big = 1.0 / (1.0 + e);
  const double small = e * big;
  return x >= 0.0 ? std::pair{big, small} : std::pair{small, big};
}

/// a_i + x' alpha. Throws DimensionError when x does not match alpha.
double linear_predictor_p(const ZibrParams& params, double a_i, const Eigen::VectorXd& x);
/// b_i + z' beta.
double linear_predictor_u(const ZibrParams& params, double b_i, const Eigen::VectorXd& z);

/// log Beta(y; u phi, (1 - u) phi). Throws DomainError outside 0 < y, u < 1, phi > 0.
double beta_log_density(double y, double u, double phi);

/// Thread-safe log|Gamma(x)|.
double log_gamma(double x);

/// Sum over t of the two-part mixture log-density given (a_i, b_i); no prior term.
double observation_loglik_given_effects(const ZibrParams& params, const Individual& ind, double a_i,
                                        double b_i);

/// log N((a_i, b_i); (a, b), diag(sigma1_sq, sigma2_sq)).
double random_effect_log_prior(const ZibrParams& params, double a_i, double b_i);

/// Complete-data log-likelihood log p(y, phi; theta).
double complete_loglik(const ZibrParams& params, const Dataset& data, const RandomEffects& effects);

/// Throws DimensionError when params, data and effects disagree.
void check_dimensions(const ZibrParams& params, const Dataset& data);
void check_dimensions(const ZibrParams& params, const Dataset& data, const RandomEffects& effects);

}  // namespace zibr
