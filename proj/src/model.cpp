#include "zibr/model.hpp"

#include "zibr/errors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

namespace zibr {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double normal_log_density(double x, double mean, double var) {
  const double d = x - mean;
  if (var <= 0.0) {
    // Degenerate component: point mass at the mean, counted with unit weight.
    if (d == 0.0) return 0.0;
    throw DomainError("random effect deviates from its mean under a non-positive variance");
  }
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

}  // namespace

bool ZibrParams::all_finite() const {
  return std::isfinite(phi) && std::isfinite(a) && std::isfinite(b) && alpha.allFinite() &&
         beta.allFinite() && std::isfinite(sigma1_sq) && std::isfinite(sigma2_sq);
}

void ZibrParams::validate() const {
  if (!all_finite()) throw DomainError("parameters contain non-finite values");
  if (!(phi > 0.0)) throw DomainError("phi must be positive");
  if (sigma1_sq < 0.0 || sigma2_sq < 0.0) throw DomainError("random-effect variances must be >= 0");
}

std::size_t Dataset::total_observations() const {
  std::size_t total = 0;
  for (const auto& ind : individuals) total += ind.obs.size();
  return total;
}

void Dataset::validate() const {
  for (const auto& ind : individuals) {
    for (const auto& o : ind.obs) {
      if (o.x.size() != p || o.z.size() != r) {
        std::ostringstream msg;
        msg << "individual '" << ind.id << "' at time " << o.time << " has covariate lengths ("
            << o.x.size() << ", " << o.z.size() << "), expected (" << p << ", " << r << ")";
        throw DimensionError(msg.str());
      }
      if (!(o.y >= 0.0 && o.y < 1.0)) {
        std::ostringstream msg;
        msg << "individual '" << ind.id << "' at time " << o.time << " has y = " << o.y
            << " outside [0, 1)";
        throw ValidationError(msg.str());
      }
    }
  }
}

Dataset select_covariates(const Dataset& data, const std::vector<int>& x_keep,
                          const std::vector<int>& z_keep) {
  auto check = [](const std::vector<int>& keep, int width, const char* what) {
    for (int j : keep) {
      if (j < 0 || j >= width) {
        throw DimensionError(std::string(what) + " column index " + std::to_string(j) +
                             " out of range [0, " + std::to_string(width) + ")");
      }
    }
  };
  check(x_keep, data.p, "x");
  check(z_keep, data.r, "z");
  auto pick = [](const Eigen::VectorXd& v, const std::vector<int>& keep) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) out[static_cast<Eigen::Index>(j)] = v[keep[j]];
    return out;
  };
  Dataset out;
  out.p = static_cast<int>(x_keep.size());
  out.r = static_cast<int>(z_keep.size());
  for (int j : x_keep) {
    if (static_cast<std::size_t>(j) < data.x_names.size()) out.x_names.push_back(data.x_names[j]);
  }
  for (int j : z_keep) {
    if (static_cast<std::size_t>(j) < data.z_names.size()) out.z_names.push_back(data.z_names[j]);
  }
  out.individuals.reserve(data.n());
  for (const auto& ind : data.individuals) {
    Individual copy;
    copy.id = ind.id;
    copy.obs.reserve(ind.obs.size());
    for (const auto& o : ind.obs) {
      copy.obs.push_back(Observation{o.time, o.y, pick(o.x, x_keep), pick(o.z, z_keep)});
    }
    out.individuals.push_back(std::move(copy));
  }
  return out;
}

double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double linear_predictor_p(const ZibrParams& params, double a_i, const Eigen::VectorXd& x) {
  if (x.size() != params.alpha.size()) {
    throw DimensionError("x has length " + std::to_string(x.size()) + " but alpha has length " +
                         std::to_string(params.alpha.size()));
  }
  return a_i + x.dot(params.alpha);
}

double linear_predictor_u(const ZibrParams& params, double b_i, const Eigen::VectorXd& z) {
  if (z.size() != params.beta.size()) {
    throw DimensionError("z has length " + std::to_string(z.size()) + " but beta has length " +
                         std::to_string(params.beta.size()));
  }
  return b_i + z.dot(params.beta);
}

double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

double beta_log_density(double y, double u, double phi) {
  if (!(y > 0.0 && y < 1.0)) throw DomainError("beta_log_density: y must lie in (0, 1)");
  if (!(u > 0.0 && u < 1.0)) throw DomainError("beta_log_density: u must lie in (0, 1)");
  if (!(phi > 0.0) || !std::isfinite(phi)) throw DomainError("beta_log_density: phi must be positive");
  const double s1 = u * phi;
  const double s2 = (1.0 - u) * phi;
  return log_gamma(phi) - log_gamma(s1) - log_gamma(s2) + (s1 - 1.0) * std::log(y) +
         (s2 - 1.0) * std::log1p(-y);
}

double observation_loglik_given_effects(const ZibrParams& params, const Individual& ind, double a_i,
                                        double b_i) {
  double total = 0.0;
  for (const auto& o : ind.obs) {
    const double eta_p = linear_predictor_p(params, a_i, o.x);
    if (o.y == 0.0) {
      total += log_sigmoid(-eta_p);
    } else {
      const double eta_u = linear_predictor_u(params, b_i, o.z);
      const double s1 = sigmoid(eta_u) * params.phi;
      const double s2 = sigmoid(-eta_u) * params.phi;
      total += log_sigmoid(eta_p) + log_gamma(params.phi) - log_gamma(s1) - log_gamma(s2) +
               (s1 - 1.0) * std::log(o.y) + (s2 - 1.0) * std::log1p(-o.y);
    }
  }
  return total;
}

double random_effect_log_prior(const ZibrParams& params, double a_i, double b_i) {
  return normal_log_density(a_i, params.a, params.sigma1_sq) +
         normal_log_density(b_i, params.b, params.sigma2_sq);
}

void check_dimensions(const ZibrParams& params, const Dataset& data) {
  if (params.p() != data.p || params.r() != data.r) {
    std::ostringstream msg;
    msg << "parameter dimensions (p=" << params.p() << ", r=" << params.r()
        << ") do not match data (p=" << data.p << ", r=" << data.r << ")";
    throw DimensionError(msg.str());
  }
}

void check_dimensions(const ZibrParams& params, const Dataset& data, const RandomEffects& effects) {
  check_dimensions(params, data);
  if (static_cast<std::size_t>(effects.rows()) != data.n()) {
    throw DimensionError("random effects have " + std::to_string(effects.rows()) +
                         " rows for " + std::to_string(data.n()) + " individuals");
  }
}

double complete_loglik(const ZibrParams& params, const Dataset& data, const RandomEffects& effects) {
  check_dimensions(params, data, effects);
  double total = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const double a_i = effects(static_cast<Eigen::Index>(i), 0);
    const double b_i = effects(static_cast<Eigen::Index>(i), 1);
    total += random_effect_log_prior(params, a_i, b_i);
    total += observation_loglik_given_effects(params, data.individuals[i], a_i, b_i);
  }
  return total;
}

}  // namespace zibr
