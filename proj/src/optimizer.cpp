#include "zibr/optimizer.hpp"

#include "parallel_reduce.hpp"
#include "zibr/errors.hpp"
#include "zibr/reference.hpp"
#include "zibr/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace zibr {

BetaTermDerivatives beta_term_derivatives(double log_y, double log1m_y, double eta, double phi,
                                          double lgamma_phi, double digamma_phi,
                                          double trigamma_phi) {
  const auto [u, v] = sigmoid_pair(eta);  // v = 1 - u without cancellation
  const double w = u * v;
  const double s1 = u * phi;
  const double s2 = v * phi;
  const double psi1 = digamma(s1);
  const double psi2 = digamma(s2);
  const double tri1 = trigamma(s1);
  const double tri2 = trigamma(s2);
  const double resid = (log_y - log1m_y) - (psi1 - psi2);

  BetaTermDerivatives d;
  d.value = lgamma_phi - log_gamma(s1) - log_gamma(s2) + (s1 - 1.0) * log_y + (s2 - 1.0) * log1m_y;
  d.d_eta = phi * w * resid;
  d.d_phi = digamma_phi - u * psi1 - v * psi2 + u * log_y + v * log1m_y;
  d.d_eta_eta = phi * (w * (v - u) * resid - phi * w * w * (tri1 + tri2));
  d.d_eta_phi = w * (resid - phi * (u * tri1 - v * tri2));
  d.d_phi_phi = trigamma_phi - u * u * tri1 - v * v * tri2;
  return d;
}

namespace {

std::size_t n_chains_checked(const PackedData& data, std::span<const RandomEffects> effects) {
  if (effects.empty()) throw DimensionError("at least one chain of random effects is required");
  for (const auto& e : effects) {
    if (static_cast<std::size_t>(e.rows()) != data.n()) {
      throw DimensionError("random effects rows do not match the number of individuals");
    }
  }
  return effects.size();
}

Eigen::VectorXd linear_part(const Eigen::MatrixXd& design, const Eigen::VectorXd& coef,
                            std::size_t total) {
  if (design.cols() != coef.size()) throw DimensionError("coefficient length does not match design");
  if (coef.size() == 0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
  return design * coef;
}

}  // namespace

template <typename Reduce>
ObjectiveDerivatives beta_part_objective_impl(Reduce&& reduce, const PackedData& data, std::span<const RandomEffects> effects,
                                         const Eigen::VectorXd& beta, double log_phi) {
  const std::size_t m = n_chains_checked(data, effects);
  const Eigen::VectorXd z_beta = linear_part(data.z, beta, data.total());
  const int r = data.r;
  const Eigen::Index d = r + 1;
  const double phi = std::exp(log_phi);
  const double lg_phi = log_gamma(phi);
  const double dg_phi = digamma(phi);
  const double tg_phi = trigamma(phi);
  const std::size_t n = data.n();

  const Eigen::VectorXd total = reduce(m * n, 1 + d + d * d, [&](std::size_t unit, double* out) {
    const std::size_t l = unit / n;
    const std::size_t i = unit % n;
    const double b_i = effects[l](static_cast<Eigen::Index>(i), 1);
    double* grad = out + 1;
    double* hess = out + 1 + d;
    for (std::size_t k = data.begin(i); k < data.end(i); ++k) {
      if (!data.positive[k]) continue;
      const auto row = static_cast<Eigen::Index>(k);
      const BetaTermDerivatives t = beta_term_derivatives(
          data.log_y[row], data.log1m_y[row], b_i + z_beta[row], phi, lg_phi, dg_phi, tg_phi);
      out[0] += t.value;
      const double dl = phi * t.d_phi;
      const double dll = phi * phi * t.d_phi_phi + phi * t.d_phi;
      const double del = phi * t.d_eta_phi;
      for (int j = 0; j < r; ++j) {
        const double zj = data.z(row, j);
        grad[j] += t.d_eta * zj;
        for (int q = 0; q < r; ++q) hess[j * d + q] += t.d_eta_eta * zj * data.z(row, q);
        hess[j * d + r] += del * zj;
        hess[r * d + j] += del * zj;
      }
      grad[r] += dl;
      hess[r * d + r] += dll;
    }
  });

  const double scale = 1.0 / static_cast<double>(m);
  ObjectiveDerivatives out;
  out.value = total[0] * scale;
  out.gradient = total.segment(1, d) * scale;
  out.hessian = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                    total.data() + 1 + d, d, d) *
                scale;
  return out;
}

template <typename Reduce>
double beta_part_value_impl(Reduce&& reduce, const PackedData& data, std::span<const RandomEffects> effects,
                       const Eigen::VectorXd& beta, double log_phi) {
  const std::size_t m = n_chains_checked(data, effects);
  const Eigen::VectorXd z_beta = linear_part(data.z, beta, data.total());
  const double phi = std::exp(log_phi);
  const double lg_phi = log_gamma(phi);
  const std::size_t n = data.n();
  const Eigen::VectorXd total = reduce(m * n, 1, [&](std::size_t unit, double* out) {
    const std::size_t l = unit / n;
    const std::size_t i = unit % n;
    const double b_i = effects[l](static_cast<Eigen::Index>(i), 1);
    for (std::size_t k = data.begin(i); k < data.end(i); ++k) {
      if (!data.positive[k]) continue;
      const auto row = static_cast<Eigen::Index>(k);
      out[0] += kernel::beta_log_density_eta(data.log_y[row], data.log1m_y[row], b_i + z_beta[row],
                                             phi, lg_phi);
    }
  });
  return total[0] / static_cast<double>(m);
}

template <typename Reduce>
ObjectiveDerivatives logistic_part_objective_impl(Reduce&& reduce, const PackedData& data,
                                             std::span<const RandomEffects> effects,
                                             const Eigen::VectorXd& alpha) {
  const std::size_t m = n_chains_checked(data, effects);
  const Eigen::VectorXd x_alpha = linear_part(data.x, alpha, data.total());
  const int p = data.p;
  const std::size_t n = data.n();
  const Eigen::VectorXd total =
      reduce(m * n, 1 + p + p * p, [&](std::size_t unit, double* out) {
        const std::size_t l = unit / n;
        const std::size_t i = unit % n;
        const double a_i = effects[l](static_cast<Eigen::Index>(i), 0);
        double* grad = out + 1;
        double* hess = out + 1 + p;
        for (std::size_t k = data.begin(i); k < data.end(i); ++k) {
          const auto row = static_cast<Eigen::Index>(k);
          const double eta = a_i + x_alpha[row];
          const bool pos = data.positive[k] != 0;
          out[0] += pos ? log_sigmoid(eta) : log_sigmoid(-eta);
          const double prob = sigmoid(eta);
          const double resid = (pos ? 1.0 : 0.0) - prob;
          const double w = prob * sigmoid(-eta);
          for (int j = 0; j < p; ++j) {
            const double xj = data.x(row, j);
            grad[j] += resid * xj;
            for (int q = 0; q < p; ++q) hess[j * p + q] -= w * xj * data.x(row, q);
          }
        }
      });
  const double scale = 1.0 / static_cast<double>(m);
  ObjectiveDerivatives out;
  out.value = total[0] * scale;
  out.gradient = total.segment(1, p) * scale;
  out.hessian = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                    total.data() + 1 + p, p, p) *
                scale;
  return out;
}

template <typename Reduce>
double logistic_part_value_impl(Reduce&& reduce, const PackedData& data, std::span<const RandomEffects> effects,
                           const Eigen::VectorXd& alpha) {
  const std::size_t m = n_chains_checked(data, effects);
  const Eigen::VectorXd x_alpha = linear_part(data.x, alpha, data.total());
  const std::size_t n = data.n();
  const Eigen::VectorXd total = reduce(m * n, 1, [&](std::size_t unit, double* out) {
    const std::size_t l = unit / n;
    const std::size_t i = unit % n;
    const double a_i = effects[l](static_cast<Eigen::Index>(i), 0);
    for (std::size_t k = data.begin(i); k < data.end(i); ++k) {
      const double eta = a_i + x_alpha[static_cast<Eigen::Index>(k)];
      out[0] += data.positive[k] ? log_sigmoid(eta) : log_sigmoid(-eta);
    }
  });
  return total[0] / static_cast<double>(m);
}

ObjectiveDerivatives beta_part_objective(const PackedData& data, std::span<const RandomEffects> effects,
                                         const Eigen::VectorXd& beta, double log_phi) {
  return beta_part_objective_impl(detail::ParallelReduce{}, data, effects, beta, log_phi);
}

double beta_part_value(const PackedData& data, std::span<const RandomEffects> effects,
                       const Eigen::VectorXd& beta, double log_phi) {
  return beta_part_value_impl(detail::ParallelReduce{}, data, effects, beta, log_phi);
}

ObjectiveDerivatives logistic_part_objective(const PackedData& data,
                                             std::span<const RandomEffects> effects,
                                             const Eigen::VectorXd& alpha) {
  return logistic_part_objective_impl(detail::ParallelReduce{}, data, effects, alpha);
}

double logistic_part_value(const PackedData& data, std::span<const RandomEffects> effects,
                           const Eigen::VectorXd& alpha) {
  return logistic_part_value_impl(detail::ParallelReduce{}, data, effects, alpha);
}

namespace reference {

ObjectiveDerivatives beta_part_objective(const PackedData& data, std::span<const RandomEffects> effects,
                                         const Eigen::VectorXd& beta, double log_phi) {
  return beta_part_objective_impl(detail::SerialReduce{}, data, effects, beta, log_phi);
}

ObjectiveDerivatives logistic_part_objective(const PackedData& data,
                                             std::span<const RandomEffects> effects,
                                             const Eigen::VectorXd& alpha) {
  return logistic_part_objective_impl(detail::SerialReduce{}, data, effects, alpha);
}

}  // namespace reference

namespace detail {

OptimResult newton_ascent(const DerivativeFn& derivs, const ValueFn& value, Eigen::VectorXd x0,
                          const OptimOptions& options, double max_step) {
  OptimResult res;
  Eigen::VectorXd x = std::move(x0);
  ObjectiveDerivatives cur = derivs(x);
  const Eigen::Index d = x.size();
  res.gradient_norm = d > 0 ? cur.gradient.cwiseAbs().maxCoeff() : 0.0;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    if (res.gradient_norm < options.gradient_tolerance) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir;
    Eigen::LLT<Eigen::MatrixXd> llt(-cur.hessian);
    if (llt.info() == Eigen::Success) {
      dir = llt.solve(cur.gradient);
    } else {
      // Non-concave region: steepest ascent with a unit-length cap.
      dir = cur.gradient / std::max(1.0, cur.gradient.norm());
    }
    const double longest = dir.cwiseAbs().maxCoeff();
    if (longest > max_step) dir *= max_step / longest;

    const double slope = cur.gradient.dot(dir);
    const double noise = 1e-13 * (1.0 + std::abs(cur.value));
    if (slope <= noise) {
      // The predicted gain is below the rounding level of the objective: trust the gradient and
      // take the plain Newton step, stopping once it no longer reduces the gradient.
      if (llt.info() != Eigen::Success) break;
      const ObjectiveDerivatives next = derivs(x + dir);
      const double next_norm = next.gradient.cwiseAbs().maxCoeff();
      if (!std::isfinite(next.value) || !(next_norm < res.gradient_norm)) break;
      x += dir;
      cur = next;
      res.gradient_norm = next_norm;
      continue;
    }
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      trial = x + t * dir;
      const double f = value(trial);
      if (std::isfinite(f) && f >= cur.value + 1e-4 * t * slope - noise) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    x = trial;
    cur = derivs(x);
    res.gradient_norm = cur.gradient.cwiseAbs().maxCoeff();
  }
  if (!res.converged && res.gradient_norm < options.gradient_tolerance) res.converged = true;
  res.argmax = x;
  res.objective_value = cur.value;
  res.n_iterations = it;
  return res;
}

}  // namespace detail

OptimResult maximize_beta_part(const PackedData& data, std::span<const RandomEffects> effects,
                               const Eigen::VectorXd& beta_init, double phi_init,
                               const OptimOptions& options) {
  if (!(phi_init > 0.0)) throw DomainError("maximize_beta_part: phi_init must be positive");
  if (beta_init.size() != data.r) throw DimensionError("beta_init length does not match r");
  const int r = data.r;
  Eigen::VectorXd x0(r + 1);
  x0.head(r) = beta_init;
  x0[r] = std::log(phi_init);
  auto derivs = [&](const Eigen::VectorXd& x) {
    return beta_part_objective(data, effects, x.head(r), x[r]);
  };
  auto value = [&](const Eigen::VectorXd& x) {
    if (x[r] > 700.0) return -std::numeric_limits<double>::infinity();
    return beta_part_value(data, effects, x.head(r), x[r]);
  };
  OptimResult res = detail::newton_ascent(derivs, value, x0, options);
  res.argmax[r] = std::exp(res.argmax[r]);
  return res;
}

OptimResult maximize_logistic_part(const PackedData& data, std::span<const RandomEffects> effects,
                                   const Eigen::VectorXd& alpha_init, const OptimOptions& options) {
  if (alpha_init.size() != data.p) throw DimensionError("alpha_init length does not match p");
  constexpr double kSeparationBound = 1e3;
  bool blew_up = false;
  auto derivs = [&](const Eigen::VectorXd& x) { return logistic_part_objective(data, effects, x); };
  auto value = [&](const Eigen::VectorXd& x) {
    if (x.size() > 0 && x.cwiseAbs().maxCoeff() > kSeparationBound) {
      blew_up = true;
      return -std::numeric_limits<double>::infinity();
    }
    return logistic_part_value(data, effects, x);
  };
  OptimResult res = detail::newton_ascent(derivs, value, alpha_init, options);

  // Separation: coefficients run away, or every observation is fitted with certainty.
  bool saturated = false;
  if (data.p > 0 && data.total() > 0) {
    const Eigen::VectorXd x_alpha = data.x * res.argmax;
    double worst = 0.0;
    for (const auto& e : effects) {
      for (std::size_t i = 0; i < data.n(); ++i) {
        for (std::size_t k = data.begin(i); k < data.end(i); ++k) {
          const double prob = sigmoid(e(static_cast<Eigen::Index>(i), 0) + x_alpha[static_cast<Eigen::Index>(k)]);
          worst = std::max(worst, std::abs((data.positive[k] ? 1.0 : 0.0) - prob));
        }
      }
    }
    saturated = worst < 1e-6;
  }
  if (blew_up || saturated) {
    res.separation = true;
    res.converged = false;
    res.argmax = res.argmax.cwiseMax(-kSeparationBound).cwiseMin(kSeparationBound);
  }
  return res;
}

}  // namespace zibr
