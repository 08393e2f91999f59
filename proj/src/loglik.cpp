#include "zibr/loglik.hpp"

#include "parallel_reduce.hpp"
#include "zibr/errors.hpp"
#include "zibr/reference.hpp"
#include "zibr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace zibr {

void IsConfig::validate() const {
  if (k_samples < 1) throw DomainError("IS sample count K must be >= 1");
  if (!(nu > 0.0)) throw DomainError("IS degrees of freedom must be > 0");
}

namespace detail {

void check_moments(const PackedData& data, const ConditionalMoments& moments) {
  if (static_cast<std::size_t>(moments.mean.rows()) != data.n() ||
      static_cast<std::size_t>(moments.var.rows()) != data.n()) {
    throw DimensionError("conditional moments are required for every individual");
  }
  if (!moments.mean.allFinite() || !moments.var.allFinite() || (moments.var.array() < 0.0).any()) {
    throw DomainError("conditional moments must be finite with nonnegative variances");
  }
}

IndividualEstimate importance_sample_individual(const ZibrParams& params, const PackedData& data,
                                                const FixedPredictors& fixed,
                                                const ConditionalMoments& moments, std::size_t i,
                                                const IsConfig& config) {
  IndividualEstimate est;
  if (data.begin(i) == data.end(i)) return est;

  const auto row = static_cast<Eigen::Index>(i);
  const double nu = config.nu;
  const double log_t_norm = log_gamma(0.5 * (nu + 1.0)) - log_gamma(0.5 * nu) -
                            0.5 * std::log(nu * std::numbers::pi);
  std::array<double, 2> mu{moments.mean(row, 0), moments.mean(row, 1)};
  std::array<double, 2> sd{};
  for (int c = 0; c < 2; ++c) {
    sd[static_cast<std::size_t>(c)] = std::max(std::sqrt(std::max(moments.var(row, c), 0.0)), kProposalSdFloor);
  }
  const double log_sd_sum = std::log(sd[0]) + std::log(sd[1]);

  Engine eng = make_engine(config.seed, i, 0x1517);
  std::student_t_distribution<double> tdist(nu);
  std::vector<double> log_w(static_cast<std::size_t>(config.k_samples));
  double max_lw = -std::numeric_limits<double>::infinity();
  for (auto& lw : log_w) {
    const double t1 = tdist(eng);
    const double t2 = tdist(eng);
    const double a_i = mu[0] + sd[0] * t1;
    const double b_i = mu[1] + sd[1] * t2;
    const double log_proposal = 2.0 * log_t_norm - 0.5 * (nu + 1.0) * (std::log1p(t1 * t1 / nu) + std::log1p(t2 * t2 / nu)) - log_sd_sum;
    lw = kernel::logistic_part(data, fixed, i, a_i) + kernel::beta_part(data, fixed, i, b_i) +
         random_effect_log_prior(params, a_i, b_i) - log_proposal;
    if (std::isnan(lw)) lw = -std::numeric_limits<double>::infinity();
    max_lw = std::max(max_lw, lw);
  }
  if (!std::isfinite(max_lw)) {
    est.log_p = std::numeric_limits<double>::quiet_NaN();
    return est;
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const double lw : log_w) {
    const double w = std::exp(lw - max_lw);
    sum += w;
    sum_sq += w * w;
  }
  const double k = static_cast<double>(config.k_samples);
  const double mean = sum / k;
  est.log_p = max_lw + std::log(mean);
  if (config.k_samples > 1) {
    const double var = std::max(0.0, (sum_sq - k * mean * mean) / (k - 1.0));
    est.rel_var = var / (k * mean * mean);
  }
  return est;
}

}  // namespace detail

namespace {

[[noreturn]] void throw_underflow(std::size_t i) {
  throw NumericalError("importance sampling: all weights underflow for individual index " + std::to_string(i));
}

}  // namespace

LoglikEstimate loglik_is(const ZibrParams& params, const PackedData& data,
                         const ConditionalMoments& moments, const IsConfig& config) {
  config.validate();
  params.validate();
  detail::check_moments(data, moments);
  const FixedPredictors fixed = FixedPredictors::compute(params, data);
  const std::size_t n = data.n();
  std::vector<detail::IndividualEstimate> per(n);
  const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 4) if (nn >= 8 && !omp_in_parallel())
  for (std::ptrdiff_t i = 0; i < nn; ++i) {
    per[static_cast<std::size_t>(i)] =
        detail::importance_sample_individual(params, data, fixed, moments, static_cast<std::size_t>(i), config);
  }
  LoglikEstimate out;
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(per[i].log_p)) throw_underflow(i);
    out.loglik += per[i].log_p;
    var += per[i].rel_var;
  }
  out.mc_se = std::sqrt(var);
  return out;
}

LoglikEstimate reference::loglik_is(const ZibrParams& params, const PackedData& data,
                                    const ConditionalMoments& moments, const IsConfig& config) {
  config.validate();
  params.validate();
  detail::check_moments(data, moments);
  const FixedPredictors fixed = FixedPredictors::compute(params, data);
  LoglikEstimate out;
  double var = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto est = detail::importance_sample_individual(params, data, fixed, moments, i, config);
    if (std::isnan(est.log_p)) throw_underflow(i);
    out.loglik += est.log_p;
    var += est.rel_var;
  }
  out.mc_se = std::sqrt(var);
  return out;
}

LoglikEstimate loglik_is(const ZibrParams& params, const Dataset& data,
                         const ConditionalMoments& moments, const IsConfig& config) {
  check_dimensions(params, data);
  try {
    return loglik_is(params, PackedData::from(data), moments, config);
  } catch (const NumericalError&) {
    // Repeat the scan serially to name the first failing individual by id.
    const PackedData packed = PackedData::from(data);
    const FixedPredictors fixed = FixedPredictors::compute(params, packed);
    for (std::size_t i = 0; i < data.n(); ++i) {
      if (std::isnan(detail::importance_sample_individual(params, packed, fixed, moments, i, config).log_p)) {
        throw NumericalError("importance sampling: all weights underflow for individual '" +
                             data.individuals[i].id + "'");
      }
    }
    throw;
  }
}

}  // namespace zibr
