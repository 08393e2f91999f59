#include "zibr/sampler.hpp"

#include "zibr/errors.hpp"
#include "zibr/reference.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace zibr {

void McmcConfig::validate() const {
  if (n_kernels_per_sstep < 1) throw DomainError("n_kernels_per_sstep must be >= 1");
  if (!(rw_scale_a > 0.0) || !(rw_scale_b > 0.0)) throw DomainError("random-walk scales must be > 0");
  if (!(target_acceptance >= 0.2 && target_acceptance <= 0.6)) {
    throw DomainError("target_acceptance must lie in [0.2, 0.6]");
  }
}

double KernelCounters::rate(int kernel) const {
  const auto k = static_cast<std::size_t>(kernel);
  return proposed[k] == 0 ? 0.0 : static_cast<double>(accepted[k]) / static_cast<double>(proposed[k]);
}

KernelCounters& KernelCounters::operator+=(const KernelCounters& other) {
  for (std::size_t k = 0; k < 3; ++k) {
    proposed[k] += other.proposed[k];
    accepted[k] += other.accepted[k];
  }
  return *this;
}

ChainState make_chain(const ZibrParams& params, std::size_t n_individuals, std::uint64_t seed,
                      std::uint64_t chain_index) {
  ChainState s;
  const auto n = static_cast<Eigen::Index>(n_individuals);
  s.effects.resize(n, 2);
  s.effects.col(0).setConstant(params.a);
  s.effects.col(1).setConstant(params.b);
  s.cached_logistic = Eigen::VectorXd::Zero(n);
  s.cached_beta = Eigen::VectorXd::Zero(n);
  s.streams.reserve(n_individuals);
  for (std::size_t i = 0; i < n_individuals; ++i) s.streams.push_back(make_engine(seed, chain_index, i));
  return s;
}

double mh_accept_probability(double log_target_current, double log_target_proposed,
                             double log_q_forward, double log_q_backward) {
  const double log_ratio = log_target_proposed - log_target_current + log_q_backward - log_q_forward;
  if (std::isnan(log_ratio)) return 0.0;
  return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

namespace detail {

namespace {

inline bool accept(Engine& eng, double log_ratio) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  return std::log(uniform01(eng)) < log_ratio;
}

}  // namespace

void advance_individual(ChainState& state, std::size_t i, const ZibrParams& params,
                        const PackedData& data, const FixedPredictors& fixed,
                        const McmcConfig& config, KernelCounters& counters) {
  const auto row = static_cast<Eigen::Index>(i);
  Engine& eng = state.streams[i];
  double a = state.effects(row, 0);
  double b = state.effects(row, 1);
  double la = kernel::logistic_part(data, fixed, i, a);
  double lb = kernel::beta_part(data, fixed, i, b);
  const double sd1 = std::sqrt(params.sigma1_sq);
  const double sd2 = std::sqrt(params.sigma2_sq);
  const double inv2v1 = 0.5 / params.sigma1_sq;
  const double inv2v2 = 0.5 / params.sigma2_sq;

  for (int sweep = 0; sweep < config.n_kernels_per_sstep; ++sweep) {
    // Independence proposal from the prior: the prior cancels against the proposal density.
    {
      const double a_new = params.a + sd1 * standard_normal(eng);
      const double b_new = params.b + sd2 * standard_normal(eng);
      const double la_new = kernel::logistic_part(data, fixed, i, a_new);
      const double lb_new = kernel::beta_part(data, fixed, i, b_new);
      ++counters.proposed[kPriorIndependence];
      if (accept(eng, (la_new + lb_new) - (la + lb))) {
        a = a_new;
        b = b_new;
        la = la_new;
        lb = lb_new;
        ++counters.accepted[kPriorIndependence];
      }
    }
    {
      const double a_new = a + config.rw_scale_a * standard_normal(eng);
      const double la_new = kernel::logistic_part(data, fixed, i, a_new);
      const double da_new = a_new - params.a;
      const double da = a - params.a;
      ++counters.proposed[kRandomWalkA];
      if (accept(eng, la_new - la - (da_new * da_new - da * da) * inv2v1)) {
        a = a_new;
        la = la_new;
        ++counters.accepted[kRandomWalkA];
      }
    }
    {
      const double b_new = b + config.rw_scale_b * standard_normal(eng);
      const double lb_new = kernel::beta_part(data, fixed, i, b_new);
      const double db_new = b_new - params.b;
      const double db = b - params.b;
      ++counters.proposed[kRandomWalkB];
      if (accept(eng, lb_new - lb - (db_new * db_new - db * db) * inv2v2)) {
        b = b_new;
        lb = lb_new;
        ++counters.accepted[kRandomWalkB];
      }
    }
  }
  state.effects(row, 0) = a;
  state.effects(row, 1) = b;
  state.cached_logistic[row] = la;
  state.cached_beta[row] = lb;
}

}  // namespace detail

KernelCounters sstep(ChainState& state, const ZibrParams& params, const PackedData& data,
                     const McmcConfig& config) {
  if (state.n() != data.n()) throw DimensionError("chain state and data disagree on N");
  const FixedPredictors fixed = FixedPredictors::compute(params, data);
  const auto n = static_cast<std::ptrdiff_t>(data.n());
  std::vector<KernelCounters> per_individual(data.n());
#pragma omp parallel for schedule(static) if (n >= 32 && !omp_in_parallel())
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    detail::advance_individual(state, static_cast<std::size_t>(i), params, data, fixed, config,
                               per_individual[static_cast<std::size_t>(i)]);
  }
  KernelCounters total;
  for (const auto& c : per_individual) total += c;
  state.counters += total;
  return total;
}

KernelCounters reference::sstep(ChainState& state, const ZibrParams& params, const PackedData& data,
                                const McmcConfig& config) {
  if (state.n() != data.n()) throw DimensionError("chain state and data disagree on N");
  const FixedPredictors fixed = FixedPredictors::compute(params, data);
  std::vector<KernelCounters> per_individual(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    detail::advance_individual(state, i, params, data, fixed, config, per_individual[i]);
  }
  KernelCounters total;
  for (const auto& c : per_individual) total += c;
  state.counters += total;
  return total;
}

McmcConfig adapt_scales(const KernelCounters& counters, const McmcConfig& config) {
  McmcConfig out = config;
  if (counters.proposed[kRandomWalkA] > 0) {
    out.rw_scale_a *= std::exp(counters.rate(kRandomWalkA) - config.target_acceptance);
  }
  if (counters.proposed[kRandomWalkB] > 0) {
    out.rw_scale_b *= std::exp(counters.rate(kRandomWalkB) - config.target_acceptance);
  }
  out.rw_scale_a = std::clamp(out.rw_scale_a, 1e-4, 1e2);
  out.rw_scale_b = std::clamp(out.rw_scale_b, 1e-4, 1e2);
  return out;
}

double cache_drift(const ChainState& state, const ZibrParams& params, const PackedData& data) {
  const FixedPredictors fixed = FixedPredictors::compute(params, data);
  double worst = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    worst = std::max(worst, std::abs(state.cached_logistic[row] -
                                     kernel::logistic_part(data, fixed, i, state.effects(row, 0))));
    worst = std::max(worst, std::abs(state.cached_beta[row] -
                                     kernel::beta_part(data, fixed, i, state.effects(row, 1))));
  }
  return worst;
}

}  // namespace zibr
