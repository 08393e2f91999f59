#pragma once

#include "zibr/model.hpp"
#include "zibr/packed_data.hpp"
#include "zibr/saem.hpp"

#include <cstdint>

namespace zibr {

struct IsConfig {
  int k_samples = 500;
  double nu = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LoglikEstimate {
  double loglik = 0.0;
  double mc_se = 0.0;  // delta-method Monte Carlo standard error of loglik
};

inline constexpr double kProposalSdFloor = 1e-4;

/// Importance-sampling estimate of log p(y; params). For each individual the proposal is
/// mean_i + sd_i * t_nu coordinate-wise, with (mean_i, sd_i^2) the conditional moments from SAEM.
/// Individuals without observations contribute exactly 0. Throws NumericalError naming the
/// individual when all of its K weights underflow.
LoglikEstimate loglik_is(const ZibrParams& params, const PackedData& data,
                         const ConditionalMoments& moments, const IsConfig& config);
LoglikEstimate loglik_is(const ZibrParams& params, const Dataset& data,
                         const ConditionalMoments& moments, const IsConfig& config);

namespace detail {

/// log p-hat_i and the relative variance of p-hat_i for one individual.
struct IndividualEstimate {
  double log_p = 0.0;
  double rel_var = 0.0;
};

IndividualEstimate importance_sample_individual(const ZibrParams& params, const PackedData& data,
                                                const FixedPredictors& fixed,
                                                const ConditionalMoments& moments, std::size_t i,
                                                const IsConfig& config);

void check_moments(const PackedData& data, const ConditionalMoments& moments);

}  // namespace detail
}  // namespace zibr
