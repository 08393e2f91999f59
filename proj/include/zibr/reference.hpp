#pragma once

// Serial reference implementations of the parallel kernels. They follow the same arithmetic and
// summation order as the OpenMP versions, so results are expected to agree bit for bit; tests
// and the benchmark compare the two.

#include "zibr/fim.hpp"
#include "zibr/loglik.hpp"
#include "zibr/optimizer.hpp"
#include "zibr/sampler.hpp"

#include <span>

namespace zibr::reference {

KernelCounters sstep(ChainState& state, const ZibrParams& params, const PackedData& data,
                     const McmcConfig& config);

ObjectiveDerivatives beta_part_objective(const PackedData& data, std::span<const RandomEffects> effects,
                                         const Eigen::VectorXd& beta, double log_phi);

ObjectiveDerivatives logistic_part_objective(const PackedData& data,
                                             std::span<const RandomEffects> effects,
                                             const Eigen::VectorXd& alpha);

ScoreHessian score_and_hessian(const ZibrParams& params, const PackedData& data,
                               const RandomEffects& effects);

LoglikEstimate loglik_is(const ZibrParams& params, const PackedData& data,
                         const ConditionalMoments& moments, const IsConfig& config);

}  // namespace zibr::reference
