#pragma once

#include "zibr/model.hpp"
#include "zibr/packed_data.hpp"
#include "zibr/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

namespace zibr {

/// Metropolis-Hastings settings for the simulation step.
struct McmcConfig {
  int n_kernels_per_sstep = 5;  // sweeps of the three-kernel cycle per SAEM iteration
  double rw_scale_a = 0.5;
  double rw_scale_b = 0.5;
  bool adapt = true;
  double target_acceptance = 0.4;

  void validate() const;
};

/// Kernel order in every sweep.
enum Kernel : int { kPriorIndependence = 0, kRandomWalkA = 1, kRandomWalkB = 2 };

struct KernelCounters {
  std::array<std::uint64_t, 3> proposed{};
  std::array<std::uint64_t, 3> accepted{};

  double rate(int kernel) const;
  KernelCounters& operator+=(const KernelCounters& other);
};

/// One Markov chain over all individuals' random effects.
struct ChainState {
  RandomEffects effects;
  // log p(y_i | a_i) and log p(y_i | b_i) at the parameters of the last sstep call.
  Eigen::VectorXd cached_logistic;
  Eigen::VectorXd cached_beta;
  KernelCounters counters;  // cumulative
  std::vector<Engine> streams;  // one per individual

  std::size_t n() const { return static_cast<std::size_t>(effects.rows()); }
};

/// Chain with every individual at (a, b); individual i draws from stream split_seed(seed, chain, i).
ChainState make_chain(const ZibrParams& params, std::size_t n_individuals, std::uint64_t seed,
                      std::uint64_t chain_index);

/// Simulation step: n_kernels_per_sstep sweeps of (prior independence, RW on a_i, RW on b_i)
/// for every individual, targeting p(a_i, b_i | y_i; params). Individuals are advanced in
/// parallel; the result does not depend on the thread count.
/// Returns the counters of this call (also added to state.counters).
KernelCounters sstep(ChainState& state, const ZibrParams& params, const PackedData& data,
                     const McmcConfig& config);

/// Robbins-Monro style multiplicative update of the random-walk scales:
/// scale <- scale * exp(acceptance - target).
McmcConfig adapt_scales(const KernelCounters& counters, const McmcConfig& config);

/// min(1, exp(log_target_proposed - log_target_current + log_q_backward - log_q_forward)).
double mh_accept_probability(double log_target_current, double log_target_proposed,
                             double log_q_forward = 0.0, double log_q_backward = 0.0);

/// Largest |cached - recomputed| over the cached conditional log-densities.
double cache_drift(const ChainState& state, const ZibrParams& params, const PackedData& data);

namespace detail {

void advance_individual(ChainState& state, std::size_t i, const ZibrParams& params,
                        const PackedData& data, const FixedPredictors& fixed,
                        const McmcConfig& config, KernelCounters& counters);

}  // namespace detail
}  // namespace zibr
