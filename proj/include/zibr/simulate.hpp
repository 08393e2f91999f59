#pragma once

#include "zibr/model.hpp"

#include <cstdint>
#include <vector>

namespace zibr {

/// Treatment/control design: x = 0 for the first N/2 individuals and 1 for the rest, z = x.
/// params.alpha and params.beta may each have length 0 (no covariate) or 1.
struct SimConfig {
  ZibrParams params;
  int n_individuals = 100;
  int t_per_individual = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Draws a dataset from the model; times are 1..T.
Dataset generate(const SimConfig& config);

/// Removes floor(fraction * total) observations uniformly at random. A draw that would leave an
/// individual without observations is discarded and redrawn (up to 1000 times).
Dataset mcar_dropout(const Dataset& data, double fraction, std::uint64_t seed);

/// Restores a balanced design with times 1..T: interior gaps by linear interpolation of y,
/// trailing gaps by the last observed value, leading gaps by the first observed value.
/// Covariates of filled rows are copied from the nearest observed row.
Dataset interpolate(const Dataset& data, int original_t);

/// Per-individual observation counts.
std::vector<int> observation_counts(const Dataset& data);

}  // namespace zibr
