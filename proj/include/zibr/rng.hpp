#pragma once

#include <cstdint>
#include <random>

namespace zibr {

using Engine = std::mt19937_64;

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent stream seed from a master seed and up to two stream indices:
///   s = mix64(mix64(mix64(master) ^ (a + c1)) ^ (b + c2))
/// with c1, c2 distinct odd constants. Used for (chain, individual), (replicate, role), ...
std::uint64_t split_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

Engine make_engine(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

double standard_normal(Engine& eng);
double uniform01(Engine& eng);

}  // namespace zibr
