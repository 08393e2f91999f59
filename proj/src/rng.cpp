#include "zibr/rng.hpp"

namespace zibr {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t split_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = mix64(master);
  s = mix64(s ^ (a + 0x632be59bd9b4e019ULL));
  s = mix64(s ^ (b + 0x85157af5ULL * 2 + 1));
  return s;
}

Engine make_engine(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return Engine(split_seed(master, a, b));
}

double standard_normal(Engine& eng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(eng);
}

double uniform01(Engine& eng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(eng);
}

}  // namespace zibr
