#include "zibr/inference.hpp"

#include "zibr/errors.hpp"
#include "zibr/special.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace zibr {

TestResult lrt(double loglik_full, double loglik_reduced, int df) {
  if (df < 1) throw DomainError("LRT degrees of freedom must be >= 1");
  if (!std::isfinite(loglik_full) || !std::isfinite(loglik_reduced)) {
    throw DomainError("LRT needs finite log-likelihoods");
  }
  TestResult t;
  t.method = TestMethod::kLrt;
  t.df = df;
  t.raw_statistic = 2.0 * (loglik_full - loglik_reduced);
  t.warning = t.raw_statistic < kLrtNoiseTolerance;
  t.statistic = std::max(0.0, t.raw_statistic);
  t.p_value = chi_square_upper(t.statistic, df);
  return t;
}

TestResult wald(double estimate, double se) {
  if (!(se > 0.0) || !std::isfinite(se)) throw DomainError("Wald test needs a positive standard error");
  TestResult t;
  t.method = TestMethod::kWald;
  t.df = 1;
  const double z = estimate / se;
  t.statistic = z * z;
  t.raw_statistic = t.statistic;
  t.p_value = chi_square_upper(t.statistic, 1);
  return t;
}

std::vector<double> bh_adjust(const std::vector<double>& p_values) {
  for (const double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p-values must lie in [0, 1]");
  }
  const std::size_t n = p_values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return p_values[i] < p_values[j]; });
  std::vector<double> adjusted(n);
  double running = 1.0;
  for (std::size_t k = n; k-- > 0;) {
    const std::size_t idx = order[k];
    const double candidate = p_values[idx] * static_cast<double>(n) / static_cast<double>(k + 1);
    running = std::min(running, candidate);
    adjusted[idx] = std::min(1.0, std::max(p_values[idx], running));
  }
  return adjusted;
}

std::string to_string(TestMethod method) { return method == TestMethod::kLrt ? "LRT" : "Wald"; }

}  // namespace zibr
