#pragma once

#include <string>
#include <vector>

namespace zibr {

enum class TestMethod { kLrt, kWald };

struct TestResult {
  double statistic = 0.0;
  int df = 1;
  double p_value = 1.0;  // upper-tail chi-square(df) at statistic
  TestMethod method = TestMethod::kLrt;
  bool warning = false;  // LRT: raw statistic was below the Monte Carlo tolerance
  double raw_statistic = 0.0;
};

/// Tolerated negative LRT statistic from importance-sampling noise before a warning is raised.
inline constexpr double kLrtNoiseTolerance = -0.5;

/// 2 (ll_full - ll_reduced), clamped at 0; p from chi-square(df).
TestResult lrt(double loglik_full, double loglik_reduced, int df);

/// (estimate / se)^2 against chi-square(1). Throws DomainError when se <= 0.
TestResult wald(double estimate, double se);

/// Benjamini-Hochberg step-up adjusted p-values, returned in input order, clamped to 1.
std::vector<double> bh_adjust(const std::vector<double>& p_values);

std::string to_string(TestMethod method);

}  // namespace zibr
