#pragma once

#include "zibr/loglik.hpp"
#include "zibr/model.hpp"
#include "zibr/saem.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace zibr {

enum class Scenario {
  kSetting1,        // a = b = -0.5, alpha = beta = 0.5, sigma = (3.2, 2.6), phi = 6.4
  kSetting2,        // as setting1 with sigma = (0.7, 0.5)
  kAppendixA,       // setting2 with 20% MCAR dropout
  kLrtNull,         // a = -0.5, b = 0.5, alpha = beta = 0, sigma = (0.7, 0.5); LRT of alpha = beta = 0
  kWaldNull,        // same null, Wald tests of alpha = 0 and beta = 0
  kWaldRandomNull,  // setting2 with a = b = 0, Wald tests of a = 0 and b = 0
  kPowerGrid,       // LRT power over an alpha0 grid, N = 50
};

Scenario parse_scenario(const std::string& name);
std::string to_string(Scenario scenario);

/// True parameters of a scenario. For kPowerGrid, `power_setting` (1..4) picks
/// (alpha, b, beta) = (0.5, 0.5, 0.5), (-0.5, 0.5, 0.5), (0, 0.5, 0.5) or (0.5, 0, 0) and a = alpha0.
ZibrParams scenario_truth(Scenario scenario, int power_setting = 1, double alpha0 = 0.0);

/// Starting point used for every replicate fit: phi 8, a -0.3, b -0.2, alpha 0.7, beta 0.8,
/// sigma (0.38, 0.31).
ZibrParams study_init();

struct StudySpec {
  Scenario scenario = Scenario::kSetting2;
  int replicates = 200;
  int n_individuals = 100;
  int t_per_individual = 10;
  double dropout = 0.0;
  bool interpolate = false;
  std::optional<ZibrParams> truth;  // overrides scenario_truth
  std::optional<ZibrParams> init;   // overrides study_init
  SaemConfig saem;                  // the seed is ignored; fits draw replicate seeds
  IsConfig is;                      // likewise
  std::vector<double> power_grid{-1.0, -0.5, 0.0, 0.5, 1.0};
  int power_setting = 1;
  double level = 0.05;
  int workers = 0;  // 0 lets OpenMP decide
  int histogram_bins = 30;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Scenario defaults: 10 chains and FIM for the Wald scenarios, 20% dropout for appendixA,
/// N = 50 for the power grid, FIM off elsewhere.
StudySpec default_spec(Scenario scenario);

/// Reported parameters: a, b, alpha..., beta..., sigma1, sigma2, phi (sigmas as SDs).
std::vector<std::string> report_names(int p, int r);
std::vector<double> report_values(const ZibrParams& params);

struct MetricsRow {
  std::string parameter;
  double true_value = 0.0;
  double bias = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  double sd = 0.0;  // population SD, rmse^2 = bias^2 + sd^2
  int n = 0;
};

/// Throws DomainError on an empty input.
MetricsRow metrics(const std::vector<double>& estimates, double true_value,
                   const std::string& parameter = "");

struct ReplicateRecord {
  int replicate = 0;
  int grid_index = -1;
  bool ok = false;
  std::string error;
  std::vector<double> estimates;   // report order
  std::vector<double> std_errors;  // report order, NaN when unavailable
  std::vector<double> wald_p;      // report order, NaN when unavailable
  double loglik_full = 0.0;
  double loglik_reduced = 0.0;
  double lrt_statistic = 0.0;
  double lrt_p = 1.0;
  bool lrt_warning = false;
};

struct HistogramBin {
  std::string parameter;
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
  double density = 0.0;
};

struct PowerPoint {
  double alpha0 = 0.0;
  double rejection_rate = 0.0;
  int n_ok = 0;
};

struct StudyReport {
  StudySpec spec;
  std::vector<ReplicateRecord> replicates;
  std::vector<MetricsRow> metrics;
  std::vector<HistogramBin> histograms;
  std::map<std::string, double> rejection_rates;
  std::vector<PowerPoint> power;
  int failures = 0;
  bool failed = false;  // more than 5% of replicates failed
  std::string version;
};

/// Runs one replicate; depends only on (spec, replicate, grid_index). Never throws; failures are
/// recorded in the returned record.
ReplicateRecord run_replicate(const StudySpec& spec, int replicate, int grid_index = -1);

/// Replicates run in parallel over spec.workers threads; aggregation is in replicate order.
StudyReport run_study(const StudySpec& spec);

/// LRT power over spec.power_grid.
std::vector<PowerPoint> power_curve(const StudySpec& spec);

/// Key-value echo of the spec, one `key=value` per line.
std::string describe(const StudySpec& spec);

/// Writes summary.txt, metrics.csv, replicates.csv, histograms.csv and, when present, power.csv.
void write_report(const StudyReport& report, const std::string& directory);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace zibr
