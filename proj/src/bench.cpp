#include "zibr/bench.hpp"

#include "zibr/csv_io.hpp"
#include "zibr/errors.hpp"
#include "zibr/inference.hpp"
#include "zibr/rng.hpp"
#include "zibr/simulate.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace zibr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ZibrParams make_params(double a, double alpha, double b, double beta, double sd1, double sd2,
                       double phi) {
  ZibrParams th;
  th.phi = phi;
  th.a = a;
  th.b = b;
  th.alpha = Eigen::VectorXd::Constant(1, alpha);
  th.beta = Eigen::VectorXd::Constant(1, beta);
  th.sigma1_sq = sd1 * sd1;
  th.sigma2_sq = sd2 * sd2;
  return th;
}

bool is_power(const StudySpec& spec) { return spec.scenario == Scenario::kPowerGrid; }

bool needs_lrt(const StudySpec& spec) {
  return spec.scenario == Scenario::kLrtNull || is_power(spec);
}

ZibrParams replicate_truth(const StudySpec& spec, int grid_index) {
  if (spec.truth) return *spec.truth;
  const double alpha0 = grid_index >= 0 ? spec.power_grid[static_cast<std::size_t>(grid_index)] : 0.0;
  return scenario_truth(spec.scenario, spec.power_setting, alpha0);
}

std::uint64_t task_base_seed(const StudySpec& spec, int grid_index) {
  return grid_index >= 0 ? split_seed(spec.seed, 0x9000 + static_cast<std::uint64_t>(grid_index))
                         : spec.seed;
}

std::string format_params(const ZibrParams& th) {
  std::ostringstream s;
  s << "phi:" << format_double(th.phi) << ";a:" << format_double(th.a)
    << ";b:" << format_double(th.b);
  for (Eigen::Index j = 0; j < th.alpha.size(); ++j) s << ";alpha" << j << ':' << format_double(th.alpha[j]);
  for (Eigen::Index j = 0; j < th.beta.size(); ++j) s << ";beta" << j << ':' << format_double(th.beta[j]);
  s << ";sigma1_sq:" << format_double(th.sigma1_sq) << ";sigma2_sq:" << format_double(th.sigma2_sq);
  return s.str();
}

std::vector<std::string> tested_parameters(const StudySpec& spec, int p, int r) {
  const auto names = report_names(p, r);
  if (spec.scenario == Scenario::kWaldNull) {
    return std::vector<std::string>(names.begin() + 2, names.begin() + 2 + p + r);
  }
  if (spec.scenario == Scenario::kWaldRandomNull) return {names[0], names[1]};
  return {};
}

std::string artifact_header(const StudyReport& report) {
  return "# zibr " + report.version + " scenario=" + to_string(report.spec.scenario) +
         " seed=" + std::to_string(report.spec.seed) +
         " config=" + hex64(fnv1a64(describe(report.spec))) + "\n";
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

Scenario parse_scenario(const std::string& name) {
  if (name == "setting1") return Scenario::kSetting1;
  if (name == "setting2") return Scenario::kSetting2;
  if (name == "appendixA") return Scenario::kAppendixA;
  if (name == "lrt_null") return Scenario::kLrtNull;
  if (name == "wald_null") return Scenario::kWaldNull;
  if (name == "wald_random_null") return Scenario::kWaldRandomNull;
  if (name == "power_grid") return Scenario::kPowerGrid;
  throw DomainError("unknown scenario '" + name +
                    "' (expected setting1, setting2, appendixA, lrt_null, wald_null, "
                    "wald_random_null or power_grid)");
}

std::string to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::kSetting1: return "setting1";
    case Scenario::kSetting2: return "setting2";
    case Scenario::kAppendixA: return "appendixA";
    case Scenario::kLrtNull: return "lrt_null";
    case Scenario::kWaldNull: return "wald_null";
    case Scenario::kWaldRandomNull: return "wald_random_null";
    case Scenario::kPowerGrid: return "power_grid";
  }
  return "unknown";
}

ZibrParams scenario_truth(Scenario scenario, int power_setting, double alpha0) {
  switch (scenario) {
    case Scenario::kSetting1: return make_params(-0.5, 0.5, -0.5, 0.5, 3.2, 2.6, 6.4);
    case Scenario::kSetting2:
    case Scenario::kAppendixA: return make_params(-0.5, 0.5, -0.5, 0.5, 0.7, 0.5, 6.4);
    case Scenario::kLrtNull:
    case Scenario::kWaldNull: return make_params(-0.5, 0.0, 0.5, 0.0, 0.7, 0.5, 6.4);
    case Scenario::kWaldRandomNull: return make_params(0.0, 0.5, 0.0, 0.5, 0.7, 0.5, 6.4);
    case Scenario::kPowerGrid:
      switch (power_setting) {
        case 1: return make_params(alpha0, 0.5, 0.5, 0.5, 0.7, 0.5, 6.4);
        case 2: return make_params(alpha0, -0.5, 0.5, 0.5, 0.7, 0.5, 6.4);
        case 3: return make_params(alpha0, 0.0, 0.5, 0.5, 0.7, 0.5, 6.4);
        case 4: return make_params(alpha0, 0.5, 0.0, 0.0, 0.7, 0.5, 6.4);
        default: throw DomainError("power_setting must be 1, 2, 3 or 4");
      }
  }
  throw DomainError("unknown scenario");
}

ZibrParams study_init() { return make_params(-0.3, 0.7, -0.2, 0.8, 0.38, 0.31, 8.0); }

void StudySpec::validate() const {
  if (replicates < 1) throw DomainError("replicates must be >= 1");
  if (n_individuals < 2 || n_individuals % 2 != 0) throw DomainError("n_individuals must be even and >= 2");
  if (t_per_individual < 1) throw DomainError("t_per_individual must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw DomainError("dropout must lie in [0, 1)");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("level must lie in (0, 1)");
  if (histogram_bins < 1) throw DomainError("histogram_bins must be >= 1");
  if (workers < 0) throw DomainError("workers must be >= 0");
  if (scenario == Scenario::kPowerGrid) {
    if (power_grid.empty()) throw DomainError("power grid must not be empty");
    if (power_setting < 1 || power_setting > 4) throw DomainError("power_setting must be 1, 2, 3 or 4");
  }
  saem.validate();
  is.validate();
  const ZibrParams th = truth ? *truth : scenario_truth(scenario, power_setting, 0.0);
  th.validate();
  const ZibrParams start = init ? *init : study_init();
  start.validate();
  if (start.p() != th.p() || start.r() != th.r()) {
    throw DimensionError("initial values and true parameters disagree on covariate dimensions");
  }
  if ((scenario == Scenario::kWaldNull || scenario == Scenario::kWaldRandomNull) && !saem.compute_fim) {
    throw DomainError("Wald scenarios need the observed information (compute_fim)");
  }
}

StudySpec default_spec(Scenario scenario) {
  StudySpec spec;
  spec.scenario = scenario;
  spec.saem.compute_fim = false;
  switch (scenario) {
    case Scenario::kAppendixA: spec.dropout = 0.2; break;
    case Scenario::kWaldNull:
    case Scenario::kWaldRandomNull:
      spec.saem.chains = 10;
      spec.saem.compute_fim = true;
      break;
    case Scenario::kPowerGrid:
      spec.n_individuals = 50;
      spec.replicates = 100;
      break;
    default: break;
  }
  return spec;
}

std::vector<std::string> report_names(int p, int r) {
  std::vector<std::string> names{"a", "b"};
  for (int j = 0; j < p; ++j) names.push_back(p == 1 ? "alpha" : "alpha[" + std::to_string(j) + "]");
  for (int j = 0; j < r; ++j) names.push_back(r == 1 ? "beta" : "beta[" + std::to_string(j) + "]");
  names.insert(names.end(), {"sigma1", "sigma2", "phi"});
  return names;
}

std::vector<double> report_values(const ZibrParams& th) {
  std::vector<double> v{th.a, th.b};
  for (Eigen::Index j = 0; j < th.alpha.size(); ++j) v.push_back(th.alpha[j]);
  for (Eigen::Index j = 0; j < th.beta.size(); ++j) v.push_back(th.beta[j]);
  v.insert(v.end(), {std::sqrt(th.sigma1_sq), std::sqrt(th.sigma2_sq), th.phi});
  return v;
}

MetricsRow metrics(const std::vector<double>& estimates, double true_value,
                   const std::string& parameter) {
  if (estimates.empty()) throw DomainError("metrics needs at least one estimate");
  MetricsRow row;
  row.parameter = parameter;
  row.true_value = true_value;
  row.n = static_cast<int>(estimates.size());
  const double n = static_cast<double>(estimates.size());
  double sum = 0.0, abs_sum = 0.0, sq_sum = 0.0;
  for (double e : estimates) {
    const double d = e - true_value;
    sum += d;
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  row.bias = sum / n;
  row.mae = abs_sum / n;
  row.rmse = std::sqrt(sq_sum / n);
  double var = 0.0;
  for (double e : estimates) {
    const double d = e - true_value - row.bias;
    var += d * d;
  }
  row.sd = std::sqrt(var / n);
  return row;
}

ReplicateRecord run_replicate(const StudySpec& spec, int replicate, int grid_index) {
  ReplicateRecord rec;
  rec.replicate = replicate;
  rec.grid_index = grid_index;
  try {
    const ZibrParams truth = replicate_truth(spec, grid_index);
    const std::uint64_t base = task_base_seed(spec, grid_index);
    const auto seed_for = [&](std::uint64_t role) {
      return split_seed(base, static_cast<std::uint64_t>(replicate), role);
    };

    Dataset data = generate(SimConfig{truth, spec.n_individuals, spec.t_per_individual, seed_for(1)});
    if (spec.dropout > 0.0) data = mcar_dropout(data, spec.dropout, seed_for(2));
    if (spec.interpolate) data = zibr::interpolate(data, spec.t_per_individual);

    const ZibrParams init = spec.init ? *spec.init : study_init();
    SaemConfig cfg = spec.saem;
    cfg.seed = seed_for(3);
    const FitResult full = fit(data, init, cfg);
    rec.estimates = report_values(full.params);

    const std::size_t n_report = rec.estimates.size();
    rec.std_errors.assign(n_report, kNaN);
    rec.wald_p.assign(n_report, kNaN);
    if (full.std_errors) {
      const Eigen::VectorXd& se = *full.std_errors;
      const int p = full.params.p();
      const int r = full.params.r();
      for (int j = 0; j < 2 + p + r; ++j) rec.std_errors[static_cast<std::size_t>(j)] = se[j];
      // Delta method from the variance scale to the SD scale.
      rec.std_errors[n_report - 3] = se[2 + p + r] / (2.0 * std::sqrt(full.params.sigma1_sq));
      rec.std_errors[n_report - 2] = se[3 + p + r] / (2.0 * std::sqrt(full.params.sigma2_sq));
      rec.std_errors[n_report - 1] = se[4 + p + r];
      for (int j = 0; j < 2 + p + r; ++j) {
        const auto idx = static_cast<std::size_t>(j);
        if (rec.std_errors[idx] > 0.0) rec.wald_p[idx] = wald(rec.estimates[idx], rec.std_errors[idx]).p_value;
      }
    } else if (!tested_parameters(spec, full.params.p(), full.params.r()).empty()) {
      throw NumericalError("observed information is not positive definite; no standard errors");
    }

    if (needs_lrt(spec)) {
      const Dataset reduced_data = select_covariates(data, {}, {});
      ZibrParams reduced_init = init;
      reduced_init.alpha.resize(0);
      reduced_init.beta.resize(0);
      SaemConfig reduced_cfg = spec.saem;
      reduced_cfg.seed = seed_for(4);
      reduced_cfg.compute_fim = false;
      const FitResult reduced = fit(reduced_data, reduced_init, reduced_cfg);
      if (!full.moments || !reduced.moments) throw NumericalError("LRT needs conditional moments (k2 > 0)");
      IsConfig is_full = spec.is;
      is_full.seed = seed_for(5);
      IsConfig is_reduced = spec.is;
      is_reduced.seed = seed_for(6);
      rec.loglik_full = loglik_is(full.params, data, *full.moments, is_full).loglik;
      rec.loglik_reduced = loglik_is(reduced.params, reduced_data, *reduced.moments, is_reduced).loglik;
      const TestResult t = lrt(rec.loglik_full, rec.loglik_reduced, full.params.p() + full.params.r());
      rec.lrt_statistic = t.statistic;
      rec.lrt_p = t.p_value;
      rec.lrt_warning = t.warning;
    }
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

StudyReport run_study(const StudySpec& spec) {
  spec.validate();
  StudyReport report;
  report.spec = spec;
  report.version = ZIBR_VERSION;

  const int grid = is_power(spec) ? static_cast<int>(spec.power_grid.size()) : 1;
  const int tasks = grid * spec.replicates;
  report.replicates.resize(static_cast<std::size_t>(tasks));
  const int threads = spec.workers > 0 ? spec.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int t = 0; t < tasks; ++t) {
    const int g = is_power(spec) ? t / spec.replicates : -1;
    report.replicates[static_cast<std::size_t>(t)] = run_replicate(spec, t % spec.replicates, g);
  }

  for (const auto& rec : report.replicates) report.failures += rec.ok ? 0 : 1;
  report.failed = report.failures > 0.05 * tasks;

  const ZibrParams truth0 = replicate_truth(spec, is_power(spec) ? 0 : -1);
  const auto names = report_names(truth0.p(), truth0.r());

  if (!is_power(spec)) {
    const auto truth_values = report_values(truth0);
    for (std::size_t j = 0; j < names.size(); ++j) {
      std::vector<double> est;
      for (const auto& rec : report.replicates) {
        if (rec.ok) est.push_back(rec.estimates[j]);
      }
      if (est.empty()) continue;
      report.metrics.push_back(metrics(est, truth_values[j], names[j]));

      const auto [lo_it, hi_it] = std::minmax_element(est.begin(), est.end());
      double lo = *lo_it, hi = *hi_it;
      if (hi <= lo) {
        lo -= 0.5;
        hi += 0.5;
      }
      const double width = (hi - lo) / spec.histogram_bins;
      std::vector<int> counts(static_cast<std::size_t>(spec.histogram_bins), 0);
      for (double e : est) {
        auto b = static_cast<int>((e - lo) / width);
        b = std::clamp(b, 0, spec.histogram_bins - 1);
        ++counts[static_cast<std::size_t>(b)];
      }
      for (int b = 0; b < spec.histogram_bins; ++b) {
        const int c = counts[static_cast<std::size_t>(b)];
        report.histograms.push_back(HistogramBin{names[j], lo + b * width, lo + (b + 1) * width, c,
                                                 c / (static_cast<double>(est.size()) * width)});
      }
    }
  }

  if (spec.scenario == Scenario::kLrtNull) {
    int ok = 0, rejected = 0;
    for (const auto& rec : report.replicates) {
      if (!rec.ok) continue;
      ++ok;
      rejected += rec.lrt_p < spec.level ? 1 : 0;
    }
    if (ok > 0) report.rejection_rates["lrt"] = static_cast<double>(rejected) / ok;
  }
  for (const auto& name : tested_parameters(spec, truth0.p(), truth0.r())) {
    const auto j = static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
    int ok = 0, rejected = 0;
    for (const auto& rec : report.replicates) {
      if (!rec.ok || std::isnan(rec.wald_p[j])) continue;
      ++ok;
      rejected += rec.wald_p[j] < spec.level ? 1 : 0;
    }
    if (ok > 0) report.rejection_rates["wald_" + name] = static_cast<double>(rejected) / ok;
  }
  if (is_power(spec)) {
    for (int g = 0; g < grid; ++g) {
      PowerPoint pt;
      pt.alpha0 = spec.power_grid[static_cast<std::size_t>(g)];
      int rejected = 0;
      for (const auto& rec : report.replicates) {
        if (rec.grid_index != g || !rec.ok) continue;
        ++pt.n_ok;
        rejected += rec.lrt_p < spec.level ? 1 : 0;
      }
      pt.rejection_rate = pt.n_ok > 0 ? static_cast<double>(rejected) / pt.n_ok : kNaN;
      report.power.push_back(pt);
    }
  }
  return report;
}

std::vector<PowerPoint> power_curve(const StudySpec& spec) {
  if (spec.scenario != Scenario::kPowerGrid) throw DomainError("power_curve needs the power_grid scenario");
  return run_study(spec).power;
}

std::string describe(const StudySpec& spec) {
  std::ostringstream s;
  s << "scenario=" << to_string(spec.scenario) << '\n'
    << "replicates=" << spec.replicates << '\n'
    << "n_individuals=" << spec.n_individuals << '\n'
    << "t_per_individual=" << spec.t_per_individual << '\n'
    << "dropout=" << format_double(spec.dropout) << '\n'
    << "interpolate=" << (spec.interpolate ? "true" : "false") << '\n'
    << "truth=" << (spec.truth ? format_params(*spec.truth) : "scenario") << '\n'
    << "init=" << format_params(spec.init ? *spec.init : study_init()) << '\n'
    << "k1=" << spec.saem.schedule.k1 << '\n'
    << "k2=" << spec.saem.schedule.k2 << '\n'
    << "chains=" << spec.saem.chains << '\n'
    << "mcmc_kernels=" << spec.saem.mcmc.n_kernels_per_sstep << '\n'
    << "rw_scale_a=" << format_double(spec.saem.mcmc.rw_scale_a) << '\n'
    << "rw_scale_b=" << format_double(spec.saem.mcmc.rw_scale_b) << '\n'
    << "adapt=" << (spec.saem.mcmc.adapt ? "true" : "false") << '\n'
    << "target_acceptance=" << format_double(spec.saem.mcmc.target_acceptance) << '\n'
    << "inner_tolerance=" << format_double(spec.saem.inner.gradient_tolerance) << '\n'
    << "inner_max_iterations=" << spec.saem.inner.max_iterations << '\n'
    << "compute_fim=" << (spec.saem.compute_fim ? "true" : "false") << '\n'
    << "is_samples=" << spec.is.k_samples << '\n'
    << "is_df=" << format_double(spec.is.nu) << '\n';
  s << "power_grid=";
  for (std::size_t g = 0; g < spec.power_grid.size(); ++g) {
    s << (g ? ";" : "") << format_double(spec.power_grid[g]);
  }
  s << '\n'
    << "power_setting=" << spec.power_setting << '\n'
    << "level=" << format_double(spec.level) << '\n'
    << "histogram_bins=" << spec.histogram_bins << '\n'
    << "seed=" << spec.seed << '\n';
  return s.str();
}

void write_report(const StudyReport& report, const std::string& directory) {
  namespace fs = std::filesystem;
  const fs::path dir(directory);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + directory + "': " + ec.message());
  const std::string header = artifact_header(report);

  {
    auto out = open_out(dir / "summary.txt");
    out << header << "version=" << report.version << '\n'
        << describe(report.spec) << "config_hash=" << hex64(fnv1a64(describe(report.spec))) << '\n'
        << "failures=" << report.failures << '\n'
        << "failed=" << (report.failed ? "true" : "false") << '\n';
    for (const auto& [name, rate] : report.rejection_rates) {
      out << "rejection." << name << '=' << format_double(rate) << '\n';
    }
    for (const auto& pt : report.power) {
      out << "power." << format_double(pt.alpha0) << '=' << format_double(pt.rejection_rate) << '\n';
    }
    for (const auto& m : report.metrics) {
      out << "metric." << m.parameter << ".bias=" << format_double(m.bias) << '\n'
          << "metric." << m.parameter << ".mae=" << format_double(m.mae) << '\n'
          << "metric." << m.parameter << ".rmse=" << format_double(m.rmse) << '\n';
    }
  }
  {
    auto out = open_out(dir / "metrics.csv");
    out << header << "parameter,true_value,bias,mae,rmse,sd,n\n";
    for (const auto& m : report.metrics) {
      out << m.parameter << ',' << format_double(m.true_value) << ',' << format_double(m.bias) << ','
          << format_double(m.mae) << ',' << format_double(m.rmse) << ',' << format_double(m.sd) << ','
          << m.n << '\n';
    }
  }
  {
    auto out = open_out(dir / "replicates.csv");
    const ZibrParams th = replicate_truth(report.spec, report.power.empty() ? -1 : 0);
    const auto names = report_names(th.p(), th.r());
    out << header << "replicate,grid_index,ok";
    for (const auto& n : names) out << ',' << n;
    for (const auto& n : names) out << ",se_" << n;
    for (const auto& n : names) out << ",wald_p_" << n;
    out << ",loglik_full,loglik_reduced,lrt_statistic,lrt_p,error\n";
    for (const auto& rec : report.replicates) {
      out << rec.replicate << ',' << rec.grid_index << ',' << (rec.ok ? 1 : 0);
      for (std::size_t j = 0; j < names.size(); ++j) {
        out << ',' << (rec.ok ? format_double(rec.estimates[j]) : "");
      }
      for (std::size_t j = 0; j < names.size(); ++j) {
        out << ',' << (rec.ok ? format_double(rec.std_errors[j]) : "");
      }
      for (std::size_t j = 0; j < names.size(); ++j) {
        out << ',' << (rec.ok ? format_double(rec.wald_p[j]) : "");
      }
      out << ',' << format_double(rec.loglik_full) << ',' << format_double(rec.loglik_reduced) << ','
          << format_double(rec.lrt_statistic) << ',' << format_double(rec.lrt_p) << ',';
      std::string err = rec.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      out << err << '\n';
    }
  }
  {
    auto out = open_out(dir / "histograms.csv");
    out << header << "parameter,bin_lo,bin_hi,count,density\n";
    for (const auto& h : report.histograms) {
      out << h.parameter << ',' << format_double(h.lo) << ',' << format_double(h.hi) << ',' << h.count
          << ',' << format_double(h.density) << '\n';
    }
  }
  if (!report.power.empty()) {
    auto out = open_out(dir / "power.csv");
    out << header << "alpha0,rejection_rate,n_ok\n";
    for (const auto& pt : report.power) {
      out << format_double(pt.alpha0) << ',' << format_double(pt.rejection_rate) << ',' << pt.n_ok << '\n';
    }
  }
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DimensionError("spearman: inputs differ in length");
  const std::size_t n = x.size();
  if (n < 2) return kNaN;
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t l, std::size_t r) { return v[l] < v[r]; });
    std::vector<double> rk(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) rk[idx[k]] = avg;
      i = j + 1;
    }
    return rk;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return kNaN;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace zibr
