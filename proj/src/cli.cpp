#include "zibr/cli.hpp"

#include "zibr/bench.hpp"
#include "zibr/csv_io.hpp"
#include "zibr/errors.hpp"
#include "zibr/fim.hpp"
#include "zibr/inference.hpp"
#include "zibr/loglik.hpp"
#include "zibr/rng.hpp"
#include "zibr/saem.hpp"
#include "zibr/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <vector>

namespace zibr::cli {

namespace {

namespace fs = std::filesystem;

struct Settings {
  std::string input;
  std::string output;
  std::string config;
  std::uint64_t seed = 0;
  int k1 = 750;
  int k2 = 250;
  int chains = 5;
  int mcmc_kernels = 5;
  int is_samples = 500;
  double is_df = 5.0;
  std::string x_cols;
  std::string z_cols;
  std::string reduced;
  bool no_fim = false;
  std::string scenario = "setting2";
  int replicates = 200;
  int n_individuals = 100;
  int t_per_individual = 10;
  double dropout = 0.0;
  bool interpolate = false;
  int workers = 0;
  int power_setting = 1;
};

// Keys written into manifests that are not flags; `diag.*` keys are skipped as well.
const std::set<std::string> kInformationalKeys{"version", "config_hash", "subcommand", "input_hash",
                                               "artifacts"};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    out.push_back(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t j = 0; j < v.size(); ++j) s += (j ? "," : "") + v[j];
  return s;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) throw ValidationError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

// Applies file values to options that were not given on the command line.
void apply_config_file(CLI::App& sub, const std::string& path) {
  for (const auto& [key, value] : read_key_values(path)) {
    if (kInformationalKeys.count(key) || key == "config" || key.rfind("diag.", 0) == 0) continue;
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (!opt) throw ValidationError("config file '" + path + "': unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

SaemConfig saem_config(const Settings& s, std::uint64_t seed) {
  SaemConfig cfg;
  cfg.schedule.k1 = s.k1;
  cfg.schedule.k2 = s.k2;
  cfg.chains = s.chains;
  cfg.mcmc.n_kernels_per_sstep = s.mcmc_kernels;
  cfg.compute_fim = !s.no_fim;
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

IsConfig is_config(const Settings& s, std::uint64_t seed) {
  IsConfig cfg;
  cfg.k_samples = s.is_samples;
  cfg.nu = s.is_df;
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

CsvOptions csv_options(const Settings& s, const CLI::App& sub) {
  CsvOptions o;
  if (sub.count("--x-cols")) o.x_cols = split_list(s.x_cols);
  if (sub.count("--z-cols")) o.z_cols = split_list(s.z_cols);
  return o;
}

// Manifest text: every flag that shaped the run, one `key=value` per line. Reusable as --config.
std::string echo(const Settings& s, const std::string& subcommand, const Dataset* data,
                 const std::string& input_hash) {
  std::ostringstream m;
  m << "subcommand=" << subcommand << '\n' << "seed=" << s.seed << '\n';
  if (!s.input.empty()) m << "input=" << s.input << '\n' << "input_hash=" << input_hash << '\n';
  if (subcommand == "fit" || subcommand == "lrt" || subcommand == "wald" || subcommand == "bench") {
    m << "k1=" << s.k1 << '\n'
      << "k2=" << s.k2 << '\n'
      << "chains=" << s.chains << '\n'
      << "mcmc-kernels=" << s.mcmc_kernels << '\n'
      << "is-samples=" << s.is_samples << '\n'
      << "is-df=" << format_double(s.is_df) << '\n';
  }
  if (data) m << "x-cols=" << join(data->x_names) << '\n' << "z-cols=" << join(data->z_names) << '\n';
  if (subcommand == "fit" || subcommand == "lrt") m << "no-fim=" << (s.no_fim ? "true" : "false") << '\n';
  if (subcommand == "lrt") m << "reduced=" << s.reduced << '\n';
  if (subcommand == "simulate" || subcommand == "bench") {
    m << "scenario=" << s.scenario << '\n'
      << "n-individuals=" << s.n_individuals << '\n'
      << "t=" << s.t_per_individual << '\n'
      << "dropout=" << format_double(s.dropout) << '\n'
      << "interpolate=" << (s.interpolate ? "true" : "false") << '\n'
      << "power-setting=" << s.power_setting << '\n';
  }
  if (subcommand == "bench") m << "replicates=" << s.replicates << '\n';
  return m.str();
}

struct Stamp {
  std::string header;  // "# zibr <version> seed=<seed> config=<hash>\n"
  std::string hash;
};

Stamp stamp(const std::string& manifest_text, std::uint64_t seed) {
  Stamp st;
  st.hash = hex64(fnv1a64(manifest_text));
  st.header = std::string("# zibr ") + ZIBR_VERSION + " seed=" + std::to_string(seed) + " config=" + st.hash + "\n";
  return st;
}

void write_manifest(const fs::path& dir, const std::string& manifest_text, const Stamp& st,
                    const std::vector<std::string>& artifacts, const std::string& extra = "") {
  auto out = open_out(dir / "manifest.txt");
  out << st.header << "version=" << ZIBR_VERSION << '\n'
      << manifest_text << "config_hash=" << st.hash << '\n'
      << "artifacts=" << join(artifacts) << '\n'
      << extra;
}

std::vector<std::string> parameter_labels(const Dataset& data) {
  std::vector<std::string> names{"a", "b"};
  for (int j = 0; j < data.p; ++j) {
    names.push_back("alpha[" + (static_cast<std::size_t>(j) < data.x_names.size() ? data.x_names[j] : std::to_string(j)) + "]");
  }
  for (int j = 0; j < data.r; ++j) {
    names.push_back("beta[" + (static_cast<std::size_t>(j) < data.z_names.size() ? data.z_names[j] : std::to_string(j)) + "]");
  }
  names.insert(names.end(), {"sigma1_sq", "sigma2_sq", "phi"});
  return names;
}

struct Estimates {
  std::vector<std::string> names;
  Eigen::VectorXd values;
  std::vector<double> se;      // NaN when unavailable
  std::vector<double> wald_p;  // NaN for variance components and phi or without SEs
};

Estimates tabulate(const Dataset& data, const FitResult& res) {
  Estimates e;
  e.names = parameter_labels(data);
  e.values = flatten(res.params);
  const auto k = static_cast<std::size_t>(e.values.size());
  e.se.assign(k, std::nan(""));
  e.wald_p.assign(k, std::nan(""));
  if (res.std_errors) {
    for (std::size_t j = 0; j < k; ++j) e.se[j] = (*res.std_errors)[static_cast<Eigen::Index>(j)];
    const std::size_t n_tested = 2 + static_cast<std::size_t>(data.p + data.r);
    for (std::size_t j = 0; j < n_tested; ++j) {
      if (e.se[j] > 0.0) e.wald_p[j] = wald(e.values[static_cast<Eigen::Index>(j)], e.se[j]).p_value;
    }
  }
  return e;
}

std::string cell(double v) { return std::isnan(v) ? "" : format_double(v); }

void write_estimates(const fs::path& path, const Stamp& st, const Estimates& e,
                     const std::vector<double>* bh = nullptr) {
  auto out = open_out(path);
  out << st.header << "parameter,estimate,se,wald_p" << (bh ? ",wald_p_bh" : "") << '\n';
  for (std::size_t j = 0; j < e.names.size(); ++j) {
    out << e.names[j] << ',' << format_double(e.values[static_cast<Eigen::Index>(j)]) << ','
        << cell(e.se[j]) << ',' << cell(e.wald_p[j]);
    if (bh) out << ',' << cell((*bh)[j]);
    out << '\n';
  }
}

void write_trace(const fs::path& path, const Stamp& st, const Dataset& data, const FitResult& res) {
  auto out = open_out(path);
  out << st.header << "iteration";
  for (const auto& n : parameter_labels(data)) out << ',' << n;
  out << '\n';
  for (std::size_t q = 0; q < res.trace.size(); ++q) {
    out << q + 1;
    const Eigen::VectorXd v = flatten(res.trace[q]);
    for (Eigen::Index j = 0; j < v.size(); ++j) out << ',' << format_double(v[j]);
    out << '\n';
  }
}

void write_loglik(const fs::path& path, const Stamp& st, const LoglikEstimate& ll, const IsConfig& is) {
  auto out = open_out(path);
  out << st.header << "loglik=" << format_double(ll.loglik) << '\n'
      << "mc_se=" << format_double(ll.mc_se) << '\n'
      << "is_samples=" << is.k_samples << '\n'
      << "is_df=" << format_double(is.nu) << '\n';
}

std::string diagnostics_text(const FitResult& res) {
  std::ostringstream d;
  const auto& g = res.diagnostics;
  d << "diag.acceptance_prior=" << format_double(g.acceptance[0]) << '\n'
    << "diag.acceptance_rw_a=" << format_double(g.acceptance[1]) << '\n'
    << "diag.acceptance_rw_b=" << format_double(g.acceptance[2]) << '\n'
    << "diag.variance_floor_hits=" << g.variance_floor_hits << '\n'
    << "diag.phi_floor_hits=" << g.phi_floor_hits << '\n'
    << "diag.separation_flags=" << g.separation_flags << '\n'
    << "diag.standard_errors=" << (res.std_errors ? "available" : "unavailable") << '\n';
  return d.str();
}

struct Loaded {
  Dataset data;
  std::string input_hash;
};

Loaded load(const Settings& s, const CLI::App& sub) {
  if (s.input.empty()) throw ValidationError("--input is required");
  Loaded l;
  l.input_hash = hex64(fnv1a64(read_file(s.input)));
  l.data = ingest_csv(s.input, csv_options(s, sub));
  l.data.validate();
  if (l.data.n() < 2) throw ValidationError("at least two subjects are required");
  return l;
}

int cmd_fit(const Settings& s, const CLI::App& sub, std::ostream& out, bool bh) {
  const Loaded l = load(s, sub);
  ensure_dir(s.output);
  const std::string text = echo(s, bh ? "wald" : "fit", &l.data, l.input_hash);
  const Stamp st = stamp(text, s.seed);
  Settings fit_settings = s;
  if (bh) fit_settings.no_fim = false;
  const FitResult res = fit(l.data, default_init(l.data), saem_config(fit_settings, split_seed(s.seed, 1)));
  const IsConfig is = is_config(s, split_seed(s.seed, 2));
  const fs::path dir(s.output);
  std::vector<std::string> artifacts{"estimates.csv", "trace.csv", "manifest.txt"};

  const Estimates e = tabulate(l.data, res);
  std::vector<double> adjusted;
  if (bh) {
    if (!res.std_errors) throw NumericalError("observed information is not positive definite; no Wald tests");
    const std::size_t n_tested = 2 + static_cast<std::size_t>(l.data.p + l.data.r);
    std::vector<double> raw(e.wald_p.begin(), e.wald_p.begin() + static_cast<std::ptrdiff_t>(n_tested));
    adjusted = bh_adjust(raw);
    adjusted.resize(e.names.size(), std::nan(""));
  }
  write_estimates(dir / "estimates.csv", st, e, bh ? &adjusted : nullptr);
  write_trace(dir / "trace.csv", st, l.data, res);
  if (res.moments) {
    const LoglikEstimate ll = loglik_is(res.params, l.data, *res.moments, is);
    write_loglik(dir / "loglik.txt", st, ll, is);
    artifacts.push_back("loglik.txt");
    out << "loglik " << format_double(ll.loglik) << " (mc se " << format_double(ll.mc_se) << ")\n";
  }
  write_manifest(dir, text, st, artifacts, diagnostics_text(res));
  for (std::size_t j = 0; j < e.names.size(); ++j) {
    out << e.names[j] << ' ' << format_double(e.values[static_cast<Eigen::Index>(j)]);
    if (!std::isnan(e.se[j])) out << " se " << format_double(e.se[j]);
    if (!std::isnan(e.wald_p[j])) out << " p " << format_double(e.wald_p[j]);
    if (bh && !std::isnan(adjusted[j])) out << " p_bh " << format_double(adjusted[j]);
    out << '\n';
  }
  return 0;
}

// "x=c1,c2;z=c3": the covariate columns kept by the reduced model. A missing part keeps none.
std::pair<std::vector<int>, std::vector<int>> parse_reduced(const std::string& formula, const Dataset& data) {
  std::vector<int> x, z;
  std::size_t start = 0;
  while (start <= formula.size()) {
    const std::size_t semi = formula.find(';', start);
    const std::string part = formula.substr(start, semi == std::string::npos ? std::string::npos : semi - start);
    start = semi == std::string::npos ? formula.size() + 1 : semi + 1;
    if (part.empty()) continue;
    const std::size_t eq = part.find('=');
    if (eq == std::string::npos) throw ValidationError("--reduced: expected 'x=cols;z=cols', got '" + part + "'");
    const std::string key = part.substr(0, eq);
    const auto names = split_list(part.substr(eq + 1));
    const auto& pool = key == "x" ? data.x_names : data.z_names;
    if (key != "x" && key != "z") throw ValidationError("--reduced: unknown part '" + key + "'");
    auto& target = key == "x" ? x : z;
    for (const auto& n : names) {
      const auto it = std::find(pool.begin(), pool.end(), n);
      if (it == pool.end()) throw ValidationError("--reduced: column '" + n + "' is not in the full model's " + key);
      target.push_back(static_cast<int>(it - pool.begin()));
    }
  }
  return {x, z};
}

int cmd_lrt(const Settings& s, const CLI::App& sub, std::ostream& out) {
  const Loaded l = load(s, sub);
  ensure_dir(s.output);
  const std::string text = echo(s, "lrt", &l.data, l.input_hash);
  const Stamp st = stamp(text, s.seed);
  const auto [xk, zk] = parse_reduced(s.reduced, l.data);
  const Dataset reduced_data = select_covariates(l.data, xk, zk);
  const int df = (l.data.p + l.data.r) - (reduced_data.p + reduced_data.r);
  if (df < 0) throw ValidationError("--reduced must be nested in the full model");

  const FitResult full = fit(l.data, default_init(l.data), saem_config(s, split_seed(s.seed, 1)));
  if (!full.moments) throw ValidationError("the LRT needs k2 > 0 for the importance-sampling proposal");
  const IsConfig is_full = is_config(s, split_seed(s.seed, 2));
  const LoglikEstimate ll_full = loglik_is(full.params, l.data, *full.moments, is_full);
  LoglikEstimate ll_reduced = ll_full;
  TestResult t;
  t.df = df;
  if (df > 0) {
    Settings red = s;
    red.no_fim = true;
    const FitResult reduced = fit(reduced_data, default_init(reduced_data), saem_config(red, split_seed(s.seed, 3)));
    ll_reduced = loglik_is(reduced.params, reduced_data, *reduced.moments, is_config(s, split_seed(s.seed, 4)));
    t = lrt(ll_full.loglik, ll_reduced.loglik, df);
  }
  const fs::path dir(s.output);
  write_estimates(dir / "estimates.csv", st, tabulate(l.data, full));
  write_trace(dir / "trace.csv", st, l.data, full);
  write_loglik(dir / "loglik.txt", st, ll_full, is_full);
  {
    auto o = open_out(dir / "lrt.txt");
    o << st.header << "statistic=" << format_double(t.statistic) << '\n'
      << "raw_statistic=" << format_double(t.raw_statistic) << '\n'
      << "df=" << df << '\n'
      << "p_value=" << format_double(t.p_value) << '\n'
      << "warning=" << (t.warning ? "true" : "false") << '\n'
      << "loglik_full=" << format_double(ll_full.loglik) << '\n'
      << "loglik_full_mc_se=" << format_double(ll_full.mc_se) << '\n'
      << "loglik_reduced=" << format_double(ll_reduced.loglik) << '\n'
      << "loglik_reduced_mc_se=" << format_double(ll_reduced.mc_se) << '\n';
  }
  write_manifest(dir, text, st, {"estimates.csv", "trace.csv", "loglik.txt", "lrt.txt", "manifest.txt"},
                 diagnostics_text(full));
  out << "LRT statistic " << format_double(t.statistic) << " df " << df << " p " << format_double(t.p_value)
      << (t.warning ? " (warning: statistic below Monte Carlo tolerance)" : "") << '\n';
  return 0;
}

int cmd_simulate(const Settings& s, std::ostream& out) {
  if (s.output.empty()) throw ValidationError("--out is required");
  const Scenario sc = parse_scenario(s.scenario);
  const ZibrParams truth = scenario_truth(sc, s.power_setting, 0.0);
  Dataset data = generate(SimConfig{truth, s.n_individuals, s.t_per_individual, split_seed(s.seed, 1)});
  if (s.dropout > 0.0) data = mcar_dropout(data, s.dropout, split_seed(s.seed, 2));
  if (s.interpolate) data = interpolate(data, s.t_per_individual);
  const std::string text = echo(s, "simulate", nullptr, "");
  const Stamp st = stamp(text, s.seed);
  const fs::path path(s.output);
  if (path.has_parent_path()) ensure_dir(path.parent_path().string());
  auto o = open_out(path);
  o << st.header;
  emit_csv(data, o);
  if (!o) throw IoError("failed writing '" + s.output + "'");
  out << "wrote " << data.total_observations() << " observations for " << data.n() << " subjects to "
      << s.output << '\n';
  return 0;
}

int cmd_bench(const Settings& s, const CLI::App& sub, std::ostream& out) {
  StudySpec spec = default_spec(parse_scenario(s.scenario));
  spec.seed = s.seed;
  if (sub.count("--replicates")) spec.replicates = s.replicates;
  if (sub.count("--n-individuals")) spec.n_individuals = s.n_individuals;
  if (sub.count("--t")) spec.t_per_individual = s.t_per_individual;
  if (sub.count("--dropout")) spec.dropout = s.dropout;
  if (sub.count("--interpolate")) spec.interpolate = s.interpolate;
  if (sub.count("--k1")) spec.saem.schedule.k1 = s.k1;
  if (sub.count("--k2")) spec.saem.schedule.k2 = s.k2;
  if (sub.count("--chains")) spec.saem.chains = s.chains;
  if (sub.count("--mcmc-kernels")) spec.saem.mcmc.n_kernels_per_sstep = s.mcmc_kernels;
  if (sub.count("--is-samples")) spec.is.k_samples = s.is_samples;
  if (sub.count("--is-df")) spec.is.nu = s.is_df;
  if (sub.count("--power-setting")) spec.power_setting = s.power_setting;
  spec.workers = s.workers;
  ensure_dir(s.output);
  const StudyReport report = run_study(spec);
  write_report(report, s.output);
  for (const auto& m : report.metrics) {
    out << m.parameter << " bias " << format_double(m.bias) << " mae " << format_double(m.mae) << " rmse "
        << format_double(m.rmse) << '\n';
  }
  for (const auto& [name, rate] : report.rejection_rates) out << "rejection " << name << ' ' << format_double(rate) << '\n';
  for (const auto& pt : report.power) {
    out << "power alpha0=" << format_double(pt.alpha0) << ' ' << format_double(pt.rejection_rate) << '\n';
  }
  out << "failures " << report.failures << " of " << report.replicates.size() << '\n';
  if (report.failed) throw NumericalError("more than 5% of replicates failed");
  return 0;
}

std::string error_record(const std::string& type, const std::string& message, std::size_t line) {
  nlohmann::json j;
  j["status"] = "error";
  j["type"] = type;
  j["message"] = message;
  if (line) j["line"] = line;
  return j.dump();
}

}  // namespace

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("config file '" + path + "': expected key=value", n);
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
  }
  return kv;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Settings s;
  CLI::App app{"Zero-inflated Beta mixed models fitted by stochastic approximation EM"};
  app.set_version_flag("--version", std::string(ZIBR_VERSION));
  app.require_subcommand(1);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", s.seed, "Master random seed (required)");
    sub->add_option("--out", s.output, "Output directory (file for simulate)");
    sub->add_option("--config", s.config, "key=value file; command-line flags take precedence");
  };
  auto estimation = [&](CLI::App* sub) {
    sub->add_option("--k1", s.k1, "Iterations with step size 1")->check(CLI::Range(0, 1000000));
    sub->add_option("--k2", s.k2, "Iterations with decreasing step size")->check(CLI::Range(0, 1000000));
    sub->add_option("--chains", s.chains, "Markov chains")->check(CLI::Range(1, 1000));
    sub->add_option("--mcmc-kernels", s.mcmc_kernels, "MH sweeps per iteration")->check(CLI::Range(1, 1000));
    sub->add_option("--is-samples", s.is_samples, "Importance samples per subject")->check(CLI::Range(1, 10000000));
    sub->add_option("--is-df", s.is_df, "Student-t proposal degrees of freedom")->check(CLI::PositiveNumber);
  };
  auto data_input = [&](CLI::App* sub) {
    sub->add_option("--input", s.input, "Long-format CSV: subject,time,y,<covariates>");
    sub->add_option("--x-cols", s.x_cols, "Comma-separated presence covariates (default: all)");
    sub->add_option("--z-cols", s.z_cols, "Comma-separated abundance covariates (default: all)");
  };
  auto design = [&](CLI::App* sub) {
    sub->add_option("--scenario", s.scenario, "setting1|setting2|appendixA|lrt_null|wald_null|wald_random_null|power_grid");
    sub->add_option("--n-individuals", s.n_individuals, "Subjects (even)")->check(CLI::Range(2, 10000000));
    sub->add_option("--t", s.t_per_individual, "Observations per subject")->check(CLI::Range(1, 1000000));
    sub->add_option("--dropout", s.dropout, "MCAR dropout fraction")->check(CLI::Range(0.0, 0.999));
    sub->add_flag("--interpolate", s.interpolate, "Refill dropped observations by interpolation / LOCF");
    sub->add_option("--power-setting", s.power_setting, "Power-grid setting 1..4")->check(CLI::Range(1, 4));
  };

  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit the model to a CSV file");
  common(fit_cmd);
  estimation(fit_cmd);
  data_input(fit_cmd);
  fit_cmd->add_flag("--no-fim", s.no_fim, "Skip the observed information (no standard errors)");

  CLI::App* wald_cmd = app.add_subcommand("wald", "Fit and report Wald tests with BH adjustment");
  common(wald_cmd);
  estimation(wald_cmd);
  data_input(wald_cmd);

  CLI::App* lrt_cmd = app.add_subcommand("lrt", "Likelihood ratio test of a nested covariate set");
  common(lrt_cmd);
  estimation(lrt_cmd);
  data_input(lrt_cmd);
  lrt_cmd->add_option("--reduced", s.reduced, "Reduced model columns, e.g. 'x=;z=' or 'x=c1;z=c1'");
  lrt_cmd->add_flag("--no-fim", s.no_fim, "Skip the observed information for the full fit");

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Write a simulated dataset as CSV");
  common(sim_cmd);
  design(sim_cmd);

  CLI::App* bench_cmd = app.add_subcommand("bench", "Run a Monte Carlo study");
  common(bench_cmd);
  estimation(bench_cmd);
  design(bench_cmd);
  bench_cmd->add_option("--replicates", s.replicates, "Replicates (per grid point)")->check(CLI::Range(1, 100000000));
  bench_cmd->add_option("--workers", s.workers, "Worker threads (0: OpenMP default)")->check(CLI::Range(0, 4096));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (!s.config.empty()) apply_config_file(*sub, s.config);
    if (sub->count("--seed") == 0) {
      throw ValidationError("--seed is required (there is no clock-based default)");
    }
    if (sub == fit_cmd) return cmd_fit(s, *sub, out, false);
    if (sub == wald_cmd) return cmd_fit(s, *sub, out, true);
    if (sub == lrt_cmd) return cmd_lrt(s, *sub, out);
    if (sub == sim_cmd) return cmd_simulate(s, out);
    return cmd_bench(s, *sub, out);
  } catch (const CLI::ParseError& e) {
    err << error_record("UsageError", e.what(), 0) << '\n';
    return 2;
  } catch (const ValidationError& e) {
    err << error_record("ValidationError", e.what(), e.line()) << '\n';
  } catch (const DimensionError& e) {
    err << error_record("DimensionError", e.what(), 0) << '\n';
  } catch (const DomainError& e) {
    err << error_record("DomainError", e.what(), 0) << '\n';
  } catch (const NumericalError& e) {
    err << error_record("NumericalError", e.what(), 0) << '\n';
  } catch (const IoError& e) {
    err << error_record("IoError", e.what(), 0) << '\n';
  } catch (const std::exception& e) {
    err << error_record("Error", e.what(), 0) << '\n';
  }
  return 1;
}

}  // namespace zibr::cli
