// Acceptance run: one PASS/FAIL line per criterion. Arguments select criteria by number.

#include "quadrature.hpp"
#include "support.hpp"

#include "zibr/bench.hpp"
#include "zibr/fim.hpp"
#include "zibr/loglik.hpp"
#include "zibr/optimizer.hpp"
#include "zibr/saem.hpp"
#include "zibr/sampler.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace zibr;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    detail << (ok ? "" : "!") << what << "; ";
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const MetricsRow& row(const StudyReport& rep, const std::string& name) {
  for (const auto& m : rep.metrics) {
    if (m.parameter == name) return m;
  }
  throw std::runtime_error("no metrics row for " + name);
}

StudyReport study(StudySpec spec, const std::string& label) {
  const auto t0 = std::chrono::steady_clock::now();
  std::cerr << "  running " << label << " (" << spec.replicates << " replicates)" << std::endl;
  StudyReport rep = run_study(spec);
  std::cerr << "  " << label << " done in " << fmt(seconds_since(t0)) << " s, " << rep.failures
            << " failed replicates" << std::endl;
  return rep;
}

void reduced(StudySpec& spec) { spec.saem.schedule = {300, 100}; }

void check_bias(Outcome& out, const StudyReport& rep, const std::string& tag,
                const std::vector<std::string>& names) {
  for (const auto& n : names) {
    const double b = row(rep, n).bias;
    out.require(std::abs(b) < 0.04, tag + "bias(" + n + ")=" + fmt(b));
  }
  out.require(!rep.failed, tag + "failures=" + std::to_string(rep.failures));
}

void in_band(Outcome& out, double rate, double lo, double hi, const std::string& what) {
  out.require(rate >= lo && rate <= hi, what + "=" + fmt(rate) + " in [" + fmt(lo) + "," + fmt(hi) + "]");
}

double rate(const StudyReport& rep, const std::string& key) {
  const auto it = rep.rejection_rates.find(key);
  return it == rep.rejection_rates.end() ? std::nan("") : it->second;
}

void criterion1(Outcome& out) {
  StudySpec spec = default_spec(Scenario::kSetting2);
  spec.seed = 101;
  const StudyReport rep = study(spec, "setting2 (750, 250)");
  check_bias(out, rep, "", {"a", "b", "alpha", "beta"});
  const double ra = row(rep, "a").rmse, rs2 = row(rep, "sigma2").rmse;
  out.require(ra >= 0.10 && ra <= 0.19, "rmse(a)=" + fmt(ra));
  out.require(rs2 < 0.10, "rmse(sigma2)=" + fmt(rs2));

  reduced(spec);
  const StudyReport fast = study(spec, "setting2 (300, 100)");
  check_bias(out, fast, "reduced ", {"a", "b", "alpha", "beta"});
}

void criterion2(Outcome& out) {
  StudySpec spec = default_spec(Scenario::kAppendixA);
  spec.seed = 102;
  const StudyReport rep = study(spec, "setting2, 20% dropout");
  check_bias(out, rep, "", {"a", "b"});
}

void criterion3(Outcome& out) {
  for (double dropout : {0.0, 0.2}) {
    StudySpec spec = default_spec(Scenario::kLrtNull);
    spec.dropout = dropout;
    spec.seed = 103;
    reduced(spec);
    const std::string tag = dropout == 0.0 ? "balanced" : "dropout";
    const StudyReport rep = study(spec, "lrt null " + tag);
    in_band(out, rate(rep, "lrt"), 0.024, 0.085, tag + " rate");
    out.require(!rep.failed, tag + " failures=" + std::to_string(rep.failures));
  }
}

void criterion4(Outcome& out) {
  StudySpec spec = default_spec(Scenario::kWaldNull);
  spec.saem.chains = 10;
  spec.seed = 104;
  const StudyReport rep = study(spec, "wald fixed-effect null");
  in_band(out, rate(rep, "wald_alpha"), 0.03, 0.12, "alpha rate");
  in_band(out, rate(rep, "wald_beta"), 0.03, 0.12, "beta rate");
  out.require(!rep.failed, "failures=" + std::to_string(rep.failures));
}

void criterion5(Outcome& out) {
  StudySpec spec = default_spec(Scenario::kWaldRandomNull);
  spec.seed = 105;
  const StudyReport rep = study(spec, "wald random-effect null");
  in_band(out, rate(rep, "wald_a"), 0.024, 0.095, "a rate");
  in_band(out, rate(rep, "wald_b"), 0.024, 0.095, "b rate");
  out.require(!rep.failed, "failures=" + std::to_string(rep.failures));
}

Dataset tiny_dataset() {
  Dataset data;
  data.p = 1;
  data.r = 1;
  const double ys[3][2] = {{0.0, 0.35}, {0.12, 0.6}, {0.0, 0.0}};
  for (int i = 0; i < 3; ++i) {
    Individual ind{"s" + std::to_string(i + 1), {}};
    for (int t = 0; t < 2; ++t) {
      const Eigen::VectorXd cov = Eigen::VectorXd::Constant(1, i == 1 ? 1.0 : 0.0);
      ind.obs.push_back(Observation{static_cast<double>(t + 1), ys[i][t], cov, cov});
    }
    data.individuals.push_back(std::move(ind));
  }
  return data;
}

void criterion6(Outcome& out) {
  const Dataset data = tiny_dataset();
  const ZibrParams th = test::make_params(6.4, -0.5, -0.5, {0.5}, {0.5}, 0.49, 0.25);

  // Proposal moments from the sampler run at the evaluation point.
  const PackedData packed = PackedData::from(data);
  ChainState chain = make_chain(th, data.n(), 6, 0);
  MomentAccumulator acc;
  acc.reset(data.n());
  for (int q = 0; q < 2000; ++q) {
    sstep(chain, th, packed, McmcConfig{});
    if (q >= 200) acc.add(chain.effects);
  }
  const ConditionalMoments moments = conditional_moments(acc);

  IsConfig is;
  is.k_samples = 50000;
  is.seed = 66;
  const auto t0 = std::chrono::steady_clock::now();
  const LoglikEstimate est = loglik_is(th, data, moments, is);
  const double elapsed = seconds_since(t0);
  const double oracle = test::quadrature_loglik(th, data, 64).loglik;
  const double rel = std::abs(est.loglik - oracle) / std::abs(oracle);
  out.require(rel < 0.002, "is=" + fmt(est.loglik) + " gh=" + fmt(oracle) + " rel=" + fmt(rel));
  out.require(elapsed < 10.0, "is_time=" + fmt(elapsed) + "s");
}

ZibrParams unflatten(const Eigen::VectorXd& v, int p, int r) {
  ZibrParams th;
  th.a = v[0];
  th.b = v[1];
  th.alpha = v.segment(2, p);
  th.beta = v.segment(2 + p, r);
  th.sigma1_sq = v[2 + p + r];
  th.sigma2_sq = v[3 + p + r];
  th.phi = v[4 + p + r];
  return th;
}

void criterion7(Outcome& out) {
  double score_err = 0.0, hess_err = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const int p = 1 + static_cast<int>(seed % 2), r = 1 + static_cast<int>(seed % 3 == 0);
    const Dataset raw = test::random_dataset(seed, 6, 2, 6, p, r);
    const PackedData data = PackedData::from(raw);
    const RandomEffects e = test::random_effects(seed + 300, raw.n());
    const ZibrParams th = test::random_params(seed + 600, p, r);

    const Eigen::VectorXd x = flatten(th);
    auto value = [&](const Eigen::VectorXd& v) { return complete_loglik(unflatten(v, p, r), raw, e); };
    auto score = [&](const Eigen::VectorXd& v) { return score_and_hessian(unflatten(v, p, r), data, e).score; };
    const ScoreHessian sh = score_and_hessian(th, data, e);
    score_err = std::max(score_err, test::rel_error(sh.score, test::fd_gradient(value, x)));
    hess_err = std::max(hess_err, test::rel_error(sh.hessian, test::fd_jacobian(score, x)));

    const std::vector<RandomEffects> eff{e, test::random_effects(seed + 900, raw.n())};
    Eigen::VectorXd xb(r + 1);
    xb << th.beta, std::log(th.phi);
    auto bval = [&](const Eigen::VectorXd& v) { return beta_part_value(data, eff, v.head(r), v[r]); };
    auto bgrad = [&](const Eigen::VectorXd& v) { return beta_part_objective(data, eff, v.head(r), v[r]).gradient; };
    const ObjectiveDerivatives bd = beta_part_objective(data, eff, th.beta, std::log(th.phi));
    score_err = std::max(score_err, test::rel_error(bd.gradient, test::fd_gradient(bval, xb)));
    hess_err = std::max(hess_err, test::rel_error(bd.hessian, test::fd_jacobian(bgrad, xb)));

    auto lval = [&](const Eigen::VectorXd& v) { return logistic_part_value(data, eff, v); };
    auto lgrad = [&](const Eigen::VectorXd& v) { return logistic_part_objective(data, eff, v).gradient; };
    const ObjectiveDerivatives ld = logistic_part_objective(data, eff, th.alpha);
    score_err = std::max(score_err, test::rel_error(ld.gradient, test::fd_gradient(lval, th.alpha)));
    hess_err = std::max(hess_err, test::rel_error(ld.hessian, test::fd_jacobian(lgrad, th.alpha)));
  }
  out.require(score_err < 1e-5, "max score error=" + fmt(score_err));
  out.require(hess_err < 1e-4, "max hessian error=" + fmt(hess_err));
}

void criterion8(Outcome& out) {
  const Dataset data = test::random_dataset(8, 30, 3, 8, 1, 1);
  const ZibrParams init = test::make_params(5.0, -0.3, -0.2, {0.7}, {0.8}, 0.38 * 0.38, 0.31 * 0.31);
  SaemConfig cfg;
  cfg.schedule = {20, 10};
  cfg.chains = 3;
  cfg.seed = 8;

  // First iteration replaces the statistics by the chain average.
  const StepSchedule sched{750, 250};
  out.require(sched.gamma(1) == 1.0 && sched.gamma(751) == 1.0 && sched.gamma(752) == 0.5, "gamma schedule");
  Saem saem(data, init, cfg);
  saem.iterate();
  const SaemState& st = saem.state();
  Eigen::Vector2d s1 = Eigen::Vector2d::Zero();
  Eigen::Matrix2d s2 = Eigen::Matrix2d::Zero();
  for (const auto& c : st.last_chain_sums) {
    s1 += c.s1;
    s2 += c.s2;
  }
  s1 /= static_cast<double>(st.last_chain_sums.size());
  s2 /= static_cast<double>(st.last_chain_sums.size());
  const double repl = std::max((st.stats.f1 - s1).cwiseAbs().maxCoeff(), (st.stats.f2 - s2).cwiseAbs().maxCoeff());
  out.require(repl <= 1e-12 * (1.0 + s2.cwiseAbs().maxCoeff()), "replacement error=" + fmt(repl));

  // Closed-form Gaussian update against a direct two-pass mean and variance.
  double closed = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const RandomEffects e = test::random_effects(seed, 50 + 10 * seed, 1.0 + 0.1 * seed);
    const ChainSums cs = chain_sums(e);
    const ChainSums arr[1] = {cs};
    const SummaryStats stats = sa_update(SummaryStats{}, arr, 1.0);
    const GaussianUpdate g = mstep_gaussian(stats, static_cast<std::size_t>(e.rows()));
    for (int c = 0; c < 2; ++c) {
      const double mean = e.col(c).mean();
      const double var = (e.col(c).array() - mean).square().mean();
      closed = std::max({closed, std::abs(g.mu[c] - mean), std::abs(g.var[c] - var) / var});
    }
  }
  out.require(closed < 1e-12, "mstep error=" + fmt(closed));

  // Damping arithmetic.
  Engine eng(88);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double damp = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double gamma = 0.5 * (u(eng) + 3.0) / 3.0 + 1e-3;
    const double phi0 = 4.0 + u(eng), phi1 = 5.0 + u(eng);
    const Eigen::VectorXd a0 = Eigen::VectorXd::Constant(2, u(eng)), a1 = Eigen::VectorXd::Constant(2, u(eng));
    const Eigen::VectorXd b0 = Eigen::VectorXd::Constant(1, u(eng)), b1 = Eigen::VectorXd::Constant(1, u(eng));
    const DampedUpdate d = damped_update(phi0, a0, b0, phi1, a1, b1, gamma);
    damp = std::max({damp, std::abs(d.phi - (phi0 + gamma * (phi1 - phi0))),
                     (d.alpha - (a0 + gamma * (a1 - a0))).cwiseAbs().maxCoeff(),
                     (d.beta - (b0 + gamma * (b1 - b0))).cwiseAbs().maxCoeff()});
  }
  out.require(damp < 1e-12, "damping error=" + fmt(damp));

  // Repeated runs give bit-identical traces.
  const FitResult r1 = fit(data, init, cfg), r2 = fit(data, init, cfg);
  bool same = r1.trace.size() == r2.trace.size();
  for (std::size_t q = 0; same && q < r1.trace.size(); ++q) {
    same = flatten(r1.trace[q]) == flatten(r2.trace[q]);
  }
  same = same && r1.fim.h == r2.fim.h;
  out.require(same, "identical traces");
}

void criterion9(Outcome& out) {
  const int n = 10000;
  const ZibrParams th = test::make_params(6.4, -0.5, -0.5, {}, {}, 0.49, 0.25);
  Dataset empty;
  for (int i = 0; i < n; ++i) empty.individuals.push_back({"e" + std::to_string(i), {}});
  const PackedData data = PackedData::from(empty);
  ChainState st = make_chain(th, n, 9, 0);
  sstep(st, th, data, McmcConfig{});
  for (int c = 0; c < 2; ++c) {
    const double mean = c == 0 ? th.a : th.b, var = c == 0 ? th.sigma1_sq : th.sigma2_sq;
    std::vector<double> draws(n);
    for (int i = 0; i < n; ++i) draws[static_cast<std::size_t>(i)] = st.effects(i, c);
    const double d = test::ks_statistic(draws, [&](double x) { return test::normal_cdf(x, mean, var); });
    const double crit = test::ks_critical_0001(draws.size());
    out.require(d < crit, std::string(c == 0 ? "a" : "b") + " ks=" + fmt(d) + " < " + fmt(crit));
  }
}

void criterion10(Outcome& out) {
  StudySpec s1 = default_spec(Scenario::kPowerGrid);
  s1.power_setting = 1;
  s1.replicates = 100;
  s1.seed = 110;
  reduced(s1);
  const StudyReport r1 = study(s1, "power setting 1");
  std::vector<double> grid, rates;
  for (const auto& pt : r1.power) {
    grid.push_back(pt.alpha0);
    rates.push_back(pt.rejection_rate);
    out.detail << "s1(" << fmt(pt.alpha0) << ")=" << fmt(pt.rejection_rate) << "; ";
  }
  const double rho = spearman(grid, rates);
  out.require(rho > 0.0, "spearman=" + fmt(rho));

  StudySpec s4 = s1;
  s4.power_setting = 4;
  s4.power_grid = {1.0};
  const StudyReport r4 = study(s4, "power setting 4 at alpha0 = 1");
  const double top1 = r1.power.back().rejection_rate, top4 = r4.power.front().rejection_rate;
  out.require(top1 > top4, "s1(1)=" + fmt(top1) + " > s4(1)=" + fmt(top4));
  out.require(!r1.failed && !r4.failed, "failures=" + std::to_string(r1.failures + r4.failures));
}

struct Criterion {
  int id;
  const char* name;
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "setting 2 estimation accuracy", criterion1},
      {2, "unbalanced data bias", criterion2},
      {3, "LRT type-I error", criterion3},
      {4, "Wald fixed-effect type-I error", criterion4},
      {5, "Wald random-effect type-I error", criterion5},
      {6, "IS log-likelihood vs quadrature", criterion6},
      {7, "gradient suite", criterion7},
      {8, "SAEM structural invariants", criterion8},
      {9, "sampler prior recovery", criterion9},
      {10, "power curve ordering", criterion10},
  };
  std::set<int> selected;
  for (int k = 1; k < argc; ++k) selected.insert(std::atoi(argv[k]));

  // Results also go to a file, since ctest hides the output of passing tests.
  std::ofstream results("acceptance_results.txt");
  int failed = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    std::cerr << "criterion " << c.id << ": " << c.name << std::endl;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      c.run(out);
    } catch (const std::exception& e) {
      out.require(false, std::string("exception: ") + e.what());
    }
    failed += out.pass ? 0 : 1;
    std::ostringstream line;
    line << "criterion " << c.id << " " << (out.pass ? "PASS" : "FAIL") << "  " << c.name << "  ["
         << out.detail.str() << "time=" << fmt(seconds_since(t0)) << "s]";
    std::cout << line.str() << std::endl;
    results << line.str() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
