#include "zibr/saem.hpp"

#include "zibr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace zibr {

double StepSchedule::gamma(int q) const {
  if (q <= k1) return 1.0;
  return 1.0 / static_cast<double>(q - k1);
}

void StepSchedule::validate() const {
  if (k1 < 0 || k2 < 0 || k1 + k2 < 1) throw DomainError("schedule needs k1, k2 >= 0 and k1 + k2 >= 1");
}

void SaemConfig::validate() const {
  schedule.validate();
  if (chains < 1) throw DomainError("at least one chain is required");
  mcmc.validate();
}

ChainSums chain_sums(const RandomEffects& effects) {
  ChainSums s;
  for (Eigen::Index i = 0; i < effects.rows(); ++i) {
    const Eigen::Vector2d v = effects.row(i).transpose();
    s.s1 += v;
    s.s2 += v * v.transpose();
  }
  return s;
}

SummaryStats sa_update(const SummaryStats& prev, std::span<const ChainSums> chains, double gamma) {
  if (chains.empty()) throw DimensionError("sa_update: no chains");
  Eigen::Vector2d s1 = Eigen::Vector2d::Zero();
  Eigen::Matrix2d s2 = Eigen::Matrix2d::Zero();
  for (const auto& c : chains) {
    s1 += c.s1;
    s2 += c.s2;
  }
  const double inv_m = 1.0 / static_cast<double>(chains.size());
  s1 *= inv_m;
  s2 *= inv_m;
  SummaryStats out;
  if (gamma == 1.0) {
    out.f1 = s1;
    out.f2 = s2;
  } else {
    out.f1 = prev.f1 + gamma * (s1 - prev.f1);
    out.f2 = prev.f2 + gamma * (s2 - prev.f2);
  }
  return out;
}

GaussianUpdate mstep_gaussian(const SummaryStats& stats, std::size_t n) {
  if (n < 2) throw DomainError("mstep_gaussian requires at least two individuals");
  const double nn = static_cast<double>(n);
  GaussianUpdate g;
  g.mu = stats.f1 / nn;
  const Eigen::Matrix2d cov = stats.f2 / nn - stats.f1 * stats.f1.transpose() / (nn * nn);
  g.var = cov.diagonal();
  for (int k = 0; k < 2; ++k) {
    if (!(g.var[k] > kVarianceFloor)) {
      g.var[k] = kVarianceFloor;
      g.floored = true;
    }
  }
  return g;
}

DampedUpdate damped_update(double phi_old, const Eigen::VectorXd& alpha_old,
                           const Eigen::VectorXd& beta_old, double phi_inner,
                           const Eigen::VectorXd& alpha_inner, const Eigen::VectorXd& beta_inner,
                           double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("damped_update: gamma must lie in (0, 1]");
  if (alpha_old.size() != alpha_inner.size() || beta_old.size() != beta_inner.size()) {
    throw DimensionError("damped_update: coefficient lengths differ");
  }
  DampedUpdate out;
  out.phi = phi_old + gamma * (phi_inner - phi_old);
  out.alpha = alpha_old + gamma * (alpha_inner - alpha_old);
  out.beta = beta_old + gamma * (beta_inner - beta_old);
  if (!(out.phi > kPhiFloor)) {
    out.phi = kPhiFloor;
    out.phi_floored = true;
  }
  return out;
}

void MomentAccumulator::reset(std::size_t n) {
  mean = Eigen::Matrix<double, Eigen::Dynamic, 2>::Zero(static_cast<Eigen::Index>(n), 2);
  m2 = mean;
  count = 0;
}

void MomentAccumulator::add(const RandomEffects& draws) {
  if (draws.rows() != mean.rows()) throw DimensionError("moment accumulator size mismatch");
  ++count;
  const double inv = 1.0 / static_cast<double>(count);
  for (Eigen::Index i = 0; i < draws.rows(); ++i) {
    for (int k = 0; k < 2; ++k) {
      const double delta = draws(i, k) - mean(i, k);
      mean(i, k) += delta * inv;
      m2(i, k) += delta * (draws(i, k) - mean(i, k));
    }
  }
}

ConditionalMoments conditional_moments(const MomentAccumulator& acc) {
  if (acc.count == 0) throw std::logic_error("conditional moments are undefined: no k2-phase draws were accumulated");
  ConditionalMoments out;
  out.mean = acc.mean;
  const double denom = acc.count > 1 ? static_cast<double>(acc.count - 1) : 1.0;
  out.var = acc.m2 / denom;
  return out;
}

ConditionalMoments conditional_moments(const SaemState& state) { return conditional_moments(state.moments); }

Saem::Saem(const Dataset& data, const ZibrParams& init, const SaemConfig& config, SimulationStep step)
    : data_(PackedData::from(data)), config_(config), step_(std::move(step)) {
  config_.validate();
  init.validate();
  check_dimensions(init, data);
  if (!(init.sigma1_sq > 0.0 && init.sigma2_sq > 0.0)) throw DomainError("initial variances must be positive");
  if (data.n() < 2) throw DomainError("SAEM needs at least two individuals");
  if (!step_) step_ = [](ChainState& s, const ZibrParams& p, const PackedData& d, const McmcConfig& c) {
    return sstep(s, p, d, c);
  };
  state_.params = init;
  state_.mcmc = config_.mcmc;
  state_.fim = FimAccumulator::zeros(init.p(), init.r());
  state_.moments.reset(data.n());
  state_.chains.reserve(static_cast<std::size_t>(config_.chains));
  for (int l = 0; l < config_.chains; ++l) {
    state_.chains.push_back(make_chain(init, data.n(), config_.seed, static_cast<std::uint64_t>(l)));
  }
  state_.trace.reserve(static_cast<std::size_t>(config_.schedule.total()));
}

void Saem::iterate() {
  if (done()) return;
  const int q = ++state_.q;
  const double gamma = config_.schedule.gamma(q);
  const ZibrParams prev = state_.params;
  auto& diag = state_.diagnostics;

  KernelCounters counters;
  for (auto& chain : state_.chains) counters += step_(chain, prev, data_, state_.mcmc);

  std::vector<RandomEffects> draws;
  draws.reserve(state_.chains.size());
  state_.last_chain_sums.clear();
  for (const auto& chain : state_.chains) {
    draws.push_back(chain.effects);
    state_.last_chain_sums.push_back(chain_sums(chain.effects));
  }
  state_.stats = sa_update(state_.stats, state_.last_chain_sums, gamma);

  const GaussianUpdate gauss = mstep_gaussian(state_.stats, data_.n());
  if (gauss.floored) ++diag.variance_floor_hits;

  const OptimResult beta_fit = maximize_beta_part(data_, draws, prev.beta, prev.phi, config_.inner);
  const OptimResult alpha_fit = maximize_logistic_part(data_, draws, prev.alpha, config_.inner);
  if (!beta_fit.converged) ++diag.beta_not_converged;
  if (!alpha_fit.converged) ++diag.logistic_not_converged;
  if (alpha_fit.separation) ++diag.separation_flags;

  const int r = data_.r;
  const DampedUpdate damped = damped_update(prev.phi, prev.alpha, prev.beta, beta_fit.argmax[r],
                                            alpha_fit.argmax, beta_fit.argmax.head(r), gamma);
  if (damped.phi_floored) ++diag.phi_floor_hits;

  ZibrParams next;
  next.a = gauss.mu[0];
  next.b = gauss.mu[1];
  next.sigma1_sq = gauss.var[0];
  next.sigma2_sq = gauss.var[1];
  next.phi = damped.phi;
  next.alpha = damped.alpha;
  next.beta = damped.beta;
  if (!next.all_finite()) {
    std::ostringstream msg;
    msg << "non-finite parameter at SAEM iteration " << q << ": phi=" << next.phi << " a=" << next.a
        << " b=" << next.b << " alpha=" << next.alpha.transpose() << " beta=" << next.beta.transpose()
        << " sigma1_sq=" << next.sigma1_sq << " sigma2_sq=" << next.sigma2_sq
        << " (previous: phi=" << prev.phi << " a=" << prev.a << " b=" << prev.b << ")";
    throw NumericalError(msg.str());
  }
  state_.params = next;

  // With gamma = 1 every earlier FIM update is overwritten, so start at the last burn-in iteration.
  if (config_.compute_fim && q >= std::max(config_.schedule.k1, 1)) {
    std::vector<ScoreHessian> per_chain;
    per_chain.reserve(draws.size());
    for (const auto& d : draws) per_chain.push_back(score_and_hessian(next, data_, d));
    state_.fim = fim_update(state_.fim, per_chain, gamma);
  }
  if (q > config_.schedule.k1) {
    for (const auto& d : draws) state_.moments.add(d);
  }
  state_.trace.push_back(next);
  if (state_.mcmc.adapt && q <= config_.schedule.k1) state_.mcmc = adapt_scales(counters, state_.mcmc);
}

void Saem::run() {
  while (!done()) iterate();
}

FitResult Saem::result() const {
  FitResult res;
  res.params = state_.params;
  res.trace = state_.trace;
  res.diagnostics = state_.diagnostics;
  res.diagnostics.final_mcmc = state_.mcmc;
  KernelCounters total;
  for (const auto& c : state_.chains) total += c.counters;
  for (int k = 0; k < 3; ++k) res.diagnostics.acceptance[static_cast<std::size_t>(k)] = total.rate(k);
  res.fim = state_.fim;
  res.manifest = state_.fim.manifest;
  if (config_.compute_fim && state_.fim.updates > 0) {
    const StandardErrors se = standard_errors(state_.fim);
    res.diagnostics.fim_min_eigenvalue = se.min_eigenvalue;
    res.std_errors = se.se;
    res.covariance = se.covariance;
  }
  if (state_.moments.count > 0) res.moments = conditional_moments(state_);
  res.seed = config_.seed;
  res.config = config_;
  return res;
}

FitResult fit(const Dataset& data, const ZibrParams& init, const SaemConfig& config) {
  Saem saem(data, init, config);
  saem.run();
  return saem.result();
}

FitResult fit(const Dataset& data, const ZibrParams& init, const SaemConfig& config,
              const SimulationStep& step) {
  Saem saem(data, init, config, step);
  saem.run();
  return saem.result();
}

ZibrParams default_init(const Dataset& data) {
  std::size_t total = 0;
  std::size_t positive = 0;
  double sum_logit = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& ind : data.individuals) {
    for (const auto& o : ind.obs) {
      ++total;
      if (o.y > 0.0) {
        ++positive;
        sum_logit += std::log(o.y) - std::log1p(-o.y);
        sum += o.y;
        sum_sq += o.y * o.y;
      }
    }
  }
  ZibrParams init;
  init.alpha = Eigen::VectorXd::Zero(data.p);
  init.beta = Eigen::VectorXd::Zero(data.r);
  init.sigma1_sq = 0.25;
  init.sigma2_sq = 0.25;
  const double rate = total ? std::clamp(static_cast<double>(positive) / static_cast<double>(total), 0.01, 0.99) : 0.5;
  init.a = std::log(rate / (1.0 - rate));
  init.b = positive ? sum_logit / static_cast<double>(positive) : 0.0;
  init.phi = 5.0;
  if (positive >= 2) {
    const double np = static_cast<double>(positive);
    const double mean = sum / np;
    const double var = (sum_sq - np * mean * mean) / (np - 1.0);
    if (var > 0.0) {
      const double mom = mean * (1.0 - mean) / var - 1.0;
      if (mom > 0.1) init.phi = mom;
    }
  }
  return init;
}

}  // namespace zibr
