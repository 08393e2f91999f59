#pragma once

#include "zibr/fim.hpp"
#include "zibr/model.hpp"
#include "zibr/optimizer.hpp"
#include "zibr/packed_data.hpp"
#include "zibr/sampler.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace zibr {

/// gamma_q = 1 for q <= k1, 1 / (q - k1) afterwards; q is 1-based.
struct StepSchedule {
  int k1 = 750;
  int k2 = 250;

  int total() const { return k1 + k2; }
  double gamma(int q) const;
  void validate() const;
};

struct SaemConfig {
  StepSchedule schedule;
  int chains = 5;
  McmcConfig mcmc;
  OptimOptions inner;
  bool compute_fim = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// F1 ~ sum_i phi_i and F2 ~ sum_i phi_i phi_i'.
struct SummaryStats {
  Eigen::Vector2d f1 = Eigen::Vector2d::Zero();
  Eigen::Matrix2d f2 = Eigen::Matrix2d::Zero();
};

/// Sums over individuals of one chain's draws.
struct ChainSums {
  Eigen::Vector2d s1 = Eigen::Vector2d::Zero();
  Eigen::Matrix2d s2 = Eigen::Matrix2d::Zero();
};

ChainSums chain_sums(const RandomEffects& effects);

/// F <- F + gamma (mean over chains of S - F), for both statistics.
SummaryStats sa_update(const SummaryStats& prev, std::span<const ChainSums> chains, double gamma);

struct GaussianUpdate {
  Eigen::Vector2d mu;
  Eigen::Vector2d var;  // diagonal of G; off-diagonal discarded
  bool floored = false;
};

inline constexpr double kVarianceFloor = 1e-10;
inline constexpr double kPhiFloor = 1e-8;

/// mu = F1 / N, G = F2 / N - F1 F1' / N^2 restricted to its diagonal, floored at kVarianceFloor.
GaussianUpdate mstep_gaussian(const SummaryStats& stats, std::size_t n);

struct DampedUpdate {
  double phi = 1.0;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  bool phi_floored = false;
};

/// Each of (phi, alpha, beta) <- old + gamma (inner - old).
DampedUpdate damped_update(double phi_old, const Eigen::VectorXd& alpha_old,
                           const Eigen::VectorXd& beta_old, double phi_inner,
                           const Eigen::VectorXd& alpha_inner, const Eigen::VectorXd& beta_inner,
                           double gamma);

/// Running per-individual mean and variance of sampled (a_i, b_i).
struct MomentAccumulator {
  Eigen::Matrix<double, Eigen::Dynamic, 2> mean;
  Eigen::Matrix<double, Eigen::Dynamic, 2> m2;
  std::uint64_t count = 0;

  void reset(std::size_t n);
  void add(const RandomEffects& draws);
};

struct ConditionalMoments {
  Eigen::Matrix<double, Eigen::Dynamic, 2> mean;
  Eigen::Matrix<double, Eigen::Dynamic, 2> var;
};

struct Diagnostics {
  std::array<double, 3> acceptance{};  // cumulative rates per kernel
  int variance_floor_hits = 0;
  int phi_floor_hits = 0;
  int beta_not_converged = 0;
  int logistic_not_converged = 0;
  int separation_flags = 0;
  double fim_min_eigenvalue = 0.0;
  McmcConfig final_mcmc;
};

struct SaemState {
  SummaryStats stats;
  ZibrParams params;
  int q = 0;
  std::vector<ChainState> chains;
  std::vector<ZibrParams> trace;
  MomentAccumulator moments;
  FimAccumulator fim;
  McmcConfig mcmc;
  Diagnostics diagnostics;
  std::vector<ChainSums> last_chain_sums;
};

struct FitResult {
  ZibrParams params;
  std::optional<Eigen::VectorXd> std_errors;  // manifest order
  std::optional<Eigen::MatrixXd> covariance;
  std::optional<double> loglik;
  std::optional<double> loglik_se;
  std::vector<ZibrParams> trace;
  Diagnostics diagnostics;
  std::optional<ConditionalMoments> moments;
  FimAccumulator fim;
  std::vector<std::string> manifest;
  std::uint64_t seed = 0;
  SaemConfig config;
};

/// Replaceable simulation step; the default is zibr::sstep.
using SimulationStep = std::function<KernelCounters(ChainState&, const ZibrParams&, const PackedData&,
                                                    const McmcConfig&)>;

/// SAEM driver, one iteration per call to iterate().
class Saem {
 public:
  Saem(const Dataset& data, const ZibrParams& init, const SaemConfig& config,
       SimulationStep step = {});

  void iterate();
  void run();
  bool done() const { return state_.q >= config_.schedule.total(); }

  const SaemState& state() const { return state_; }
  const PackedData& data() const { return data_; }
  FitResult result() const;

 private:
  PackedData data_;
  SaemConfig config_;
  SimulationStep step_;
  SaemState state_;
};

FitResult fit(const Dataset& data, const ZibrParams& init, const SaemConfig& config);
FitResult fit(const Dataset& data, const ZibrParams& init, const SaemConfig& config,
              const SimulationStep& step);

/// Throws std::logic_error when no draws were accumulated (k2 = 0 or not yet in the k2 phase).
ConditionalMoments conditional_moments(const SaemState& state);
ConditionalMoments conditional_moments(const MomentAccumulator& acc);

/// Data-driven starting point: empirical logits for a and b, zero fixed effects,
/// sigma = 0.5, method-of-moments phi.
ZibrParams default_init(const Dataset& data);

}  // namespace zibr
