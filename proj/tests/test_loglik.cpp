#include "quadrature.hpp"
#include "support.hpp"

#include "zibr/errors.hpp"
#include "zibr/loglik.hpp"
#include "zibr/reference.hpp"

#include <doctest.h>
#include <omp.h>

#include <cmath>

using namespace zibr;
using zibr::test::make_params;

namespace {

ConditionalMoments moments_from(const test::QuadratureResult& q) {
  ConditionalMoments m;
  m.mean = q.mean;
  m.var = q.var;
  return m;
}

Dataset tiny_dataset(std::uint64_t seed) { return test::random_dataset(seed, 3, 2, 2, 1, 1, 0.3); }

}  // namespace

TEST_CASE("gauss-hermite rule integrates polynomials and agrees with a dense grid") {
  const test::GaussHermite gh = test::gauss_hermite(20);
  double m0 = 0.0, m2 = 0.0, m4 = 0.0;
  for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
    const double x = gh.nodes[k];
    m0 += gh.weights[k];
    m2 += gh.weights[k] * x * x;
    m4 += gh.weights[k] * x * x * x * x;
  }
  CHECK(m0 == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-13));
  CHECK(m2 == doctest::Approx(std::sqrt(std::numbers::pi) / 2).epsilon(1e-13));
  CHECK(m4 == doctest::Approx(3 * std::sqrt(std::numbers::pi) / 4).epsilon(1e-12));

  const Dataset data = tiny_dataset(1);
  const ZibrParams th = make_params(6.4, -0.5, 0.5, {0.5}, {0.5}, 0.49, 0.25);
  const double quad = test::quadrature_loglik(th, data).loglik;
  double grid = 0.0;
  const double h = 0.01;
  for (const auto& ind : data.individuals) {
    double s = 0.0;
    for (double a = -8; a <= 7; a += h) {
      for (double b = -6; b <= 7; b += h) {
        s += std::exp(observation_loglik_given_effects(th, ind, a, b) + random_effect_log_prior(th, a, b));
      }
    }
    grid += std::log(s * h * h);
  }
  CHECK(quad == doctest::Approx(grid).epsilon(1e-6));
}

TEST_CASE("dataset without observations has log-likelihood zero") {
  Dataset data;
  data.p = 1;
  data.r = 1;
  for (int i = 0; i < 4; ++i) data.individuals.push_back({"e" + std::to_string(i), {}});
  ConditionalMoments m;
  m.mean = Eigen::MatrixX2d::Zero(4, 2);
  m.var = Eigen::MatrixX2d::Ones(4, 2);
  const ZibrParams th = make_params(3, 0, 0, {0.1}, {0.2}, 1, 1);
  for (int k : {1, 10, 500}) {
    IsConfig cfg;
    cfg.k_samples = k;
    const LoglikEstimate e = loglik_is(th, data, m, cfg);
    CHECK(e.loglik == 0.0);
    CHECK(e.mc_se == 0.0);
  }
}

TEST_CASE("importance sampling matches quadrature on a tiny instance") {
  const Dataset data = tiny_dataset(2);
  const ZibrParams th = make_params(6.4, -0.5, 0.5, {0.5}, {0.5}, 0.49, 0.25);
  const test::QuadratureResult q = test::quadrature_loglik(th, data);
  IsConfig cfg;
  cfg.k_samples = 50000;
  cfg.seed = 3;
  const LoglikEstimate e = loglik_is(th, data, moments_from(q), cfg);
  CHECK(std::abs(e.loglik - q.loglik) < 0.002 * std::abs(q.loglik));
  CHECK(std::abs(e.loglik - q.loglik) < 5.0 * e.mc_se + 1e-9);
}

TEST_CASE("importance sampling is deterministic and seed dependent") {
  const Dataset data = test::random_dataset(4, 10, 2, 6, 1, 1);
  const ZibrParams th = test::random_params(5, 1, 1);
  const ConditionalMoments m = moments_from(test::quadrature_loglik(th, data, 24));
  IsConfig cfg;
  cfg.seed = 8;
  const LoglikEstimate a = loglik_is(th, data, m, cfg);
  const LoglikEstimate b = loglik_is(th, data, m, cfg);
  CHECK(a.loglik == b.loglik);
  CHECK(a.mc_se == b.mc_se);
  cfg.seed = 9;
  CHECK(loglik_is(th, data, m, cfg).loglik != a.loglik);
}

TEST_CASE("likelihood estimate is unbiased on the natural scale") {
  Dataset data = tiny_dataset(6);
  data.individuals.resize(1);
  const ZibrParams th = make_params(6.4, -0.5, 0.5, {0.5}, {0.5}, 0.49, 0.25);
  const test::QuadratureResult q = test::quadrature_loglik(th, data);
  // A deliberately poor proposal so that the estimator has visible spread.
  ConditionalMoments m = moments_from(q);
  m.mean.array() += 0.4;
  m.var.array() *= 2.5;
  const int reps = 200;
  std::vector<double> ratios;
  for (int s = 0; s < reps; ++s) {
    IsConfig cfg;
    cfg.k_samples = 20;
    cfg.seed = 1000 + static_cast<std::uint64_t>(s);
    ratios.push_back(std::exp(loglik_is(th, data, m, cfg).loglik - q.loglik));
  }
  double mean = 0.0;
  for (double r : ratios) mean += r;
  mean /= reps;
  double var = 0.0;
  for (double r : ratios) var += (r - mean) * (r - mean);
  var /= reps - 1;
  CHECK(std::abs(mean - 1.0) < 3.0 * std::sqrt(var / reps));
}

TEST_CASE("monte carlo standard error shrinks like one over root K") {
  const Dataset data = test::random_dataset(7, 20, 3, 6, 1, 1);
  const ZibrParams th = test::random_params(8, 1, 1);
  ConditionalMoments m = moments_from(test::quadrature_loglik(th, data, 24));
  m.var.array() *= 1.5;
  std::vector<double> lk, ls;
  for (int k : {100, 400, 1600, 6400}) {
    IsConfig cfg;
    cfg.k_samples = k;
    cfg.seed = 2;
    lk.push_back(std::log(k));
    ls.push_back(std::log(loglik_is(th, data, m, cfg).mc_se));
  }
  const double mx = (lk[0] + lk[1] + lk[2] + lk[3]) / 4, my = (ls[0] + ls[1] + ls[2] + ls[3]) / 4;
  double sxy = 0.0, sxx = 0.0;
  for (int j = 0; j < 4; ++j) {
    sxy += (lk[j] - mx) * (ls[j] - my);
    sxx += (lk[j] - mx) * (lk[j] - mx);
  }
  const double slope = sxy / sxx;
  CHECK(slope > -0.6);
  CHECK(slope < -0.4);
}

TEST_CASE("large degrees of freedom behave like a normal proposal") {
  const Dataset data = tiny_dataset(9);
  const ZibrParams th = make_params(6.4, -0.5, 0.5, {0.5}, {0.5}, 0.49, 0.25);
  const test::QuadratureResult q = test::quadrature_loglik(th, data);
  IsConfig cfg;
  cfg.k_samples = 20000;
  cfg.nu = 1e6;
  cfg.seed = 4;
  const LoglikEstimate e = loglik_is(th, data, moments_from(q), cfg);
  CHECK(std::isfinite(e.loglik));
  CHECK(std::abs(e.loglik - q.loglik) < 0.005 * std::abs(q.loglik));
}

TEST_CASE("underflow of every weight names the individual") {
  Dataset data = tiny_dataset(10);
  const ZibrParams th = make_params(6.4, -0.5, 0.5, {0.5}, {0.5}, 0.49, 0.25);
  ConditionalMoments m = moments_from(test::quadrature_loglik(th, data));
  // u = 1 to machine precision for individual 1 makes every Beta term impossible.
  data.individuals[1].obs[0].y = 0.4;
  m.mean(1, 1) = 1e5;
  m.var(1, 1) = 1e-8;
  IsConfig cfg;
  cfg.k_samples = 50;
  try {
    (void)loglik_is(th, data, m, cfg);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find(data.individuals[1].id) != std::string::npos);
  }
}

TEST_CASE("configuration and moment validation") {
  const Dataset data = tiny_dataset(11);
  const ZibrParams th = make_params(6.4, -0.5, 0.5, {0.5}, {0.5}, 0.49, 0.25);
  ConditionalMoments m = moments_from(test::quadrature_loglik(th, data, 16));
  IsConfig cfg;
  cfg.k_samples = 0;
  CHECK_THROWS(loglik_is(th, data, m, cfg));
  cfg.k_samples = 10;
  cfg.nu = 0.0;
  CHECK_THROWS(loglik_is(th, data, m, cfg));
  cfg.nu = 5.0;
  ConditionalMoments short_m = m;
  short_m.mean.conservativeResize(2, 2);
  short_m.var.conservativeResize(2, 2);
  CHECK_THROWS_AS(loglik_is(th, data, short_m, cfg), DimensionError);
  m.var(0, 1) = -1.0;
  CHECK_THROWS_AS(loglik_is(th, data, m, cfg), DomainError);
}

TEST_CASE("parallel estimator agrees with the serial reference") {
  const Dataset raw = test::random_dataset(12, 60, 2, 8, 2, 1);
  const PackedData data = PackedData::from(raw);
  const ZibrParams th = test::random_params(13, 2, 1);
  const ConditionalMoments m = moments_from(test::quadrature_loglik(th, raw, 16));
  IsConfig cfg;
  cfg.seed = 14;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
  const LoglikEstimate par = loglik_is(th, data, m, cfg);
  omp_set_num_threads(saved);
  const LoglikEstimate ser = reference::loglik_is(th, data, m, cfg);
  CHECK(par.loglik == ser.loglik);
  CHECK(par.mc_se == ser.mc_se);
}
