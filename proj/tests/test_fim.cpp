#include "support.hpp"

#include "zibr/errors.hpp"
#include "zibr/fim.hpp"
#include "zibr/reference.hpp"

#include <doctest.h>
#include <omp.h>

#include <algorithm>

using namespace zibr;

namespace {

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

}  // namespace

TEST_CASE("parameter manifest and flatten") {
  CHECK(parameter_manifest(2, 1) ==
        std::vector<std::string>{"a", "b", "alpha[0]", "alpha[1]", "beta[0]", "sigma1_sq", "sigma2_sq", "phi"});
  const ZibrParams th = test::make_params(6.0, 1.0, 2.0, {3.0}, {4.0, 5.0}, 7.0, 8.0);
  const Eigen::VectorXd v = flatten(th);
  CHECK(v.size() == 8);
  CHECK(v[0] == 1.0);
  CHECK(v[2] == 3.0);
  CHECK(v[4] == 5.0);
  CHECK(v[5] == 7.0);
  CHECK(v[7] == 6.0);
  const FimAccumulator acc = FimAccumulator::zeros(2, 1);
  CHECK(acc.manifest == parameter_manifest(2, 1));
  CHECK(acc.h.rows() == 8);
}

TEST_CASE("score vanishes at the complete-data maximum of the normal block") {
  Dataset data;
  data.p = 1;
  data.r = 1;
  for (int i = 0; i < 40; ++i) data.individuals.push_back({"e" + std::to_string(i), {}});
  const RandomEffects e = test::random_effects(3, 40);
  ZibrParams th = test::make_params(4.0, 0, 0, {0.3}, {0.2}, 1, 1);
  th.a = e.col(0).mean();
  th.b = e.col(1).mean();
  th.sigma1_sq = (e.col(0).array() - th.a).square().mean();
  th.sigma2_sq = (e.col(1).array() - th.b).square().mean();
  const ScoreHessian sh = score_and_hessian(th, PackedData::from(data), e);
  CHECK(std::abs(sh.score[0]) < 1e-12);
  CHECK(std::abs(sh.score[1]) < 1e-12);
  CHECK(std::abs(sh.score[4]) < 1e-10);
  CHECK(std::abs(sh.score[5]) < 1e-10);
  CHECK(sh.score[2] == 0.0);
  CHECK(sh.score[6] == 0.0);
}

TEST_CASE("score and hessian match finite differences") {
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
    CHECK(test::rel_error(sh.score, test::fd_gradient(value, x)) < 1e-5);
    CHECK(test::rel_error(sh.hessian, test::fd_jacobian(score, x)) < 1e-4);
    CHECK((sh.hessian - sh.hessian.transpose()).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + sh.hessian.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("fim update") {
  FimAccumulator acc = FimAccumulator::zeros(0, 0);
  Eigen::VectorXd s(5);
  s << 1, -2, 0.5, 0, 3;
  Eigen::MatrixXd h = -Eigen::MatrixXd::Identity(5, 5);
  h(0, 1) = h(1, 0) = 0.3;
  const FimAccumulator one = fim_update(acc, s, h, 1.0);
  CHECK(one.d == s);
  CHECK((one.g - (h + s * s.transpose())).cwiseAbs().maxCoeff() == 0.0);
  CHECK((one.h - (one.g - one.d * one.d.transpose())).cwiseAbs().maxCoeff() == 0.0);
  CHECK(one.updates == 1);

  FimAccumulator run = acc;
  for (int q = 1; q <= 2000; ++q) run = fim_update(run, s, h, q == 1 ? 1.0 : 0.5);
  CHECK((run.h - h).cwiseAbs().maxCoeff() < 1e-10);

  Engine eng(5);
  std::normal_distribution<double> z;
  FimAccumulator rnd = acc;
  for (int q = 1; q <= 50; ++q) {
    Eigen::VectorXd sq(5);
    Eigen::MatrixXd hq(5, 5);
    for (int j = 0; j < 5; ++j) sq[j] = z(eng);
    for (int j = 0; j < 25; ++j) hq.data()[j] = z(eng);
    rnd = fim_update(rnd, sq, hq, 1.0 / q);
    CHECK(rnd.h == rnd.h.transpose());
    CHECK(rnd.g == rnd.g.transpose());
    CHECK((rnd.h - (rnd.g - rnd.d * rnd.d.transpose())).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(fim_update(acc, s, h, 0.0), DomainError);
  CHECK_THROWS_AS(fim_update(acc, Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Zero(3, 3), 1.0), DimensionError);
}

TEST_CASE("multi-chain update is invariant to chain order") {
  const Dataset raw = test::random_dataset(7, 10, 2, 5, 1, 1);
  const PackedData data = PackedData::from(raw);
  const ZibrParams th = test::random_params(8, 1, 1);
  std::vector<ScoreHessian> chains;
  for (int l = 0; l < 4; ++l) chains.push_back(score_and_hessian(th, data, test::random_effects(20 + l, raw.n())));
  std::vector<ScoreHessian> rev(chains.rbegin(), chains.rend());
  FimAccumulator a = FimAccumulator::zeros(1, 1), b = a;
  a = fim_update(fim_update(a, chains, 1.0), chains, 0.5);
  b = fim_update(fim_update(b, rev, 1.0), rev, 0.5);
  CHECK((a.h - b.h).cwiseAbs().maxCoeff() < 1e-9 * (1.0 + a.h.cwiseAbs().maxCoeff()));
  CHECK((a.d - b.d).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + a.d.cwiseAbs().maxCoeff()));
}

TEST_CASE("standard errors") {
  const StandardErrors unit = standard_errors(Eigen::MatrixXd(-Eigen::MatrixXd::Identity(4, 4)));
  REQUIRE(unit.se);
  CHECK(unit.se->isApprox(Eigen::VectorXd::Ones(4)));
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3, 3);
  h.diagonal() << -4, -25, -100;
  const StandardErrors diag = standard_errors(h);
  REQUIRE(diag.se);
  CHECK((*diag.se)[0] == doctest::Approx(0.5));
  CHECK((*diag.se)[1] == doctest::Approx(0.2));
  CHECK((*diag.se)[2] == doctest::Approx(0.1));
  CHECK(diag.min_eigenvalue == doctest::Approx(4.0));

  Eigen::MatrixXd bad = -Eigen::MatrixXd::Identity(3, 3);
  bad(2, 2) = 0.5;
  const StandardErrors none = standard_errors(bad);
  CHECK_FALSE(none.se);
  CHECK_FALSE(none.covariance);
  CHECK(none.min_eigenvalue == doctest::Approx(-0.5));
  const StandardErrors singular = standard_errors(Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 2)));
  CHECK_FALSE(singular.se);
}

TEST_CASE("score and hessian agree with the serial reference") {
  const Dataset raw = test::random_dataset(9, 80, 2, 9, 2, 2);
  const PackedData data = PackedData::from(raw);
  const ZibrParams th = test::random_params(10, 2, 2);
  const RandomEffects e = test::random_effects(11, raw.n());
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
  const ScoreHessian par = score_and_hessian(th, data, e);
  omp_set_num_threads(saved);
  const ScoreHessian ser = reference::score_and_hessian(th, data, e);
  CHECK(par.score == ser.score);
  CHECK(par.hessian == ser.hessian);
}

TEST_CASE("dimension errors") {
  const Dataset raw = test::random_dataset(12, 5, 1, 3, 1, 1);
  const PackedData data = PackedData::from(raw);
  CHECK_THROWS_AS(score_and_hessian(test::random_params(1, 2, 1), data, test::random_effects(1, 5)), DimensionError);
  CHECK_THROWS_AS(score_and_hessian(test::random_params(1, 1, 1), data, test::random_effects(1, 4)), DimensionError);
}
