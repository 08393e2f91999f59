#include "zibr/fim.hpp"

#include "parallel_reduce.hpp"
#include "zibr/errors.hpp"
#include "zibr/optimizer.hpp"
#include "zibr/reference.hpp"
#include "zibr/special.hpp"

#include <cmath>
#include <limits>

namespace zibr {

std::vector<std::string> parameter_manifest(int p, int r) {
  std::vector<std::string> names{"a", "b"};
  for (int j = 0; j < p; ++j) names.push_back("alpha[" + std::to_string(j) + "]");
  for (int j = 0; j < r; ++j) names.push_back("beta[" + std::to_string(j) + "]");
  names.insert(names.end(), {"sigma1_sq", "sigma2_sq", "phi"});
  return names;
}

Eigen::VectorXd flatten(const ZibrParams& params) {
  const int p = params.p();
  const int r = params.r();
  Eigen::VectorXd v(5 + p + r);
  v << params.a, params.b, params.alpha, params.beta, params.sigma1_sq, params.sigma2_sq, params.phi;
  return v;
}

namespace {

template <typename Reduce>
ScoreHessian score_and_hessian_impl(Reduce&& reduce, const ZibrParams& params, const PackedData& data,
                                    const RandomEffects& effects) {
  if (params.p() != data.p || params.r() != data.r) throw DimensionError("parameter dimensions do not match data");
  if (static_cast<std::size_t>(effects.rows()) != data.n()) throw DimensionError("effects rows do not match N");
  const int p = data.p;
  const int r = data.r;
  const Eigen::Index d = 5 + p + r;
  const int ia = 0, ib = 1, ialpha = 2, ibeta = 2 + p;
  const auto iv1 = static_cast<int>(2 + p + r), iv2 = iv1 + 1, iphi = iv1 + 2;
  const FixedPredictors fixed = FixedPredictors::compute(params, data);
  const double phi = params.phi;
  const double dg_phi = digamma(phi);
  const double tg_phi = trigamma(phi);
  const double v1 = params.sigma1_sq;
  const double v2 = params.sigma2_sq;

  const Eigen::VectorXd total = reduce(data.n(), d + d * d, [&](std::size_t i, double* out) {
    double* g = out;
    double* h = out + d;
    auto H = [&](int row, int col) -> double& { return h[row * d + col]; };
    const auto ri = static_cast<Eigen::Index>(i);
    const double a_i = effects(ri, 0);
    const double b_i = effects(ri, 1);

    const double da = a_i - params.a;
    const double db = b_i - params.b;
    g[ia] += da / v1;
    g[ib] += db / v2;
    g[iv1] += -0.5 / v1 + 0.5 * da * da / (v1 * v1);
    g[iv2] += -0.5 / v2 + 0.5 * db * db / (v2 * v2);
    H(ia, ia) += -1.0 / v1;
    H(ib, ib) += -1.0 / v2;
    H(ia, iv1) += -da / (v1 * v1);
    H(iv1, ia) += -da / (v1 * v1);
    H(ib, iv2) += -db / (v2 * v2);
    H(iv2, ib) += -db / (v2 * v2);
    H(iv1, iv1) += 0.5 / (v1 * v1) - da * da / (v1 * v1 * v1);
    H(iv2, iv2) += 0.5 / (v2 * v2) - db * db / (v2 * v2 * v2);

    for (std::size_t k = data.begin(i); k < data.end(i); ++k) {
      const auto row = static_cast<Eigen::Index>(k);
      const double eta_p = a_i + fixed.x_alpha[row];
      const double prob = sigmoid(eta_p);
      const double resid = (data.positive[k] ? 1.0 : 0.0) - prob;
      const double w = prob * sigmoid(-eta_p);
      for (int j = 0; j < p; ++j) {
        const double xj = data.x(row, j);
        g[ialpha + j] += resid * xj;
        for (int q = 0; q < p; ++q) H(ialpha + j, ialpha + q) -= w * xj * data.x(row, q);
      }
      if (!data.positive[k]) continue;
      const BetaTermDerivatives t = beta_term_derivatives(
          data.log_y[row], data.log1m_y[row], b_i + fixed.z_beta[row], phi, fixed.lgamma_phi, dg_phi, tg_phi);
      for (int j = 0; j < r; ++j) {
        const double zj = data.z(row, j);
        g[ibeta + j] += t.d_eta * zj;
        for (int q = 0; q < r; ++q) H(ibeta + j, ibeta + q) += t.d_eta_eta * zj * data.z(row, q);
        H(ibeta + j, iphi) += t.d_eta_phi * zj;
        H(iphi, ibeta + j) += t.d_eta_phi * zj;
      }
      g[iphi] += t.d_phi;
      H(iphi, iphi) += t.d_phi_phi;
    }
  });

  ScoreHessian out;
  out.score = total.head(d);
  out.hessian = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      total.data() + d, d, d);
  return out;
}

}  // namespace

ScoreHessian score_and_hessian(const ZibrParams& params, const PackedData& data,
                               const RandomEffects& effects) {
  return score_and_hessian_impl(detail::ParallelReduce{}, params, data, effects);
}

ScoreHessian reference::score_and_hessian(const ZibrParams& params, const PackedData& data,
                                          const RandomEffects& effects) {
  return score_and_hessian_impl(detail::SerialReduce{}, params, data, effects);
}

FimAccumulator FimAccumulator::zeros(int p, int r) {
  FimAccumulator acc;
  const Eigen::Index d = 5 + p + r;
  acc.d = Eigen::VectorXd::Zero(d);
  acc.g = Eigen::MatrixXd::Zero(d, d);
  acc.h = Eigen::MatrixXd::Zero(d, d);
  acc.manifest = parameter_manifest(p, r);
  return acc;
}

namespace {

FimAccumulator apply(const FimAccumulator& acc, const Eigen::VectorXd& score_mean,
                     const Eigen::MatrixXd& second_mean, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("fim_update: gamma must lie in (0, 1]");
  if (score_mean.size() != acc.d.size()) throw DimensionError("fim_update: score length mismatch");
  FimAccumulator out = acc;
  out.d = acc.d + gamma * (score_mean - acc.d);
  out.g = acc.g + gamma * (second_mean - acc.g);
  out.g = (0.5 * (out.g + out.g.transpose())).eval();
  out.h = out.g - out.d * out.d.transpose();
  ++out.updates;
  return out;
}

}  // namespace

FimAccumulator fim_update(const FimAccumulator& acc, const Eigen::VectorXd& score,
                          const Eigen::MatrixXd& hessian, double gamma) {
  return apply(acc, score, hessian + score * score.transpose(), gamma);
}

FimAccumulator fim_update(const FimAccumulator& acc, std::span<const ScoreHessian> per_chain,
                          double gamma) {
  if (per_chain.empty()) throw DimensionError("fim_update: no chains");
  const Eigen::Index d = acc.d.size();
  Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(d, d);
  for (const auto& c : per_chain) {
    s += c.score;
    second += c.hessian + c.score * c.score.transpose();
  }
  const double inv_m = 1.0 / static_cast<double>(per_chain.size());
  return apply(acc, s * inv_m, second * inv_m, gamma);
}

StandardErrors standard_errors(const Eigen::MatrixXd& h) {
  StandardErrors out;
  if (h.size() == 0) return out;
  const Eigen::MatrixXd info = -0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
  if (eig.info() != Eigen::Success) {
    out.min_eigenvalue = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.min_eigenvalue = eig.eigenvalues().minCoeff();
  if (!(out.min_eigenvalue > 0.0)) return out;
  const Eigen::MatrixXd cov =
      eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  out.se = cov.diagonal().cwiseSqrt();
  out.covariance = cov;
  return out;
}

StandardErrors standard_errors(const FimAccumulator& acc) { return standard_errors(acc.h); }

}  // namespace zibr
