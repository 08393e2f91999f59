#include "zibr/packed_data.hpp"

#include "zibr/errors.hpp"

#include <cmath>

namespace zibr {

PackedData PackedData::from(const Dataset& data) {
  data.validate();
  PackedData out;
  out.p = data.p;
  out.r = data.r;
  const auto total = static_cast<Eigen::Index>(data.total_observations());
  out.y.resize(total);
  out.log_y.resize(total);
  out.log1m_y.resize(total);
  out.positive.resize(static_cast<std::size_t>(total));
  out.x.resize(total, data.p);
  out.z.resize(total, data.r);
  out.start.reserve(data.n() + 1);
  Eigen::Index row = 0;
  for (const auto& ind : data.individuals) {
    out.start.push_back(static_cast<std::size_t>(row));
    for (const auto& o : ind.obs) {
      out.y(row) = o.y;
      const bool pos = o.y > 0.0;
      out.positive[static_cast<std::size_t>(row)] = pos ? 1 : 0;
      out.log_y(row) = pos ? std::log(o.y) : 0.0;
      out.log1m_y(row) = std::log1p(-o.y);
      if (data.p > 0) out.x.row(row) = o.x.transpose();
      if (data.r > 0) out.z.row(row) = o.z.transpose();
      out.n_positive += pos ? 1 : 0;
      ++row;
    }
  }
  out.start.push_back(static_cast<std::size_t>(row));
  return out;
}

FixedPredictors FixedPredictors::compute(const ZibrParams& params, const PackedData& data) {
  if (params.p() != data.p || params.r() != data.r) {
    throw DimensionError("parameter dimensions do not match packed data");
  }
  FixedPredictors f;
  const auto total = static_cast<Eigen::Index>(data.total());
  f.x_alpha = data.p > 0 ? Eigen::VectorXd(data.x * params.alpha) : Eigen::VectorXd::Zero(total);
  f.z_beta = data.r > 0 ? Eigen::VectorXd(data.z * params.beta) : Eigen::VectorXd::Zero(total);
  f.phi = params.phi;
  f.lgamma_phi = log_gamma(params.phi);
  return f;
}

namespace kernel {

double beta_log_density_eta(double log_y, double log1m_y, double eta, double phi, double lgamma_phi) {
  const auto [u, v] = sigmoid_pair(eta);
  const double s1 = u * phi;
  const double s2 = v * phi;
  return lgamma_phi - log_gamma(s1) - log_gamma(s2) + (s1 - 1.0) * log_y + (s2 - 1.0) * log1m_y;
}

double logistic_part(const PackedData& data, const FixedPredictors& fixed, std::size_t i, double a_i) {
  double total = 0.0;
  for (std::size_t k = data.begin(i); k < data.end(i); ++k) {
    const double eta = a_i + fixed.x_alpha[static_cast<Eigen::Index>(k)];
    total += data.positive[k] ? log_sigmoid(eta) : log_sigmoid(-eta);
  }
  return total;
}

double beta_part(const PackedData& data, const FixedPredictors& fixed, std::size_t i, double b_i) {
  double total = 0.0;
  for (std::size_t k = data.begin(i); k < data.end(i); ++k) {
    if (!data.positive[k]) continue;
    const auto row = static_cast<Eigen::Index>(k);
    total += beta_log_density_eta(data.log_y[row], data.log1m_y[row], b_i + fixed.z_beta[row],
                                  fixed.phi, fixed.lgamma_phi);
  }
  return total;
}

}  // namespace kernel
}  // namespace zibr
