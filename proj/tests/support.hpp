#pragma once

#include "zibr/model.hpp"
#include "zibr/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace zibr::test {

inline ZibrParams make_params(double phi, double a, double b, std::vector<double> alpha,
                              std::vector<double> beta, double s1_sq, double s2_sq) {
  ZibrParams th;
  th.phi = phi;
  th.a = a;
  th.b = b;
  th.alpha = Eigen::Map<Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
  th.beta = Eigen::Map<Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  th.sigma1_sq = s1_sq;
  th.sigma2_sq = s2_sq;
  return th;
}

inline ZibrParams random_params(std::uint64_t seed, int p, int r) {
  Engine eng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  ZibrParams th;
  th.phi = 2.0 + 8.0 * (0.5 + 0.5 * unit(eng));
  th.a = 0.5 * unit(eng);
  th.b = 0.5 * unit(eng);
  th.alpha = Eigen::VectorXd(p);
  th.beta = Eigen::VectorXd(r);
  for (int j = 0; j < p; ++j) th.alpha[j] = 0.7 * unit(eng);
  for (int j = 0; j < r; ++j) th.beta[j] = 0.7 * unit(eng);
  th.sigma1_sq = 0.2 + 0.6 * (0.5 + 0.5 * unit(eng));
  th.sigma2_sq = 0.2 + 0.6 * (0.5 + 0.5 * unit(eng));
  return th;
}

// Random unbalanced dataset; each observation is zero with probability zero_prob.
inline Dataset random_dataset(std::uint64_t seed, int n, int t_min, int t_max, int p, int r,
                              double zero_prob = 0.3) {
  Engine eng(seed);
  std::uniform_int_distribution<int> t_dist(t_min, t_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset data;
  data.p = p;
  data.r = r;
  for (int i = 0; i < n; ++i) {
    Individual ind;
    ind.id = "s" + std::to_string(i);
    const int t_i = t_dist(eng);
    for (int t = 0; t < t_i; ++t) {
      Observation o;
      o.time = t + 1;
      o.x = Eigen::VectorXd(p);
      o.z = Eigen::VectorXd(r);
      for (int j = 0; j < p; ++j) o.x[j] = normal(eng);
      for (int j = 0; j < r; ++j) o.z[j] = normal(eng);
      o.y = unit(eng) < zero_prob ? 0.0 : 0.02 + 0.96 * unit(eng);
      ind.obs.push_back(std::move(o));
    }
    data.individuals.push_back(std::move(ind));
  }
  return data;
}

inline RandomEffects random_effects(std::uint64_t seed, std::size_t n, double scale = 0.8) {
  Engine eng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  RandomEffects e(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    e(i, 0) = normal(eng);
    e(i, 1) = normal(eng);
  }
  return e;
}

// Central differences with step h (relative to max(1, |x_j|)).
template <typename F>
Eigen::VectorXd fd_gradient(F&& f, const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double step = h * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd up = x, down = x;
    up[j] += step;
    down[j] -= step;
    g[j] = (f(up) - f(down)) / (2.0 * step);
  }
  return g;
}

// Jacobian of a vector function by central differences; column j is d/dx_j.
template <typename F>
Eigen::MatrixXd fd_jacobian(F&& f, const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double step = h * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd up = x, down = x;
    up[j] += step;
    down[j] -= step;
    jac.col(j) = (f(up) - f(down)) / (2.0 * step);
  }
  return jac;
}

// max |a - b| / max(max |b|, 1).
inline double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

// Two-sided Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> sample, Cdf&& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t k = 0; k < sample.size(); ++k) {
    const double f = cdf(sample[k]);
    d = std::max({d, (k + 1) / n - f, f - k / n});
  }
  return d;
}

// Asymptotic KS critical value at level 0.001: sqrt(-log(0.0005) / 2) / sqrt(n).
inline double ks_critical_0001(std::size_t n) {
  return std::sqrt(-std::log(0.0005) / 2.0) / std::sqrt(static_cast<double>(n));
}

inline double normal_cdf(double x, double mean, double var) {
  return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * var));
}

}  // namespace zibr::test
