#include "zibr/simulate.hpp"

#include "zibr/errors.hpp"
#include "zibr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace zibr {

void SimConfig::validate() const {
  params.validate();
  if (n_individuals < 2 || n_individuals % 2 != 0) {
    throw DomainError("n_individuals must be even and >= 2 for the treatment/control split");
  }
  if (t_per_individual < 1) throw DomainError("t_per_individual must be >= 1");
  if (params.p() > 1 || params.r() > 1) {
    throw DimensionError("the treatment/control design supports at most one covariate per part");
  }
}

Dataset generate(const SimConfig& config) {
  config.validate();
  const ZibrParams& th = config.params;
  Dataset data;
  data.p = th.p();
  data.r = th.r();
  if (data.p == 1) data.x_names = {"x"};
  if (data.r == 1) data.z_names = {"x"};
  data.individuals.resize(static_cast<std::size_t>(config.n_individuals));
  const double sd1 = std::sqrt(th.sigma1_sq);
  const double sd2 = std::sqrt(th.sigma2_sq);
  const int half = config.n_individuals / 2;
  for (int i = 0; i < config.n_individuals; ++i) {
    Engine eng = make_engine(config.seed, static_cast<std::uint64_t>(i), 0x5e);
    Individual& ind = data.individuals[static_cast<std::size_t>(i)];
    ind.id = std::to_string(i + 1);
    const double treat = i < half ? 0.0 : 1.0;
    const double a_i = th.a + sd1 * standard_normal(eng);
    const double b_i = th.b + sd2 * standard_normal(eng);
    Eigen::VectorXd x = Eigen::VectorXd::Constant(data.p, treat);
    Eigen::VectorXd z = Eigen::VectorXd::Constant(data.r, treat);
    const double eta_p = a_i + x.dot(th.alpha);
    const double eta_u = b_i + z.dot(th.beta);
    const double prob = sigmoid(eta_p);
    const double s1 = sigmoid(eta_u) * th.phi;
    const double s2 = sigmoid(-eta_u) * th.phi;
    std::gamma_distribution<double> g1(s1, 1.0);
    std::gamma_distribution<double> g2(s2, 1.0);
    ind.obs.reserve(static_cast<std::size_t>(config.t_per_individual));
    for (int t = 1; t <= config.t_per_individual; ++t) {
      Observation o;
      o.time = t;
      o.x = x;
      o.z = z;
      if (uniform01(eng) < prob) {
        const double u1 = g1(eng);
        const double u2 = g2(eng);
        double y = u1 / (u1 + u2);
        if (!(y > 0.0)) y = 1e-300;
        if (!(y < 1.0)) y = std::nextafter(1.0, 0.0);
        o.y = y;
      }
      ind.obs.push_back(std::move(o));
    }
  }
  return data;
}

Dataset mcar_dropout(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw DomainError("dropout fraction must lie in [0, 1)");
  const std::size_t total = data.total_observations();
  const auto n_remove = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total)));
  if (n_remove == 0) return data;

  // Flat index -> (individual, position).
  std::vector<std::pair<std::size_t, std::size_t>> where;
  where.reserve(total);
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t k = 0; k < data.individuals[i].obs.size(); ++k) where.emplace_back(i, k);
  }
  Engine eng = make_engine(seed, 0xd0, 0);
  std::vector<std::size_t> order(total);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), eng);
    std::vector<std::vector<unsigned char>> drop(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) drop[i].assign(data.individuals[i].obs.size(), 0);
    std::vector<std::size_t> remaining(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) remaining[i] = data.individuals[i].obs.size();
    bool ok = true;
    for (std::size_t j = 0; j < n_remove; ++j) {
      const auto [i, k] = where[order[j]];
      drop[i][k] = 1;
      if (--remaining[i] == 0) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    Dataset out;
    out.p = data.p;
    out.r = data.r;
    out.x_names = data.x_names;
    out.z_names = data.z_names;
    out.individuals.reserve(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) {
      Individual ind;
      ind.id = data.individuals[i].id;
      for (std::size_t k = 0; k < data.individuals[i].obs.size(); ++k) {
        if (!drop[i][k]) ind.obs.push_back(data.individuals[i].obs[k]);
      }
      out.individuals.push_back(std::move(ind));
    }
    return out;
  }
  throw DomainError("MCAR dropout could not keep every individual observed after 1000 draws");
}

Dataset interpolate(const Dataset& data, int original_t) {
  if (original_t < 1) throw DomainError("original_t must be >= 1");
  Dataset out;
  out.p = data.p;
  out.r = data.r;
  out.x_names = data.x_names;
  out.z_names = data.z_names;
  out.individuals.reserve(data.n());
  for (const auto& ind : data.individuals) {
    if (ind.obs.empty()) throw DomainError("individual '" + ind.id + "' has no observations to interpolate from");
    std::vector<const Observation*> at(static_cast<std::size_t>(original_t) + 1, nullptr);
    for (const auto& o : ind.obs) {
      const double t = o.time;
      if (t != std::floor(t) || t < 1 || t > original_t) {
        throw DomainError("individual '" + ind.id + "' has time " + std::to_string(t) +
                          " outside the balanced design 1.." + std::to_string(original_t));
      }
      at[static_cast<std::size_t>(t)] = &o;
    }
    Individual filled;
    filled.id = ind.id;
    filled.obs.reserve(static_cast<std::size_t>(original_t));
    for (int t = 1; t <= original_t; ++t) {
      if (at[static_cast<std::size_t>(t)]) {
        filled.obs.push_back(*at[static_cast<std::size_t>(t)]);
        continue;
      }
      const Observation* before = nullptr;
      const Observation* after = nullptr;
      int tb = 0, ta = 0;
      for (int s = t - 1; s >= 1 && !before; --s) {
        if (at[static_cast<std::size_t>(s)]) { before = at[static_cast<std::size_t>(s)]; tb = s; }
      }
      for (int s = t + 1; s <= original_t && !after; ++s) {
        if (at[static_cast<std::size_t>(s)]) { after = at[static_cast<std::size_t>(s)]; ta = s; }
      }
      Observation o;
      if (before && after) {
        const double w = static_cast<double>(t - tb) / static_cast<double>(ta - tb);
        o = *before;
        o.y = before->y + w * (after->y - before->y);
      } else if (before) {
        o = *before;
      } else {
        o = *after;
      }
      o.time = t;
      filled.obs.push_back(std::move(o));
    }
    out.individuals.push_back(std::move(filled));
  }
  return out;
}

std::vector<int> observation_counts(const Dataset& data) {
  std::vector<int> counts;
  counts.reserve(data.n());
  for (const auto& ind : data.individuals) counts.push_back(static_cast<int>(ind.obs.size()));
  return counts;
}

}  // namespace zibr
