#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "motbary/measures.hpp"

namespace testing_support {

using motbary::DiscreteMeasure;
using motbary::MultiMarginalPlan;
using motbary::SimplexWeights;

/// Random measure with n atoms in [0,1]^d and weights bounded away from 0.
inline DiscreteMeasure random_measure(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> pts(n * d), w(n);
  for (double& x : pts) x = u(rng);
  for (double& x : w) x = 0.05 + u(rng);
  return DiscreteMeasure(d, std::move(pts), std::move(w));
}

inline std::vector<DiscreteMeasure> random_instance(std::mt19937_64& rng, std::size_t count,
                                                    std::size_t min_atoms, std::size_t max_atoms,
                                                    std::size_t d) {
  std::uniform_int_distribution<std::size_t> na(min_atoms, max_atoms);
  std::vector<DiscreteMeasure> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_measure(rng, na(rng), d));
  return out;
}

inline SimplexWeights random_weights(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> raw(n);
  for (double& x : raw) x = u(rng);
  return SimplexWeights::normalized(std::move(raw));
}

inline SimplexWeights descending(SimplexWeights w) {
  auto v = w.values();
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  return SimplexWeights(std::move(s));
}

/// Random feasible plan: a mixture of the independent (product) plan and a
/// plan whose tuples follow a north-west corner sweep over random atom orders.
inline MultiMarginalPlan random_feasible_plan(std::mt19937_64& rng,
                                              const std::vector<DiscreteMeasure>& ms) {
  const std::size_t n = ms.size();
  std::vector<MultiMarginalPlan::Index> tuples;
  std::vector<double> masses;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double t = u(rng);
  // Product part.
  std::vector<std::size_t> idx(n, 0);
  for (;;) {
    double m = t;
    for (std::size_t i = 0; i < n; ++i) m *= ms[i].weight(idx[i]);
    for (std::size_t i = 0; i < n; ++i) tuples.push_back(static_cast<MultiMarginalPlan::Index>(idx[i]));
    masses.push_back(m);
    std::size_t i = n;
    while (i-- > 0) {
      if (++idx[i] < ms[i].size()) break;
      idx[i] = 0;
    }
    if (i == static_cast<std::size_t>(-1)) break;
  }
  // Sweep part: walk all marginals in random atom order, always taking the
  // smallest remaining residual.
  std::vector<std::vector<std::size_t>> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order[i].resize(ms[i].size());
    for (std::size_t j = 0; j < ms[i].size(); ++j) order[i][j] = j;
    std::shuffle(order[i].begin(), order[i].end(), rng);
  }
  std::vector<std::size_t> pos(n, 0);
  std::vector<double> res(n);
  for (std::size_t i = 0; i < n; ++i) res[i] = ms[i].weight(order[i][0]);
  for (;;) {
    const double h = *std::min_element(res.begin(), res.end());
    for (std::size_t i = 0; i < n; ++i) tuples.push_back(static_cast<MultiMarginalPlan::Index>(order[i][pos[i]]));
    masses.push_back((1.0 - t) * std::max(h, 0.0));
    std::size_t adv = n;
    for (std::size_t i = 0; i < n; ++i) {
      res[i] -= h;
      if (pos[i] + 1 < ms[i].size() && (adv == n || res[i] < res[adv])) adv = i;
    }
    if (adv == n) break;
    ++pos[adv];
    res[adv] += ms[adv].weight(order[adv][pos[adv]]);
  }
  return MultiMarginalPlan(ms, std::move(tuples), std::move(masses));
}

inline bool rel_close(double a, double b, double rel, double abs_floor = 1e-12) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

/// Worked example in d = 1: mu^1 on {0, 3}, mu^2 and mu^3 on {1, 2}, all uniform.
struct SmallExample {
  std::vector<DiscreteMeasure> measures{
      DiscreteMeasure::uniform({{0.0}, {3.0}}),
      DiscreteMeasure::uniform({{1.0}, {2.0}}),
      DiscreteMeasure::uniform({{1.0}, {2.0}}),
  };
  SimplexWeights weights = SimplexWeights::uniform(3);

  /// Optimal plan: 0 with 1, 1 and 3 with 2, 2.
  MultiMarginalPlan optimal() const { return MultiMarginalPlan(measures, {0, 0, 0, 1, 1, 1}, {0.5, 0.5}); }
  /// Suboptimal plan: 0 with 2, 2 and 3 with 1, 1.
  MultiMarginalPlan crossed() const { return MultiMarginalPlan(measures, {0, 1, 1, 1, 0, 0}, {0.5, 0.5}); }
  /// Plan pairing 0 with 1, 2 and 3 with 2, 1.
  MultiMarginalPlan first() const { return MultiMarginalPlan(measures, {0, 0, 1, 1, 1, 0}, {0.5, 0.5}); }
  /// Plan pairing 0 with 2, 1 and 3 with 1, 2.
  MultiMarginalPlan second() const { return MultiMarginalPlan(measures, {0, 1, 0, 1, 0, 1}, {0.5, 0.5}); }
};

/// Gluing example: mu^1 = (1/2, 1/2), mu^2 = (1/4, 3/4), mu^3 = (1/3, 2/3).
struct GlueExample {
  std::vector<DiscreteMeasure> measures{
      DiscreteMeasure::from_points({{0.0}, {1.0}}, {0.5, 0.5}),
      DiscreteMeasure::from_points({{0.0}, {1.0}}, {0.25, 0.75}),
      DiscreteMeasure::from_points({{0.0}, {1.0}}, {1.0 / 3.0, 2.0 / 3.0}),
  };
  motbary::Coupling pi2{measures[0], measures[1], {0, 0, 0, 1, 1, 1}, {0.25, 0.25, 0.5}};
  motbary::Coupling pi3{measures[0], measures[2], {0, 0, 0, 1, 1, 1}, {1.0 / 3.0, 1.0 / 6.0, 0.5}};
};

}  // namespace testing_support
