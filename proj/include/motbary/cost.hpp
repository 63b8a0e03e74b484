#pragma once

// The two objective functionals:
//   Phi(pi) = sum_j pi_j sum_{s<t} lambda_s lambda_t |x_{s,j} - x_{t,j}|^2
//   Psi(nu) = sum_i lambda_i W_2^2(mu^i, nu)
// and the pairwise lower bound sum_{s<t} lambda_s lambda_t W_2^2(mu^s, mu^t).

#include <span>
#include <vector>

#include "motbary/detail/parallel.hpp"
#include "motbary/measures.hpp"
#include "motbary/ot2.hpp"

namespace motbary {

namespace detail {

inline void check_weights(const MultiMarginalPlan& plan, const SimplexWeights& weights) {
  if (weights.size() != plan.num_marginals()) {
    throw InvalidArgument("got " + std::to_string(weights.size()) + " weights for a plan with " +
                          std::to_string(plan.num_marginals()) + " marginals");
  }
}

inline double cached_w2(W2Cache* cache, const DiscreteMeasure& a, const DiscreteMeasure& b) {
  return cache ? cache->get(a, b) : w2_squared(a, b);
}

}  // namespace detail

/// Phi in variance form: sum_j pi_j sum_s lambda_s |x_{s,j} - m_j|^2, O(N d)
/// per atom.
inline double phi_cost(const MultiMarginalPlan& plan, const SimplexWeights& weights) {
  detail::check_weights(plan, weights);
  const std::size_t d = plan.dim();
  std::vector<double> m(d);
  double total = 0.0;
  for (std::size_t a = 0; a < plan.size(); ++a) {
    atom_mean(plan, a, weights.values(), m);
    double spread = 0.0;
    for (std::size_t s = 0; s < plan.num_marginals(); ++s) {
      spread += weights[s] * squared_distance(plan.point(a, s), m);
    }
    total += plan.mass(a) * spread;
  }
  return total;
}

/// Phi summed pair by pair, O(N^2 d) per atom. Debug path for phi_cost.
inline double phi_cost_pairwise(const MultiMarginalPlan& plan, const SimplexWeights& weights) {
  detail::check_weights(plan, weights);
  double total = 0.0;
  for (std::size_t a = 0; a < plan.size(); ++a) {
    double c = 0.0;
    for (std::size_t s = 0; s < plan.num_marginals(); ++s)
      for (std::size_t t = s + 1; t < plan.num_marginals(); ++t)
        c += weights[s] * weights[t] * squared_distance(plan.point(a, s), plan.point(a, t));
    total += plan.mass(a) * c;
  }
  return total;
}

/// Psi(candidate) = sum_i lambda_i W_2^2(mu^i, candidate); the N solves run
/// concurrently.
inline double psi_cost(const DiscreteMeasure& candidate, std::span<const DiscreteMeasure> measures,
                       const SimplexWeights& weights, W2Cache* cache = nullptr) {
  if (weights.size() != measures.size()) throw InvalidArgument("weight/measure count mismatch");
  for (const auto& mu : measures) {
    if (mu.dim() != candidate.dim()) throw DimensionMismatch("candidate dimension mismatch");
  }
  const auto w2 = detail::parallel_map<double>(measures.size(), [&](std::size_t i) {
    return detail::cached_w2(cache, measures[i], candidate);
  });
  double total = 0.0;
  for (std::size_t i = 0; i < measures.size(); ++i) total += weights[i] * w2[i];
  return total;
}

/// All pairwise W_2^2(mu^s, mu^t), s < t, as a symmetric N x N table.
inline std::vector<std::vector<double>> pairwise_w2(std::span<const DiscreteMeasure> measures,
                                                    W2Cache* cache = nullptr) {
  const std::size_t n = measures.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = s + 1; t < n; ++t) pairs.emplace_back(s, t);
  const auto vals = detail::parallel_map<double>(pairs.size(), [&](std::size_t k) {
    return detail::cached_w2(cache, measures[pairs[k].first], measures[pairs[k].second]);
  });
  std::vector<std::vector<double>> table(n, std::vector<double>(n, 0.0));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    table[pairs[k].first][pairs[k].second] = vals[k];
    table[pairs[k].second][pairs[k].first] = vals[k];
  }
  return table;
}

/// sum_{s<t} lambda_s lambda_t W_2^2(mu^s, mu^t), a lower bound on Phi of the
/// optimal plan.
inline double pairwise_lower_bound(std::span<const DiscreteMeasure> measures,
                                   const SimplexWeights& weights, W2Cache* cache = nullptr) {
  if (weights.size() != measures.size()) throw InvalidArgument("weight/measure count mismatch");
  const auto table = pairwise_w2(measures, cache);
  double lb = 0.0;
  for (std::size_t s = 0; s < measures.size(); ++s)
    for (std::size_t t = s + 1; t < measures.size(); ++t) lb += weights[s] * weights[t] * table[s][t];
  return lb;
}

/// sum_{i>=2} lambda_i W_2^2(mu^1, mu^i): upper bound on Phi of the reference
/// algorithm's plan.
inline double reference_upper_bound(std::span<const DiscreteMeasure> measures,
                                    const SimplexWeights& weights, W2Cache* cache = nullptr) {
  if (weights.size() != measures.size()) throw InvalidArgument("weight/measure count mismatch");
  const auto w2 = detail::parallel_map<double>(measures.size() - 1, [&](std::size_t k) {
    return detail::cached_w2(cache, measures[0], measures[k + 1]);
  });
  double total = 0.0;
  for (std::size_t k = 0; k < w2.size(); ++k) total += weights[k + 1] * w2[k];
  return total;
}

}  // namespace motbary
