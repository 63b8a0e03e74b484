#pragma once

// Sparse approximate multi-marginal plans from N - 1 two-marginal solves:
// the reference algorithm (every measure coupled to the first one, then glued)
// and the greedy algorithm (each measure coupled to the running barycenter).

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "motbary/detail/parallel.hpp"
#include "motbary/error.hpp"
#include "motbary/measures.hpp"
#include "motbary/ot2.hpp"

namespace motbary {

namespace detail {

inline void check_instance(std::span<const DiscreteMeasure> measures,
                           const SimplexWeights& weights) {
  if (measures.size() < 2) throw InvalidArgument("need at least two measures");
  if (weights.size() != measures.size()) {
    throw InvalidArgument("got " + std::to_string(weights.size()) + " weights for " +
                          std::to_string(measures.size()) + " measures");
  }
  for (const auto& m : measures) {
    if (m.dim() != measures.front().dim()) {
      throw DimensionMismatch("input measures have differing dimensions");
    }
  }
}

/// Atom order used when consuming a measure: by position when d = 1,
/// otherwise by index.
inline std::vector<std::size_t> consumption_order(const DiscreteMeasure& mu) {
  std::vector<std::size_t> order(mu.size());
  std::iota(order.begin(), order.end(), 0);
  if (mu.dim() == 1) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return mu.point(a)[0] < mu.point(b)[0]; });
  }
  return order;
}

}  // namespace detail

/**
 * @brief Glues couplings pi^i in Pi(mu^1, mu^i), i = 2..N, into one plan.
 *
 * For each atom x^1_k (ascending position when d = 1) the couplings' atoms
 * with first coordinate k are consumed in target order, always emitting the
 * minimum residual mass. The (1, i) projection of the result equals
 * plans[i - 2], and the support has at most sum_i #supp(pi^i) - (N - 2) n_1
 * atoms.
 */
inline MultiMarginalPlan glue_pairwise_plans(const DiscreteMeasure& mu1,
                                             std::span<const Coupling> plans) {
  if (plans.empty()) throw InvalidArgument("gluing needs at least one coupling");
  const std::size_t n1 = mu1.size();
  const std::size_t count = plans.size();

  struct Entry {
    std::uint32_t col;
    double mass;
  };
  // rows[i][k]: atoms of coupling i with first index k, in consumption order.
  std::vector<std::vector<std::vector<Entry>>> rows(count, std::vector<std::vector<Entry>>(n1));
  std::vector<DiscreteMeasure> marginals{mu1};
  for (std::size_t i = 0; i < count; ++i) {
    const Coupling& pi = plans[i];
    if (pi.source().size() != n1 || pi.source().dim() != mu1.dim()) {
      throw InvalidArgument("coupling " + std::to_string(i) + " is not over the reference measure");
    }
    marginals.push_back(pi.target());
    std::vector<double> row_mass(n1, 0.0);
    for (std::size_t a = 0; a < pi.size(); ++a) {
      rows[i][pi.index(a, 0)].push_back({pi.index(a, 1), pi.mass(a)});
      row_mass[pi.index(a, 0)] += pi.mass(a);
    }
    for (std::size_t k = 0; k < n1; ++k) {
      if (std::abs(row_mass[k] - mu1.weight(k)) > kMassTolerance) {
        throw InvalidArgument("coupling " + std::to_string(i) +
                              " does not have the reference measure as first marginal");
      }
    }
    const DiscreteMeasure& target = pi.target();
    if (target.dim() == 1) {
      for (auto& bucket : rows[i]) {
        std::stable_sort(bucket.begin(), bucket.end(), [&](const Entry& a, const Entry& b) {
          return target.point(a.col)[0] < target.point(b.col)[0];
        });
      }
    }
  }

  constexpr double kDrift = 1e-15;
  std::vector<MultiMarginalPlan::Index> tuples;
  std::vector<double> masses;
  std::vector<std::size_t> cursor(count);
  std::vector<double> residual(count);
  for (std::size_t k : detail::consumption_order(mu1)) {
    bool live = true;
    for (std::size_t i = 0; i < count; ++i) {
      cursor[i] = 0;
      residual[i] = rows[i][k].empty() ? 0.0 : rows[i][k][0].mass;
      live = live && !rows[i][k].empty();
    }
    while (live) {
      const double h = *std::min_element(residual.begin(), residual.end());
      if (h > 0.0) {
        tuples.push_back(static_cast<MultiMarginalPlan::Index>(k));
        for (std::size_t i = 0; i < count; ++i) tuples.push_back(rows[i][k][cursor[i]].col);
        masses.push_back(h);
      }
      for (std::size_t i = 0; i < count; ++i) {
        residual[i] -= h;
        if (residual[i] < -1e-12) {
          throw SolverError("negative residual mass while gluing couplings");
        }
        if (residual[i] <= kDrift) {
          if (++cursor[i] == rows[i][k].size()) {
            live = false;
          } else {
            residual[i] = rows[i][k][cursor[i]].mass;
          }
        }
      }
    }
    // Whatever remains in a coupling after another ran dry must be drift.
    for (std::size_t i = 0; i < count; ++i) {
      double left = 0.0;
      if (cursor[i] < rows[i][k].size()) {
        left = std::max(0.0, residual[i]);
        for (std::size_t c = cursor[i] + 1; c < rows[i][k].size(); ++c) left += rows[i][k][c].mass;
      }
      if (left > kMassTolerance) {
        throw InvalidArgument("couplings disagree on the mass of reference atom " +
                              std::to_string(k));
      }
    }
  }
  return MultiMarginalPlan(std::move(marginals), std::move(tuples), std::move(masses));
}

/**
 * @brief Reference algorithm: N - 1 optimal couplings to mu^1, then glued.
 *
 * The pairwise solves run concurrently; gluing is sequential. Every (1, i)
 * projection of the output is an optimal coupling of mu^1 and mu^i.
 */
inline MultiMarginalPlan reference_algorithm(std::span<const DiscreteMeasure> measures,
                                             const SimplexWeights& weights,
                                             std::size_t max_workers = 0) {
  detail::check_instance(measures, weights);
  const std::size_t n = measures.size();
  std::vector<std::optional<Coupling>> solved(n - 1);
  detail::parallel_for(
      n - 1,
      [&](std::size_t k) {
        solved[k].emplace(solve_ot2(build_cost_matrix(measures[0], measures[k + 1])).coupling);
      },
      max_workers);
  std::vector<Coupling> couplings;
  couplings.reserve(n - 1);
  for (auto& c : solved) couplings.push_back(std::move(*c));
  return glue_pairwise_plans(measures[0], couplings);
}

/**
 * @brief Running state of the greedy algorithm after r rounds.
 *
 * Holds the partial plan over mu^1..mu^r and, aligned atom for atom, the
 * partial barycenter points m_k = sum_{i<=r} lambda_bar_{i,r} x_{i,k}. Atom k
 * of the partial barycenter is atom k of the partial plan; equal mean points
 * are never merged.
 */
class GreedyState {
 public:
  using Index = MultiMarginalPlan::Index;

  GreedyState(std::span<const DiscreteMeasure> measures, const SimplexWeights& weights)
      : measures_(measures.begin(), measures.end()), weights_(weights) {
    detail::check_instance(measures, weights);
    const DiscreteMeasure& mu1 = measures_.front();
    for (std::size_t j = 0; j < mu1.size(); ++j) {
      tuples_.push_back(static_cast<Index>(j));
      masses_.push_back(mu1.weight(j));
    }
    means_.assign(mu1.points().begin(), mu1.points().end());
  }

  /// Number of measures absorbed so far.
  std::size_t round() const noexcept { return round_; }
  bool done() const noexcept { return round_ == measures_.size(); }
  std::size_t atoms() const noexcept { return masses_.size(); }

  /// Couples the partial barycenter with the next measure and extends tuples.
  void step() {
    if (done()) throw InvalidArgument("greedy state already complete");
    const DiscreteMeasure& next = measures_[round_];
    const std::size_t d = next.dim();
    const CostMatrix cost = squared_euclidean_costs(means_, next.points(), d);
    const auto sol = solve_transport(masses_, next.weights(), cost);
    last_cost_ = sol.cost;

    const std::size_t r = round_ + 1;
    std::vector<double> lambda_bar(r);
    for (std::size_t i = 0; i < r; ++i) lambda_bar[i] = weights_.prefix_weight(i, r);

    std::vector<Index> tuples;
    std::vector<double> masses;
    std::vector<double> means;
    tuples.reserve(sol.flows.size() * r);
    masses.reserve(sol.flows.size());
    means.reserve(sol.flows.size() * d);
    // Flows are sorted by (row, col) and rows are sorted tuples, so the
    // extended tuples stay sorted and distinct.
    for (const auto& f : sol.flows) {
      const std::size_t base = tuples.size();
      tuples.insert(tuples.end(), tuples_.begin() + f.row * round_,
                    tuples_.begin() + (f.row + 1) * round_);
      tuples.push_back(f.col);
      masses.push_back(f.mass);
      for (std::size_t k = 0; k < d; ++k) {
        double m = 0.0;
        for (std::size_t i = 0; i < r; ++i) {
          m += lambda_bar[i] * measures_[i].point(tuples[base + i])[k];
        }
        means.push_back(m);
      }
    }
    tuples_ = std::move(tuples);
    masses_ = std::move(masses);
    means_ = std::move(means);
    round_ = r;
  }

  void run() {
    while (!done()) step();
  }

  /// Transport cost of the most recent round's two-marginal solve.
  double last_round_cost() const noexcept { return last_cost_; }

  MultiMarginalPlan partial_plan() const {
    return MultiMarginalPlan(
        std::vector<DiscreteMeasure>(measures_.begin(), measures_.begin() + round_), tuples_,
        masses_);
  }

  std::span<const Index> partial_tuples() const noexcept { return tuples_; }
  std::span<const double> partial_masses() const noexcept { return masses_; }
  /// Flat partial barycenter coordinates, atoms() * dim entries.
  std::span<const double> partial_means() const noexcept { return means_; }

  /// The partial barycenter as a (merged) measure.
  DiscreteMeasure partial_barycenter() const {
    return DiscreteMeasure(measures_.front().dim(), means_, masses_);
  }

 private:
  std::vector<DiscreteMeasure> measures_;
  SimplexWeights weights_;
  std::size_t round_ = 1;
  std::vector<Index> tuples_;
  std::vector<double> masses_;
  std::vector<double> means_;
  double last_cost_ = 0.0;
};

inline MultiMarginalPlan greedy_algorithm(std::span<const DiscreteMeasure> measures,
                                          const SimplexWeights& weights) {
  GreedyState state(measures, weights);
  state.run();
  return state.partial_plan();
}

/// Re-expresses a plan computed on reordered inputs in the original order:
/// marginal p of `plan` is input measure order[p].
inline MultiMarginalPlan restore_marginal_order(const MultiMarginalPlan& plan,
                                                std::span<const std::size_t> order) {
  const std::size_t n = plan.num_marginals();
  if (order.size() != n) throw InvalidArgument("permutation length mismatch");
  std::vector<std::size_t> position(n, n);
  for (std::size_t p = 0; p < n; ++p) {
    if (order[p] >= n || position[order[p]] != n) throw InvalidArgument("not a permutation");
    position[order[p]] = p;
  }
  return marginal_projection(plan, position);
}

namespace detail {

template <class T>
std::vector<T> reorder(std::span<const T> items, std::span<const std::size_t> order) {
  std::vector<T> out;
  out.reserve(order.size());
  for (std::size_t p : order) out.push_back(items[p]);
  return out;
}

inline SimplexWeights reorder(const SimplexWeights& w, std::span<const std::size_t> order) {
  std::vector<double> out;
  for (std::size_t p : order) out.push_back(w[p]);
  return SimplexWeights(std::move(out));
}

}  // namespace detail

/// Draws a reference index with probability lambda_i.
inline std::size_t sample_reference_index(const SimplexWeights& weights, std::mt19937_64& rng) {
  std::discrete_distribution<std::size_t> pick(weights.values().begin(), weights.values().end());
  return pick(rng);
}

/// Reference algorithm with mu^k as reference, then coordinates restored to
/// input order. `reference` indexes the input list.
inline MultiMarginalPlan reference_algorithm_with(std::span<const DiscreteMeasure> measures,
                                                  const SimplexWeights& weights,
                                                  std::size_t reference) {
  detail::check_instance(measures, weights);
  if (reference >= measures.size()) throw InvalidArgument("reference index out of range");
  std::vector<std::size_t> order{reference};
  for (std::size_t i = 0; i < measures.size(); ++i) {
    if (i != reference) order.push_back(i);
  }
  const auto permuted = detail::reorder(measures, order);
  return restore_marginal_order(reference_algorithm(permuted, detail::reorder(weights, order)),
                                order);
}

/// Reference algorithm with the reference measure drawn with probability
/// lambda_i. Deterministic per seed.
inline MultiMarginalPlan randomized_reference(std::span<const DiscreteMeasure> measures,
                                              const SimplexWeights& weights, std::uint64_t seed) {
  detail::check_instance(measures, weights);
  std::mt19937_64 rng(seed);
  return reference_algorithm_with(measures, weights, sample_reference_index(weights, rng));
}

/// Uniformly random input order for the greedy algorithm with lambda = 1/N.
inline std::vector<std::size_t> sample_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

/// Greedy algorithm on a uniformly random permutation of the inputs with
/// uniform weights; coordinates restored to input order.
inline MultiMarginalPlan randomized_greedy(std::span<const DiscreteMeasure> measures,
                                           std::uint64_t seed) {
  const auto weights = SimplexWeights::uniform(measures.size());
  detail::check_instance(measures, weights);
  std::mt19937_64 rng(seed);
  const auto order = sample_permutation(measures.size(), rng);
  return restore_marginal_order(greedy_algorithm(detail::reorder(measures, order), weights), order);
}

/// As above; rejects non-uniform weights, since the expectation bound for the
/// randomized greedy order only holds for lambda = 1/N.
inline MultiMarginalPlan randomized_greedy(std::span<const DiscreteMeasure> measures,
                                           const SimplexWeights& weights, std::uint64_t seed) {
  if (!weights.is_uniform()) {
    throw InvalidArgument(
        "randomized greedy requires uniform weights lambda = 1/N (its expectation bound "
        "assumes equal weights)");
  }
  return randomized_greedy(measures, seed);
}

}  // namespace motbary
