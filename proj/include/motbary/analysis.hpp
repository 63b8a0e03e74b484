#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "motbary/cost.hpp"
#include "motbary/exact_oracle.hpp"
#include "motbary/measures.hpp"
#include "motbary/ot2.hpp"

namespace motbary {

enum class Algorithm { reference, greedy, reference_random, greedy_random, oracle };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::reference: return "reference";
    case Algorithm::greedy: return "greedy";
    case Algorithm::reference_random: return "reference-random";
    case Algorithm::greedy_random: return "greedy-random";
    case Algorithm::oracle: return "oracle";
  }
  return "unknown";
}

inline std::optional<Algorithm> parse_algorithm(const std::string& name) {
  for (auto a : {Algorithm::reference, Algorithm::greedy, Algorithm::reference_random,
                 Algorithm::greedy_random, Algorithm::oracle}) {
    if (name == to_string(a)) return a;
  }
  return std::nullopt;
}

/// H_N = sum_{i=1}^N 1/i.
inline double harmonic(std::size_t n) {
  double h = 0.0;
  for (std::size_t i = n; i >= 1; --i) h += 1.0 / static_cast<double>(i);
  return h;
}

/// num / den with 0 / 0 read as 1 and x / 0 as infinity.
inline double cost_ratio(double num, double den, double zero = 1e-14) {
  if (std::abs(den) <= zero) {
    return std::abs(num) <= zero ? 1.0 : std::numeric_limits<double>::infinity();
  }
  return num / den;
}

/// Approximation constants for an instance with N measures and weights lambda.
struct BoundConstants {
  double inverse_first_weight = 0.0;        ///< 1/lambda_1, reference algorithm
  double inverse_max_weight = 0.0;          ///< 1/max lambda, best-input baseline
  double num_measures = 0.0;                ///< N
  double randomized_reference = 2.0;        ///< expectation bound, random reference
  double mixture_baseline = 2.0;            ///< mixture baseline bound on Psi
  std::optional<double> greedy_sorted;      ///< (2N^2 - 5)/3, lambda descending
  std::optional<double> randomized_greedy;  ///< (11N - 4 - 6/(N-1))/12, lambda uniform
  double greedy_lower = 0.0;                ///< (N - H_N)/(pi^2/6 + 1)
  double greedy_lower_simple = 0.0;         ///< N/4 - 1/3
  double harmonic_number = 0.0;             ///< H_N
};

inline BoundConstants bound_constants(const SimplexWeights& weights) {
  const auto n = static_cast<double>(weights.size());
  BoundConstants b;
  b.inverse_first_weight = 1.0 / weights[0];
  b.inverse_max_weight = 1.0 / weights[weights.argmax()];
  b.num_measures = n;
  b.harmonic_number = harmonic(weights.size());
  if (weights.is_descending()) b.greedy_sorted = (2.0 * n * n - 5.0) / 3.0;
  if (weights.is_uniform() && weights.size() >= 2) {
    b.randomized_greedy = (11.0 * n - 4.0 - 6.0 / (n - 1.0)) / 12.0;
  }
  b.greedy_lower = (n - b.harmonic_number) / (std::numbers::pi * std::numbers::pi / 6.0 + 1.0);
  b.greedy_lower_simple = n / 4.0 - 1.0 / 3.0;
  return b;
}

struct Baseline {
  DiscreteMeasure measure;
  double psi = 0.0;
};

/// nu = mu^k for k = argmax lambda (lowest index on ties).
inline Baseline baseline_best_input(std::span<const DiscreteMeasure> measures,
                                    const SimplexWeights& weights, W2Cache* cache = nullptr) {
  if (weights.size() != measures.size()) throw InvalidArgument("weight/measure count mismatch");
  const auto& mu = measures[weights.argmax()];
  return {mu, psi_cost(mu, measures, weights, cache)};
}

/// nu = sum_i lambda_i mu^i with coinciding support points merged.
inline Baseline baseline_mixture(std::span<const DiscreteMeasure> measures,
                                 const SimplexWeights& weights, W2Cache* cache = nullptr) {
  if (weights.size() != measures.size()) throw InvalidArgument("weight/measure count mismatch");
  std::vector<double> pts, w;
  for (std::size_t i = 0; i < measures.size(); ++i) {
    if (measures[i].dim() != measures[0].dim()) throw DimensionMismatch("measures have differing dimensions");
    pts.insert(pts.end(), measures[i].points().begin(), measures[i].points().end());
    for (double x : measures[i].weights()) w.push_back(weights[i] * x);
  }
  DiscreteMeasure mix(measures[0].dim(), std::move(pts), std::move(w));
  const double psi = psi_cost(mix, measures, weights, cache);
  return {std::move(mix), psi};
}

/**
 * @brief Cost summary of one plan.
 *
 * ratio_vs_lb = phi / pairwise_lb is a certified upper estimate of the true
 * approximation ratio because the optimum is at least pairwise_lb.
 */
struct CostReport {
  double phi = 0.0;
  double psi = 0.0;
  double pairwise_lb = 0.0;
  std::optional<double> phi_exact;
  std::optional<double> ratio_vs_exact;
  double ratio_vs_lb = 1.0;
  BoundConstants bound_constants;
  std::optional<Algorithm> algorithm;
  std::size_t atoms = 0;
  std::size_t sparsity_bound = 0;
  /// Human-readable description of every violated guarantee; empty if none.
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
};

struct ReportOptions {
  bool use_oracle = false;
  std::size_t oracle_guard = kDefaultOracleGuard;
  std::optional<Algorithm> algorithm;
  W2Cache* cache = nullptr;
};

/// Evaluates the plan and checks every guarantee that applies to it.
inline CostReport make_report(const MultiMarginalPlan& plan, std::span<const DiscreteMeasure> measures,
                              const SimplexWeights& weights, const ReportOptions& opts = {}) {
  if (plan.num_marginals() != measures.size()) throw InvalidArgument("plan/measure count mismatch");
  for (std::size_t i = 0; i < measures.size(); ++i) {
    if (!(plan.measure(i) == measures[i])) {
      throw InvalidArgument("plan marginal " + std::to_string(i) + " is not the given measure");
    }
  }
  CostReport r;
  r.algorithm = opts.algorithm;
  r.bound_constants = bound_constants(weights);
  r.atoms = plan.size();
  r.sparsity_bound = sparsity_bound(measures);
  r.phi = phi_cost(plan, weights);
  r.psi = psi_cost(pushforward_mean(plan, weights), measures, weights, opts.cache);
  r.pairwise_lb = pairwise_lower_bound(measures, weights, opts.cache);
  r.ratio_vs_lb = cost_ratio(r.phi, r.pairwise_lb);
  if (opts.use_oracle) {
    r.phi_exact = exact_mot_lp(measures, weights, opts.oracle_guard).phi;
    r.ratio_vs_exact = cost_ratio(r.phi, *r.phi_exact);
  }

  auto flag = [&](bool bad, std::string what) {
    if (bad) r.violations.push_back(std::move(what));
  };
  const auto diag = validate_plan(plan);
  flag(!diag.feasible, "plan is not feasible (marginal error " +
                           std::to_string(diag.max_marginal_discrepancy) + ")");
  flag(r.atoms > r.sparsity_bound, "plan has " + std::to_string(r.atoms) + " atoms, bound is " +
                                       std::to_string(r.sparsity_bound));
  const double scale = std::max(1.0, r.phi);
  flag(r.phi < r.psi - 1e-8 * scale, "Phi is below Psi of its mean pushforward");
  flag(r.phi < r.pairwise_lb - 1e-9 * scale, "Phi is below the pairwise lower bound");
  if (r.phi_exact) {
    flag(r.phi < *r.phi_exact - 1e-9 * scale, "Phi is below the exact optimum");
    flag(*r.phi_exact < r.pairwise_lb - 1e-9 * scale, "exact optimum is below the pairwise bound");
    flag(*r.ratio_vs_exact > r.ratio_vs_lb + 1e-9, "ratio vs exact exceeds ratio vs lower bound");
  }
  if (opts.algorithm == Algorithm::reference) {
    const double ub = reference_upper_bound(measures, weights, opts.cache);
    flag(r.phi > ub + 1e-8 * scale, "reference plan exceeds sum_i lambda_i W_2^2(mu^1, mu^i)");
    if (r.ratio_vs_exact) {
      flag(*r.ratio_vs_exact > r.bound_constants.inverse_first_weight + 1e-6,
           "reference ratio exceeds 1/lambda_1");
    }
  }
  if (opts.algorithm == Algorithm::greedy && r.ratio_vs_exact && r.bound_constants.greedy_sorted) {
    flag(*r.ratio_vs_exact > *r.bound_constants.greedy_sorted + 1e-6,
         "greedy ratio exceeds (2N^2 - 5)/3");
  }
  if (opts.algorithm == Algorithm::oracle && r.ratio_vs_exact) {
    flag(std::abs(*r.ratio_vs_exact - 1.0) > 1e-9, "oracle plan is not optimal");
  }
  return r;
}

}  // namespace motbary
