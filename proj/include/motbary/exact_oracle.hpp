#pragma once

// Exact multi-marginal OT on tiny instances by a dense revised simplex over
// the full product support, plus optimality certificates built on it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "motbary/cost.hpp"
#include "motbary/error.hpp"
#include "motbary/measures.hpp"
#include "motbary/ot2.hpp"

namespace motbary {

inline constexpr std::size_t kDefaultOracleGuard = 200000;

/**
 * @brief Dense multi-index transportation LP over prod_i n_i variables.
 *
 * Variable v encodes the tuple (j_1, ..., j_N) in mixed radix with the first
 * marginal most significant, so variable order equals lexicographic tuple
 * order. Each variable appears in exactly one equality row per marginal.
 */
class DenseMotLp {
 public:
  using Index = MultiMarginalPlan::Index;

  DenseMotLp(std::vector<std::size_t> sizes, std::vector<double> cost)
      : sizes_(std::move(sizes)), cost_(std::move(cost)) {
    if (sizes_.empty()) throw InvalidArgument("LP needs at least one marginal");
    variables_ = checked_product(sizes_, std::numeric_limits<std::size_t>::max());
    if (cost_.size() != variables_) {
      throw InvalidArgument("cost vector has " + std::to_string(cost_.size()) +
                            " entries for " + std::to_string(variables_) + " variables");
    }
    strides_.assign(sizes_.size(), 1);
    for (std::size_t i = sizes_.size() - 1; i-- > 0;) strides_[i] = strides_[i + 1] * sizes_[i + 1];
  }

  /// Builds the MOT cost sum_{s<t} lambda_s lambda_t |x_s - x_t|^2 per tuple.
  static DenseMotLp mot(std::span<const DiscreteMeasure> measures, const SimplexWeights& weights,
                        std::size_t size_guard = kDefaultOracleGuard) {
    if (measures.empty()) throw InvalidArgument("no measures");
    if (weights.size() != measures.size()) throw InvalidArgument("weight/measure count mismatch");
    std::vector<std::size_t> sizes;
    for (const auto& m : measures) {
      if (m.dim() != measures[0].dim()) throw DimensionMismatch("measures have differing dimensions");
      sizes.push_back(m.size());
    }
    const std::size_t vars = checked_product(sizes, size_guard);
    const std::size_t n = measures.size();
    // Pairwise squared distances between supports, reused across tuples.
    std::vector<std::vector<CostMatrix>> pair(n, std::vector<CostMatrix>(n));
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = s + 1; t < n; ++t)
        pair[s][t] = squared_euclidean_costs(measures[s].points(), measures[t].points(),
                                             measures[0].dim());
    std::vector<double> cost(vars);
    std::vector<std::size_t> idx(n, 0);
    for (std::size_t v = 0; v < vars; ++v) {
      double c = 0.0;
      for (std::size_t s = 0; s < n; ++s)
        for (std::size_t t = s + 1; t < n; ++t)
          c += weights[s] * weights[t] * pair[s][t](idx[s], idx[t]);
      cost[v] = c;
      for (std::size_t i = n; i-- > 0;) {
        if (++idx[i] < sizes[i]) break;
        idx[i] = 0;
      }
    }
    return DenseMotLp(std::move(sizes), std::move(cost));
  }

  std::size_t num_marginals() const noexcept { return sizes_.size(); }
  std::size_t variables() const noexcept { return variables_; }
  std::span<const std::size_t> sizes() const noexcept { return sizes_; }
  std::span<const double> cost() const noexcept { return cost_; }

  void decode(std::size_t v, std::span<Index> out) const {
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
      out[i] = static_cast<Index>((v / strides_[i]) % sizes_[i]);
    }
  }

  std::size_t encode(std::span<const Index> tuple) const {
    std::size_t v = 0;
    for (std::size_t i = 0; i < sizes_.size(); ++i) v += tuple[i] * strides_[i];
    return v;
  }

  /// Product of sizes; throws OracleGuardExceeded if it exceeds guard.
  static std::size_t checked_product(std::span<const std::size_t> sizes, std::size_t guard) {
    std::size_t p = 1;
    for (std::size_t n : sizes) {
      if (n == 0) throw InvalidArgument("empty marginal");
      if (p > guard / n) {
        // Report a saturated count rather than overflowing.
        long double exact = 1;
        for (std::size_t m : sizes) exact *= static_cast<long double>(m);
        const auto shown = exact > static_cast<long double>(std::numeric_limits<std::size_t>::max())
                               ? std::numeric_limits<std::size_t>::max()
                               : static_cast<std::size_t>(exact);
        throw OracleGuardExceeded(shown, guard);
      }
      p *= n;
    }
    return p;
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> strides_;
  std::vector<double> cost_;
  std::size_t variables_ = 0;
};

struct LpOptions {
  double reduced_cost_tolerance = 1e-11;  ///< relative to max |c|
  double pivot_tolerance = 1e-9;
  std::size_t refactor_interval = 64;
  std::size_t max_iterations = 1000000;
};

struct LpSolution {
  std::vector<MultiMarginalPlan::Index> tuples;  ///< flat, positive basic variables
  std::vector<double> masses;
  double objective = 0.0;
  std::vector<std::vector<double>> duals;  ///< one potential per (marginal, atom)
  double dual_objective = 0.0;
  double max_dual_infeasibility = 0.0;  ///< max over v of (sum of potentials - c_v)^+
  std::size_t iterations = 0;
  std::size_t basis_size = 0;
};

namespace detail {

/// Revised simplex with a dense basis inverse. Row (0, j) is kept for all j;
/// rows (i, 0) for i >= 1 are dropped as redundant, leaving
/// sum n_i - N + 1 linearly independent equality rows.
class DenseLpSimplex {
 public:
  DenseLpSimplex(const DenseMotLp& lp, const std::vector<std::vector<double>>& marginals,
                 const LpOptions& opts)
      : lp_(lp), opts_(opts), n_(lp.num_marginals()) {
    offset_.assign(n_, 0);
    std::size_t rows = lp.sizes()[0];
    for (std::size_t i = 1; i < n_; ++i) {
      offset_[i] = rows;
      rows += lp.sizes()[i] - 1;
    }
    m_ = rows;
    b_.assign(m_, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < lp.sizes()[i]; ++j) {
        const long r = row_of(i, j);
        if (r >= 0) b_[r] = marginals[i][j];
      }
    rows_.resize(lp.variables() * n_);
    std::vector<DenseMotLp::Index> t(n_);
    for (std::size_t v = 0; v < lp.variables(); ++v) {
      lp.decode(v, t);
      for (std::size_t i = 0; i < n_; ++i) rows_[v * n_ + i] = static_cast<std::int32_t>(row_of(i, t[i]));
    }
    double cmax = 0.0;
    for (double c : lp.cost()) cmax = std::max(cmax, std::abs(c));
    tol_ = opts.reduced_cost_tolerance * cmax;
    in_basis_.assign(lp.variables(), 0);
    initial_basis(marginals);
  }

  LpSolution run() {
    refactor();
    std::size_t since_refactor = 0;
    std::size_t degenerate = 0;
    bool bland = false;
    for (;;) {
      if (iterations_ >= opts_.max_iterations) {
        throw SolverError("dense LP exceeded iteration budget", iterations_);
      }
      compute_duals();
      auto entering = price(bland);
      if (!entering) {
        if (since_refactor == 0) break;
        refactor();
        since_refactor = 0;
        continue;
      }
      const double theta = pivot(*entering);
      ++iterations_;
      if (++since_refactor >= opts_.refactor_interval) {
        refactor();
        since_refactor = 0;
      }
      if (theta <= 1e-14) {
        if (++degenerate > m_) bland = true;
      } else {
        degenerate = 0;
        bland = false;
      }
    }
    return extract();
  }

 private:
  long row_of(std::size_t i, std::size_t j) const {
    if (i == 0) return static_cast<long>(j);
    if (j == 0) return -1;
    return static_cast<long>(offset_[i] + j - 1);
  }

  std::span<const std::int32_t> column(std::size_t v) const { return {rows_.data() + v * n_, n_}; }

  /// Multi-index north-west corner: every step advances exactly one marginal,
  /// so the basis has sum n_i - N + 1 columns and is triangular.
  void initial_basis(const std::vector<std::vector<double>>& marginals) {
    std::vector<DenseMotLp::Index> idx(n_, 0);
    std::vector<double> residual(n_);
    for (std::size_t i = 0; i < n_; ++i) residual[i] = marginals[i][0];
    for (;;) {
      const std::size_t v = lp_.encode(idx);
      basis_.push_back(v);
      in_basis_[v] = 1;
      const double h = std::max(0.0, *std::min_element(residual.begin(), residual.end()));
      for (double& r : residual) r -= h;
      std::size_t advance = n_;
      for (std::size_t i = 0; i < n_; ++i) {
        if (idx[i] + 1 >= lp_.sizes()[i]) continue;
        if (advance == n_ || residual[i] < residual[advance]) advance = i;
      }
      if (advance == n_) break;
      ++idx[advance];
      residual[advance] += marginals[advance][idx[advance]];
    }
    if (basis_.size() != m_) throw SolverError("initial basis has wrong size");
  }

  /// Gauss-Jordan inversion of the current basis matrix with partial pivoting.
  void refactor() {
    std::vector<double> a(m_ * m_, 0.0);
    for (std::size_t k = 0; k < m_; ++k)
      for (std::int32_t r : column(basis_[k]))
        if (r >= 0) a[r * m_ + k] = 1.0;
    binv_.assign(m_ * m_, 0.0);
    for (std::size_t k = 0; k < m_; ++k) binv_[k * m_ + k] = 1.0;
    for (std::size_t c = 0; c < m_; ++c) {
      std::size_t p = c;
      for (std::size_t r = c + 1; r < m_; ++r)
        if (std::abs(a[r * m_ + c]) > std::abs(a[p * m_ + c])) p = r;
      if (std::abs(a[p * m_ + c]) < 1e-12) throw SolverError("singular basis", iterations_);
      if (p != c) {
        for (std::size_t k = 0; k < m_; ++k) {
          std::swap(a[p * m_ + k], a[c * m_ + k]);
          std::swap(binv_[p * m_ + k], binv_[c * m_ + k]);
        }
      }
      const double inv = 1.0 / a[c * m_ + c];
      for (std::size_t k = 0; k < m_; ++k) {
        a[c * m_ + k] *= inv;
        binv_[c * m_ + k] *= inv;
      }
      for (std::size_t r = 0; r < m_; ++r) {
        if (r == c) continue;
        const double f = a[r * m_ + c];
        if (f == 0.0) continue;
        for (std::size_t k = 0; k < m_; ++k) {
          a[r * m_ + k] -= f * a[c * m_ + k];
          binv_[r * m_ + k] -= f * binv_[c * m_ + k];
        }
      }
    }
    xb_.assign(m_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < m_; ++k) s += binv_[r * m_ + k] * b_[k];
      xb_[r] = s < 0.0 && s > -1e-12 ? 0.0 : s;
    }
  }

  void compute_duals() {
    y_.assign(m_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) {
      const double c = lp_.cost()[basis_[r]];
      if (c == 0.0) continue;
      for (std::size_t k = 0; k < m_; ++k) y_[k] += c * binv_[r * m_ + k];
    }
  }

  double reduced_cost(std::size_t v) const {
    double d = lp_.cost()[v];
    for (std::int32_t r : column(v))
      if (r >= 0) d -= y_[r];
    return d;
  }

  std::optional<std::size_t> price(bool bland) const {
    std::optional<std::size_t> best;
    double best_d = -tol_;
    for (std::size_t v = 0; v < lp_.variables(); ++v) {
      if (in_basis_[v]) continue;
      const double d = reduced_cost(v);
      if (d < best_d) {
        best = v;
        if (bland) return best;
        best_d = d;
      }
    }
    return best;
  }

  double pivot(std::size_t v) {
    std::vector<double> alpha(m_, 0.0);
    for (std::int32_t r : column(v)) {
      if (r < 0) continue;
      for (std::size_t k = 0; k < m_; ++k) alpha[k] += binv_[k * m_ + r];
    }
    std::size_t leave = m_;
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m_; ++k) {
      if (alpha[k] <= opts_.pivot_tolerance) continue;
      const double ratio = std::max(0.0, xb_[k]) / alpha[k];
      if (leave == m_ || ratio < theta - 1e-14 ||
          (ratio <= theta + 1e-14 && basis_[k] < basis_[leave])) {
        if (leave == m_ || ratio < theta - 1e-14) theta = ratio;
        leave = k;
      }
    }
    if (leave == m_) throw SolverError("dense LP is unbounded", iterations_);
    for (std::size_t k = 0; k < m_; ++k) {
      if (k == leave) continue;
      xb_[k] -= theta * alpha[k];
      if (xb_[k] < 0.0 && xb_[k] > -1e-12) xb_[k] = 0.0;
    }
    xb_[leave] = theta;
    const double inv = 1.0 / alpha[leave];
    double* prow = binv_.data() + leave * m_;
    for (std::size_t c = 0; c < m_; ++c) prow[c] *= inv;
    for (std::size_t k = 0; k < m_; ++k) {
      if (k == leave || alpha[k] == 0.0) continue;
      double* row = binv_.data() + k * m_;
      for (std::size_t c = 0; c < m_; ++c) row[c] -= alpha[k] * prow[c];
    }
    in_basis_[basis_[leave]] = 0;
    in_basis_[v] = 1;
    basis_[leave] = v;
    return theta;
  }

  LpSolution extract() {
    LpSolution sol;
    sol.iterations = iterations_;
    sol.basis_size = m_;
    std::vector<std::size_t> order(m_);
    for (std::size_t k = 0; k < m_; ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return basis_[a] < basis_[b]; });
    std::vector<DenseMotLp::Index> t(n_);
    for (std::size_t k : order) {
      if (xb_[k] <= kDropThreshold) continue;
      lp_.decode(basis_[k], t);
      sol.tuples.insert(sol.tuples.end(), t.begin(), t.end());
      sol.masses.push_back(xb_[k]);
      sol.objective += xb_[k] * lp_.cost()[basis_[k]];
    }
    sol.duals.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      sol.duals[i].assign(lp_.sizes()[i], 0.0);
      for (std::size_t j = 0; j < lp_.sizes()[i]; ++j) {
        const long r = row_of(i, j);
        if (r >= 0) sol.duals[i][j] = y_[r];
      }
    }
    for (std::size_t r = 0; r < m_; ++r) sol.dual_objective += b_[r] * y_[r];
    for (std::size_t v = 0; v < lp_.variables(); ++v) {
      sol.max_dual_infeasibility = std::max(sol.max_dual_infeasibility, -reduced_cost(v));
    }
    return sol;
  }

  const DenseMotLp& lp_;
  LpOptions opts_;
  std::size_t n_;
  std::size_t m_ = 0;
  std::vector<std::size_t> offset_;
  std::vector<double> b_;
  std::vector<std::int32_t> rows_;
  std::vector<char> in_basis_;
  std::vector<std::size_t> basis_;
  std::vector<double> binv_;
  std::vector<double> xb_;
  std::vector<double> y_;
  double tol_ = 0.0;
  std::size_t iterations_ = 0;
};

}  // namespace detail

/// Solves min <c, x> over nonnegative x on the product support with the given
/// marginals. Marginals must share the same total mass.
inline LpSolution solve_dense_lp(const DenseMotLp& lp,
                                 const std::vector<std::vector<double>>& marginals,
                                 const LpOptions& opts = {}) {
  if (marginals.size() != lp.num_marginals()) throw InvalidArgument("marginal count mismatch");
  double total0 = 0.0;
  for (std::size_t i = 0; i < marginals.size(); ++i) {
    if (marginals[i].size() != lp.sizes()[i]) throw InvalidArgument("marginal length mismatch");
    double s = 0.0;
    for (double w : marginals[i]) {
      if (!std::isfinite(w) || w < 0.0) throw InvalidArgument("marginal masses must be nonnegative");
      s += w;
    }
    if (i == 0) total0 = s;
    if (std::abs(s - total0) > 1e-9 * std::max(1.0, total0)) {
      throw InvalidArgument("marginals have unequal total mass");
    }
  }
  for (double c : lp.cost()) {
    if (!std::isfinite(c)) throw InvalidArgument("cost entries must be finite");
  }
  return detail::DenseLpSimplex(lp, marginals, opts).run();
}

struct MotLpResult {
  MultiMarginalPlan plan;
  double phi = 0.0;            ///< primal optimum
  double dual_value = 0.0;     ///< dual objective at the final basis
  double duality_gap = 0.0;    ///< |phi - dual_value|
  double dual_infeasibility = 0.0;
  std::size_t iterations = 0;
};

/// Globally optimal MOT plan by the dense LP. The returned plan is a basic
/// solution, hence has at most sum n_i - N + 1 atoms.
inline MotLpResult exact_mot_lp(std::span<const DiscreteMeasure> measures,
                                const SimplexWeights& weights,
                                std::size_t size_guard = kDefaultOracleGuard) {
  const auto lp = DenseMotLp::mot(measures, weights, size_guard);
  std::vector<std::vector<double>> marginals;
  for (const auto& m : measures) marginals.emplace_back(m.weights().begin(), m.weights().end());
  auto sol = solve_dense_lp(lp, marginals);
  const double gap = std::abs(sol.objective - sol.dual_objective);
  double cmax = 0.0;
  for (double c : lp.cost()) cmax = std::max(cmax, c);
  if (gap > 1e-9 * std::max(1.0, std::abs(sol.objective)) ||
      sol.max_dual_infeasibility > 1e-9 * std::max(1.0, cmax)) {
    throw SolverError("dense LP failed its duality certificate (gap " + std::to_string(gap) + ")",
                      sol.iterations);
  }
  MultiMarginalPlan plan(std::vector<DiscreteMeasure>(measures.begin(), measures.end()),
                         std::move(sol.tuples), std::move(sol.masses));
  return {std::move(plan), sol.objective, sol.dual_objective, gap, sol.max_dual_infeasibility,
          sol.iterations};
}

struct ExactBarycenter {
  DiscreteMeasure barycenter;
  MultiMarginalPlan plan;
  double phi = 0.0;
  double psi = 0.0;
  double min_mean_separation = 0.0;  ///< smallest distance between two mean points
};

/// nu_hat = (M_lambda)_# pi_hat. Checks that the optimal means are pairwise
/// distinct and that Psi(nu_hat) equals Phi(pi_hat).
inline ExactBarycenter exact_barycenter(std::span<const DiscreteMeasure> measures,
                                        const SimplexWeights& weights,
                                        std::size_t size_guard = kDefaultOracleGuard,
                                        W2Cache* cache = nullptr) {
  auto lp = exact_mot_lp(measures, weights, size_guard);
  const std::size_t d = lp.plan.dim();
  std::vector<double> means(lp.plan.size() * d);
  for (std::size_t a = 0; a < lp.plan.size(); ++a) {
    atom_mean(lp.plan, a, weights.values(), std::span<double>(means.data() + a * d, d));
  }
  double sep = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < lp.plan.size(); ++a)
    for (std::size_t b = a + 1; b < lp.plan.size(); ++b)
      sep = std::min(sep, std::sqrt(squared_distance({means.data() + a * d, d},
                                                     {means.data() + b * d, d})));
  if (sep <= 1e-12) throw SolverError("optimal plan has coinciding mean points");
  auto bary = pushforward_mean(lp.plan, weights);
  const double psi = psi_cost(bary, measures, weights, cache);
  if (std::abs(psi - lp.phi) > 1e-8 * std::max(1.0, lp.phi)) {
    throw SolverError("barycenter cost " + std::to_string(psi) + " differs from MOT optimum " +
                      std::to_string(lp.phi));
  }
  return {std::move(bary), std::move(lp.plan), lp.phi, psi, sep};
}

/// True iff, in d = 1, the support tuples are totally ordered coordinatewise.
inline bool sorting_property_check(const MultiMarginalPlan& plan) {
  if (plan.dim() != 1) {
    throw DimensionMismatch("sorting property is defined for d = 1 only, got d = " +
                            std::to_string(plan.dim()));
  }
  const std::size_t n = plan.num_marginals();
  std::vector<std::size_t> order(plan.size());
  for (std::size_t a = 0; a < order.size(); ++a) order[a] = a;
  auto pos = [&](std::size_t a, std::size_t i) { return plan.point(a, i)[0]; };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (std::size_t i = 0; i < n; ++i) {
      if (pos(a, i) != pos(b, i)) return pos(a, i) < pos(b, i);
    }
    return false;
  });
  // A chain in the coordinatewise order iff consecutive pairs are comparable.
  for (std::size_t k = 1; k < order.size(); ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (pos(order[k - 1], i) > pos(order[k], i)) return false;
  return true;
}

struct SideConditions {
  /// Per marginal: cost of the induced coupling sum_j pi_j delta(m_j, x_{i,j})
  /// minus W_2^2(nu, mu^i). Zero for an optimal plan.
  std::vector<double> induced_gap;
  double max_induced_gap = 0.0;
  /// Per candidate: Psi(candidate) - Psi(nu) - W_2^2(candidate, nu), clipped at 0.
  std::vector<double> estimate_violation;
  double max_estimate_violation = 0.0;
  double psi = 0.0;  ///< Psi(nu) for nu the mean pushforward of the plan
};

/// Checks the necessary conditions a claimed-optimal plan must satisfy.
inline SideConditions optimality_side_conditions(const MultiMarginalPlan& plan,
                                                 const SimplexWeights& weights,
                                                 std::span<const DiscreteMeasure> candidates = {},
                                                 W2Cache* cache = nullptr) {
  detail::check_weights(plan, weights);
  const auto& measures = plan.measures();
  const auto nu = pushforward_mean(plan, weights);
  SideConditions out;
  const std::size_t n = plan.num_marginals();
  const std::size_t d = plan.dim();
  std::vector<double> m(d);
  std::vector<double> induced(n, 0.0);
  for (std::size_t a = 0; a < plan.size(); ++a) {
    atom_mean(plan, a, weights.values(), m);
    for (std::size_t i = 0; i < n; ++i) induced[i] += plan.mass(a) * squared_distance(m, plan.point(a, i));
  }
  const auto w2 = detail::parallel_map<double>(
      n, [&](std::size_t i) { return detail::cached_w2(cache, nu, measures[i]); });
  for (std::size_t i = 0; i < n; ++i) {
    out.induced_gap.push_back(induced[i] - w2[i]);
    out.max_induced_gap = std::max(out.max_induced_gap, std::abs(induced[i] - w2[i]));
    out.psi += weights[i] * w2[i];
  }
  for (const auto& cand : candidates) {
    const double psi_c = psi_cost(cand, measures, weights, cache);
    const double dist = detail::cached_w2(cache, cand, nu);
    const double v = std::max(0.0, psi_c - out.psi - dist);
    out.estimate_violation.push_back(v);
    out.max_estimate_violation = std::max(out.max_estimate_violation, v);
  }
  return out;
}

}  // namespace motbary
