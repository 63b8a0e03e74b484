#pragma once

// Exact two-marginal optimal transport: transportation network simplex with a
// north-west-corner start. Returns vertex (spanning-tree) solutions, so the
// coupling has at most n + m - 1 atoms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "motbary/error.hpp"
#include "motbary/measures.hpp"

namespace motbary {

/// Dense row-major n x m cost matrix. Memory is n*m doubles.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const double> data() const noexcept { return data_; }

  CostMatrix transposed() const {
    CostMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Squared Euclidean costs between two flat point arrays of dimension d.
inline CostMatrix squared_euclidean_costs(std::span<const double> xs, std::span<const double> ys,
                                          std::size_t d) {
  const std::size_t n = xs.size() / d;
  const std::size_t m = ys.size() / d;
  CostMatrix c(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = xs.subspan(i * d, d);
    for (std::size_t j = 0; j < m; ++j) c(i, j) = squared_distance(x, ys.subspan(j * d, d));
  }
  return c;
}

struct TransportFlow {
  std::uint32_t row;
  std::uint32_t col;
  double mass;
};

struct TransportOptions {
  /// Pivot budget multiplier: the solver gives up after
  /// pivot_budget_factor * (n + m)^2 pivots.
  std::size_t pivot_budget_factor = 50;
  /// Relative optimality tolerance on reduced costs (scaled by max |cost|).
  double reduced_cost_tolerance = 1e-11;
};

struct TransportSolution {
  std::vector<TransportFlow> flows;  ///< positive basic cells, sorted by (row, col)
  double cost = 0.0;
  std::vector<double> row_potential;  ///< u
  std::vector<double> col_potential;  ///< v, with u_i + v_j <= c_ij
  std::size_t pivots = 0;
};

namespace detail {

class TransportSimplex {
 public:
  TransportSimplex(std::span<const double> supply, std::span<const double> demand,
                   const CostMatrix& cost, const TransportOptions& opts)
      : n_(supply.size()), m_(demand.size()), cost_(cost), opts_(opts) {
    adj_.resize(n_ + m_);
    u_.assign(n_, 0.0);
    v_.assign(m_, 0.0);
    parent_cell_.assign(n_ + m_, -1);
    visited_.assign(n_ + m_, 0);
    order_.reserve(n_ + m_);
    cmax_ = 0.0;
    for (double c : cost.data()) cmax_ = std::max(cmax_, std::abs(c));
    tol_ = opts.reduced_cost_tolerance * std::max(cmax_, std::numeric_limits<double>::min());
    north_west_corner(supply, demand);
  }

  TransportSolution run() {
    const std::size_t budget = opts_.pivot_budget_factor * (n_ + m_) * (n_ + m_);
    std::size_t degenerate_streak = 0;
    const std::size_t bland_after = n_ + m_;
    std::size_t pivots = 0;
    for (;;) {
      compute_potentials();
      const bool bland = degenerate_streak > bland_after;
      const auto entering = price(bland);
      if (!entering) break;
      if (pivots >= budget) {
        throw SolverError("transport simplex exceeded pivot budget after " +
                              std::to_string(pivots) + " pivots",
                          pivots);
      }
      const double theta = pivot(entering->first, entering->second);
      ++pivots;
      degenerate_streak = theta > 0.0 ? 0 : degenerate_streak + 1;
    }

    TransportSolution sol;
    sol.pivots = pivots;
    for (const auto& c : cells_) {
      if (c.flow > 0.0) sol.flows.push_back({c.row, c.col, c.flow});
    }
    std::sort(sol.flows.begin(), sol.flows.end(), [](const auto& a, const auto& b) {
      return std::pair(a.row, a.col) < std::pair(b.row, b.col);
    });
    for (const auto& f : sol.flows) sol.cost += f.mass * cost_(f.row, f.col);
    sol.row_potential = u_;
    sol.col_potential = v_;
    return sol;
  }

 private:
  struct Cell {
    std::uint32_t row;
    std::uint32_t col;
    double flow;
  };

  std::size_t col_node(std::size_t j) const { return n_ + j; }

  void add_cell(std::size_t i, std::size_t j, double flow) {
    const int id = static_cast<int>(cells_.size());
    cells_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), flow});
    adj_[i].push_back(id);
    adj_[col_node(j)].push_back(id);
  }

  // Exactly one index advances per step, so the start basis is a spanning
  // tree with n + m - 1 cells (degenerate zero cells included).
  void north_west_corner(std::span<const double> supply, std::span<const double> demand) {
    std::vector<double> s(supply.begin(), supply.end());
    std::vector<double> d(demand.begin(), demand.end());
    std::size_t i = 0;
    std::size_t j = 0;
    cells_.reserve(n_ + m_ - 1);
    for (;;) {
      const double x = std::max(0.0, std::min(s[i], d[j]));
      add_cell(i, j, x);
      s[i] -= x;
      d[j] -= x;
      if (i + 1 == n_ && j + 1 == m_) break;
      if (i + 1 == n_) {
        ++j;
      } else if (j + 1 == m_) {
        ++i;
      } else if (s[i] <= d[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  int other_node(const Cell& c, std::size_t node) const {
    return node < n_ ? static_cast<int>(col_node(c.col)) : static_cast<int>(c.row);
  }

  // Breadth-first traversal of the basis tree from `root`, recording the
  // parent cell of each node in parent_cell_ and the visiting order in order_.
  void traverse(std::size_t root) {
    std::fill(visited_.begin(), visited_.end(), 0);
    order_.clear();
    order_.push_back(root);
    visited_[root] = 1;
    parent_cell_[root] = -1;
    for (std::size_t head = 0; head < order_.size(); ++head) {
      const std::size_t node = order_[head];
      for (int id : adj_[node]) {
        const auto next = static_cast<std::size_t>(other_node(cells_[id], node));
        if (visited_[next]) continue;
        visited_[next] = 1;
        parent_cell_[next] = id;
        order_.push_back(next);
      }
    }
  }

  void compute_potentials() {
    traverse(0);
    u_[0] = 0.0;
    for (std::size_t k = 1; k < order_.size(); ++k) {
      const std::size_t node = order_[k];
      const Cell& c = cells_[parent_cell_[node]];
      const double cij = cost_(c.row, c.col);
      if (node < n_) {
        u_[node] = cij - v_[c.col];
      } else {
        v_[node - n_] = cij - u_[c.row];
      }
    }
  }

  // Dantzig pricing (most negative reduced cost, lowest index on ties), or
  // Bland's first-eligible rule after a long run of degenerate pivots.
  std::optional<std::pair<std::size_t, std::size_t>> price(bool bland) const {
    double best = -tol_;
    std::optional<std::pair<std::size_t, std::size_t>> pick;
    for (std::size_t i = 0; i < n_; ++i) {
      const double ui = u_[i];
      for (std::size_t j = 0; j < m_; ++j) {
        const double rc = cost_(i, j) - ui - v_[j];
        if (rc < best) {
          if (bland) return std::pair(i, j);
          best = rc;
          pick = std::pair(i, j);
        }
      }
    }
    return pick;
  }

  double pivot(std::size_t i, std::size_t j) {
    // Path in the tree from column j back to row i closes the cycle.
    traverse(i);
    std::vector<int> path;
    for (std::size_t node = col_node(j); node != i;) {
      const int id = parent_cell_[node];
      path.push_back(id);
      node = static_cast<std::size_t>(other_node(cells_[id], node));
    }
    // Cells at even positions of `path` lose flow.
    constexpr double kTie = 1e-14;
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < path.size(); k += 2) theta = std::min(theta, cells_[path[k]].flow);
    int leaving = -1;
    std::size_t leaving_key = std::numeric_limits<std::size_t>::max();
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const Cell& c = cells_[path[k]];
      if (c.flow <= theta + kTie) {
        const std::size_t key = static_cast<std::size_t>(c.row) * m_ + c.col;
        if (key < leaving_key) {
          leaving_key = key;
          leaving = path[k];
        }
      }
    }
    theta = std::max(0.0, cells_[leaving].flow);
    for (std::size_t k = 0; k < path.size(); ++k) {
      Cell& c = cells_[path[k]];
      if (k % 2 == 0) {
        c.flow = std::max(0.0, c.flow - theta);
      } else {
        c.flow += theta;
      }
    }
    // Replace the leaving cell by the entering one in place.
    Cell& out = cells_[leaving];
    auto unlink = [&](std::size_t node) {
      auto& a = adj_[node];
      a.erase(std::find(a.begin(), a.end(), leaving));
    };
    unlink(out.row);
    unlink(col_node(out.col));
    out = {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), theta};
    adj_[i].push_back(leaving);
    adj_[col_node(j)].push_back(leaving);
    return theta;
  }

  std::size_t n_;
  std::size_t m_;
  const CostMatrix& cost_;
  TransportOptions opts_;
  double cmax_ = 0.0;
  double tol_ = 0.0;
  std::vector<Cell> cells_;
  std::vector<std::vector<int>> adj_;
  std::vector<double> u_;
  std::vector<double> v_;
  std::vector<int> parent_cell_;
  std::vector<char> visited_;
  std::vector<std::size_t> order_;
};

}  // namespace detail

/**
 * @brief Solves min <c, pi> over couplings of `supply` and `demand`.
 *
 * Both mass vectors must be nonnegative with equal totals (within 1e-9
 * relative). Repeated source positions are allowed; the solver only sees the
 * cost matrix. Throws SolverError when the pivot budget is exhausted.
 */
inline TransportSolution solve_transport(std::span<const double> supply,
                                         std::span<const double> demand, const CostMatrix& cost,
                                         const TransportOptions& opts = {}) {
  if (supply.empty() || demand.empty()) throw InvalidArgument("empty transport problem");
  if (cost.rows() != supply.size() || cost.cols() != demand.size()) {
    throw DimensionMismatch("cost matrix shape does not match marginals");
  }
  double s = 0.0;
  double d = 0.0;
  for (double x : supply) {
    if (!(x >= 0.0)) throw InvalidArgument("negative supply");
    s += x;
  }
  for (double x : demand) {
    if (!(x >= 0.0)) throw InvalidArgument("negative demand");
    d += x;
  }
  if (std::abs(s - d) > 1e-9 * std::max(1.0, std::max(s, d))) {
    throw InvalidArgument("unbalanced transport problem");
  }
  for (double c : cost.data()) {
    if (!std::isfinite(c)) throw InvalidArgument("non-finite transport cost");
  }
  return detail::TransportSimplex(supply, demand, cost, opts).run();
}

/// Source/target pair with the squared Euclidean cost between their supports.
struct TransportProblem {
  DiscreteMeasure source;
  DiscreteMeasure target;
  CostMatrix cost;
};

inline TransportProblem build_cost_matrix(const DiscreteMeasure& source,
                                          const DiscreteMeasure& target) {
  if (source.dim() != target.dim()) {
    throw DimensionMismatch("cannot couple measures of dimension " +
                            std::to_string(source.dim()) + " and " +
                            std::to_string(target.dim()));
  }
  return {source, target, squared_euclidean_costs(source.points(), target.points(), source.dim())};
}

struct Ot2Result {
  Coupling coupling;
  double cost = 0.0;
  std::vector<double> row_potential;
  std::vector<double> col_potential;
  std::size_t pivots = 0;
};

inline Ot2Result solve_ot2(const TransportProblem& problem, const TransportOptions& opts = {}) {
  auto sol = solve_transport(problem.source.weights(), problem.target.weights(), problem.cost, opts);
  std::vector<MultiMarginalPlan::Index> tuples;
  std::vector<double> masses;
  tuples.reserve(2 * sol.flows.size());
  masses.reserve(sol.flows.size());
  for (const auto& f : sol.flows) {
    tuples.push_back(f.row);
    tuples.push_back(f.col);
    masses.push_back(f.mass);
  }
  return {Coupling(problem.source, problem.target, std::move(tuples), std::move(masses)), sol.cost,
          std::move(sol.row_potential), std::move(sol.col_potential), sol.pivots};
}

/// W_2^2(mu, nu).
inline double w2_squared(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.same_storage(nu)) return 0.0;
  return solve_ot2(build_cost_matrix(mu, nu)).cost;
}

/**
 * @brief Memo table for W_2^2 keyed by measure content hash.
 *
 * Safe for concurrent use. Lookups are symmetric in the two arguments and a
 * hit is confirmed by comparing the stored measures, not only their hashes.
 */
class W2Cache {
 public:
  double get(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    if (a == b) return 0.0;
    const bool swap = std::pair(b.content_hash(), b.size()) < std::pair(a.content_hash(), a.size());
    const DiscreteMeasure& x = swap ? b : a;
    const DiscreteMeasure& y = swap ? a : b;
    const Key key{x.content_hash(), y.content_hash()};
    {
      std::lock_guard lock(mutex_);
      auto [lo, hi] = table_.equal_range(key);
      for (auto it = lo; it != hi; ++it) {
        if (it->second.first == x && it->second.second.first == y) {
          ++hits_;
          return it->second.second.second;
        }
      }
    }
    const double value = w2_squared(x, y);
    std::lock_guard lock(mutex_);
    table_.emplace(key, std::pair(x, std::pair(y, value)));
    return value;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return table_.size();
  }
  std::size_t hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
  }

 private:
  using Key = std::pair<std::uint64_t, std::uint64_t>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      return static_cast<std::size_t>(k.first ^ (k.second * 0x9e3779b97f4a7c15ULL));
    }
  };
  mutable std::mutex mutex_;
  std::unordered_multimap<Key, std::pair<DiscreteMeasure, std::pair<DiscreteMeasure, double>>,
                          KeyHash>
      table_;
  std::size_t hits_ = 0;
};

}  // namespace motbary
