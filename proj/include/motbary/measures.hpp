#pragma once

// Discrete measures, barycentric weights and sparse multi-marginal plans.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "motbary/error.hpp"

namespace motbary {

/// Absolute tolerance for every marginal / total-mass feasibility comparison.
inline constexpr double kMassTolerance = 1e-9;
/// Normalized atoms lighter than this are removed from a measure.
inline constexpr double kDropThreshold = 1e-15;

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t bytes,
                           std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

/**
 * @brief Weighted point cloud sum_j w_j delta(x_j) in R^d.
 *
 * Immutable; copies share the underlying storage. Construction merges
 * exactly-equal points (first occurrence keeps its position), strips
 * negligible atoms and renormalizes to unit mass. The original total mass is
 * kept in normalization_factor().
 */
class DiscreteMeasure {
 public:
  DiscreteMeasure(std::size_t dim, std::vector<double> points,
                  std::vector<double> weights) {
    if (dim == 0) throw InvalidArgument("measure dimension must be positive");
    if (points.size() != weights.size() * dim) {
      throw DimensionMismatch("measure has " + std::to_string(points.size()) +
                              " coordinates for " +
                              std::to_string(weights.size()) + " atoms of dim " +
                              std::to_string(dim));
    }
    for (double v : points) {
      if (!std::isfinite(v)) throw InvalidArgument("non-finite coordinate");
    }
    for (double w : weights) {
      if (!std::isfinite(w) || w < 0.0) {
        throw InvalidArgument("measure weights must be finite and nonnegative");
      }
    }

    // Merge duplicates, keeping first-occurrence order.
    std::map<std::vector<double>, std::size_t> seen;
    std::vector<double> merged_pts;
    std::vector<double> merged_w;
    for (std::size_t j = 0; j < weights.size(); ++j) {
      if (weights[j] == 0.0) continue;
      std::vector<double> key(points.begin() + j * dim,
                              points.begin() + (j + 1) * dim);
      auto [it, inserted] = seen.emplace(std::move(key), merged_w.size());
      if (inserted) {
        merged_pts.insert(merged_pts.end(), it->first.begin(), it->first.end());
        merged_w.push_back(weights[j]);
      } else {
        merged_w[it->second] += weights[j];
      }
    }

    double total = std::accumulate(merged_w.begin(), merged_w.end(), 0.0);
    if (!(total > 0.0)) throw InvalidArgument("measure has zero total mass");
    const double factor = total;
    normalize(merged_w, total);

    std::vector<double> pts;
    std::vector<double> w;
    pts.reserve(merged_pts.size());
    w.reserve(merged_w.size());
    for (std::size_t j = 0; j < merged_w.size(); ++j) {
      if (merged_w[j] < kDropThreshold) continue;
      pts.insert(pts.end(), merged_pts.begin() + j * dim,
                 merged_pts.begin() + (j + 1) * dim);
      w.push_back(merged_w[j]);
    }
    if (w.empty()) throw InvalidArgument("measure has zero total mass");
    if (w.size() != merged_w.size()) {
      normalize(w, std::accumulate(w.begin(), w.end(), 0.0));
    }

    auto data = std::make_shared<Data>();
    data->dim = dim;
    data->points = std::move(pts);
    data->weights = std::move(w);
    data->normalization_factor = factor;
    std::uint64_t h = detail::fnv1a(&dim, sizeof dim);
    h = detail::fnv1a(data->points.data(), data->points.size() * sizeof(double), h);
    h = detail::fnv1a(data->weights.data(), data->weights.size() * sizeof(double), h);
    data->hash = h;
    data_ = std::move(data);
  }

  /// Builds a measure from a list of equal-length points.
  static DiscreteMeasure from_points(const std::vector<std::vector<double>>& points,
                                     std::vector<double> weights) {
    if (points.empty()) throw InvalidArgument("measure needs at least one point");
    const std::size_t dim = points.front().size();
    std::vector<double> flat;
    flat.reserve(points.size() * dim);
    for (const auto& p : points) {
      if (p.size() != dim) throw DimensionMismatch("points of differing dimension");
      flat.insert(flat.end(), p.begin(), p.end());
    }
    return DiscreteMeasure(dim, std::move(flat), std::move(weights));
  }

  /// Uniform weights on the given points.
  static DiscreteMeasure uniform(const std::vector<std::vector<double>>& points) {
    return from_points(points, std::vector<double>(points.size(), 1.0));
  }

  static DiscreteMeasure dirac(std::vector<double> point) {
    const std::size_t dim = point.size();
    return DiscreteMeasure(dim, std::move(point), {1.0});
  }

  std::size_t dim() const noexcept { return data_->dim; }
  std::size_t size() const noexcept { return data_->weights.size(); }

  std::span<const double> point(std::size_t j) const {
    return {data_->points.data() + j * data_->dim, data_->dim};
  }
  double weight(std::size_t j) const { return data_->weights[j]; }

  /// Row-major coordinates, size() * dim() entries.
  std::span<const double> points() const noexcept { return data_->points; }
  std::span<const double> weights() const noexcept { return data_->weights; }

  /// Total mass of the input before renormalization.
  double normalization_factor() const noexcept { return data_->normalization_factor; }

  std::uint64_t content_hash() const noexcept { return data_->hash; }

  bool same_storage(const DiscreteMeasure& other) const noexcept {
    return data_ == other.data_;
  }

  friend bool operator==(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    if (a.data_ == b.data_) return true;
    return a.dim() == b.dim() && a.data_->weights == b.data_->weights &&
           a.data_->points == b.data_->points;
  }

 private:
  struct Data {
    std::size_t dim = 0;
    std::vector<double> points;
    std::vector<double> weights;
    double normalization_factor = 1.0;
    std::uint64_t hash = 0;
  };

  // Already-normalized input is left bit-identical so that construction is
  // idempotent.
  static void normalize(std::vector<double>& w, double total) {
    if (std::abs(total - 1.0) <= 1e-13) return;
    for (double& x : w) x /= total;
  }

  std::shared_ptr<const Data> data_;
};

/// Barycentric weights lambda in the open simplex.
class SimplexWeights {
 public:
  explicit SimplexWeights(std::vector<double> lambda) : lambda_(std::move(lambda)) {
    if (lambda_.empty()) throw InvalidArgument("weights must be non-empty");
    double sum = 0.0;
    for (double l : lambda_) {
      if (!std::isfinite(l) || l <= 0.0 || l >= 1.0 + 1e-12) {
        throw InvalidArgument("weights must lie in the open simplex, got " +
                              std::to_string(l));
      }
      sum += l;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw InvalidArgument("weights must sum to 1, sum is " + std::to_string(sum));
    }
  }

  static SimplexWeights uniform(std::size_t n) {
    if (n == 0) throw InvalidArgument("weights must be non-empty");
    return SimplexWeights(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  /// Divides by the sum; every entry must be positive.
  static SimplexWeights normalized(std::vector<double> raw) {
    double sum = 0.0;
    for (double l : raw) {
      if (!std::isfinite(l) || l <= 0.0) {
        throw InvalidArgument("weights must be positive");
      }
      sum += l;
    }
    for (double& l : raw) l /= sum;
    return SimplexWeights(std::move(raw));
  }

  /// Raises every entry to at least `floor` and renormalizes. Used for grid
  /// corners that sit on the simplex boundary.
  static SimplexWeights clamped(std::vector<double> raw, double floor = 1e-6) {
    for (double& l : raw) {
      if (!std::isfinite(l) || l < 0.0) throw InvalidArgument("weights must be nonnegative");
      l = std::max(l, floor);
    }
    return normalized(std::move(raw));
  }

  std::size_t size() const noexcept { return lambda_.size(); }
  double operator[](std::size_t i) const { return lambda_[i]; }
  std::span<const double> values() const noexcept { return lambda_; }

  /// lambda_i / sum_{j<r} lambda_j for 0-based i < r.
  double prefix_weight(std::size_t i, std::size_t r) const {
    if (r == 0 || r > lambda_.size() || i >= r) {
      throw InvalidArgument("prefix_weight index out of range");
    }
    double s = 0.0;
    for (std::size_t j = 0; j < r; ++j) s += lambda_[j];
    return lambda_[i] / s;
  }

  /// The renormalized weights of the first r entries.
  SimplexWeights prefix(std::size_t r) const {
    if (r == 0 || r > lambda_.size()) throw InvalidArgument("prefix length out of range");
    double s = 0.0;
    for (std::size_t j = 0; j < r; ++j) s += lambda_[j];
    std::vector<double> out(lambda_.begin(), lambda_.begin() + static_cast<std::ptrdiff_t>(r));
    if (r == lambda_.size()) return SimplexWeights(out);
    for (double& l : out) l /= s;
    return SimplexWeights(std::move(out));
  }

  bool is_uniform(double tol = 1e-12) const {
    const double u = 1.0 / static_cast<double>(lambda_.size());
    return std::all_of(lambda_.begin(), lambda_.end(),
                       [&](double l) { return std::abs(l - u) <= tol; });
  }

  bool is_descending() const {
    return std::is_sorted(lambda_.begin(), lambda_.end(), std::greater<>());
  }

  /// Index of the largest weight, lowest index on ties.
  std::size_t argmax() const {
    return static_cast<std::size_t>(
        std::max_element(lambda_.begin(), lambda_.end()) - lambda_.begin());
  }

  friend bool operator==(const SimplexWeights&, const SimplexWeights&) = default;

 private:
  std::vector<double> lambda_;
};

/**
 * @brief Sparse joint measure sum_j pi_j delta(x_{1,j}, ..., x_{N,j}).
 *
 * Atoms are stored as index tuples into the N marginal measures. The
 * constructor merges repeated tuples, drops zero-mass atoms and sorts atoms
 * lexicographically by tuple, so two plans with the same atoms compare equal.
 * Marginal feasibility is not enforced here; see validate_plan().
 */
class MultiMarginalPlan {
 public:
  using Index = std::uint32_t;

  MultiMarginalPlan(std::vector<DiscreteMeasure> measures, std::vector<Index> tuples,
                    std::vector<double> masses)
      : measures_(std::move(measures)) {
    const std::size_t n = measures_.size();
    if (n == 0) throw InvalidArgument("plan needs at least one marginal");
    if (tuples.size() != masses.size() * n) {
      throw InvalidArgument("plan tuple storage does not match atom count");
    }
    for (std::size_t i = 1; i < n; ++i) {
      if (measures_[i].dim() != measures_[0].dim()) {
        throw DimensionMismatch("plan marginals have differing dimensions");
      }
    }
    std::vector<std::size_t> order;
    order.reserve(masses.size());
    for (std::size_t a = 0; a < masses.size(); ++a) {
      if (!std::isfinite(masses[a]) || masses[a] < 0.0) {
        throw InvalidArgument("plan masses must be finite and nonnegative");
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (tuples[a * n + i] >= measures_[i].size()) {
          throw InvalidArgument("plan atom index " + std::to_string(tuples[a * n + i]) +
                                " out of range for marginal " + std::to_string(i));
        }
      }
      if (masses[a] > 0.0) order.push_back(a);
    }
    auto less = [&](std::size_t a, std::size_t b) {
      return std::lexicographical_compare(tuples.begin() + a * n, tuples.begin() + (a + 1) * n,
                                          tuples.begin() + b * n, tuples.begin() + (b + 1) * n);
    };
    std::stable_sort(order.begin(), order.end(), less);
    for (std::size_t a : order) {
      const bool repeat =
          !masses_.empty() &&
          std::equal(tuples.begin() + a * n, tuples.begin() + (a + 1) * n, tuples_.end() - n);
      if (repeat) {
        masses_.back() += masses[a];
      } else {
        tuples_.insert(tuples_.end(), tuples.begin() + a * n, tuples.begin() + (a + 1) * n);
        masses_.push_back(masses[a]);
      }
    }
  }

  std::size_t num_marginals() const noexcept { return measures_.size(); }
  /// Number of atoms (support size).
  std::size_t size() const noexcept { return masses_.size(); }
  bool empty() const noexcept { return masses_.empty(); }

  std::span<const Index> tuple(std::size_t atom) const {
    return {tuples_.data() + atom * num_marginals(), num_marginals()};
  }
  Index index(std::size_t atom, std::size_t marginal) const {
    return tuples_[atom * num_marginals() + marginal];
  }
  double mass(std::size_t atom) const { return masses_[atom]; }
  std::span<const double> masses() const noexcept { return masses_; }
  std::span<const Index> tuples() const noexcept { return tuples_; }

  const std::vector<DiscreteMeasure>& measures() const noexcept { return measures_; }
  const DiscreteMeasure& measure(std::size_t i) const { return measures_[i]; }
  std::size_t dim() const noexcept { return measures_.front().dim(); }

  /// Coordinates of marginal `marginal` of atom `atom`.
  std::span<const double> point(std::size_t atom, std::size_t marginal) const {
    return measures_[marginal].point(index(atom, marginal));
  }

  friend bool operator==(const MultiMarginalPlan& a, const MultiMarginalPlan& b) {
    return a.measures_ == b.measures_ && a.tuples_ == b.tuples_ && a.masses_ == b.masses_;
  }

 private:
  std::vector<DiscreteMeasure> measures_;
  std::vector<Index> tuples_;
  std::vector<double> masses_;
};

/// Two-marginal plan, e.g. the vertex solution of a transport problem.
class Coupling : public MultiMarginalPlan {
 public:
  explicit Coupling(MultiMarginalPlan plan) : MultiMarginalPlan(std::move(plan)) {
    if (num_marginals() != 2) {
      throw InvalidArgument("a coupling has exactly two marginals");
    }
  }

  Coupling(DiscreteMeasure source, DiscreteMeasure target, std::vector<Index> tuples,
           std::vector<double> masses)
      : Coupling(MultiMarginalPlan({std::move(source), std::move(target)}, std::move(tuples),
                                   std::move(masses))) {}

  const DiscreteMeasure& source() const { return measure(0); }
  const DiscreteMeasure& target() const { return measure(1); }
};

/// Upper bound sum n_i - N + 1 on the support of a vertex plan.
inline std::size_t sparsity_bound(std::span<const DiscreteMeasure> measures) {
  std::size_t total = 0;
  for (const auto& m : measures) total += m.size();
  return total - measures.size() + 1;
}

inline std::size_t sparsity_bound(const MultiMarginalPlan& plan) {
  return sparsity_bound(std::span<const DiscreteMeasure>(plan.measures()));
}

inline bool satisfies_sparsity(const MultiMarginalPlan& plan) {
  return plan.size() <= sparsity_bound(plan);
}

/// Pushes the plan forward under the coordinate projection onto `marginals`
/// (0-based, pairwise distinct). Coinciding projected tuples are merged.
inline MultiMarginalPlan marginal_projection(const MultiMarginalPlan& plan,
                                             std::span<const std::size_t> marginals) {
  const std::size_t n = plan.num_marginals();
  if (marginals.empty()) throw InvalidArgument("projection needs at least one marginal");
  std::vector<bool> used(n, false);
  std::vector<DiscreteMeasure> selected;
  for (std::size_t i : marginals) {
    if (i >= n) {
      throw InvalidArgument("projection index " + std::to_string(i) + " out of range");
    }
    if (used[i]) throw InvalidArgument("duplicate projection index " + std::to_string(i));
    used[i] = true;
    selected.push_back(plan.measure(i));
  }
  std::vector<MultiMarginalPlan::Index> tuples;
  tuples.reserve(plan.size() * marginals.size());
  for (std::size_t a = 0; a < plan.size(); ++a) {
    for (std::size_t i : marginals) tuples.push_back(plan.index(a, i));
  }
  return MultiMarginalPlan(std::move(selected), std::move(tuples),
                           std::vector<double>(plan.masses().begin(), plan.masses().end()));
}

inline MultiMarginalPlan marginal_projection(const MultiMarginalPlan& plan,
                                             std::initializer_list<std::size_t> marginals) {
  return marginal_projection(plan, std::span<const std::size_t>(marginals.begin(), marginals.size()));
}

/// Weighted mean m = sum_i lambda_i x_{i} of one atom's coordinates.
inline void atom_mean(const MultiMarginalPlan& plan, std::size_t atom,
                      std::span<const double> lambda, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < plan.num_marginals(); ++i) {
    const auto x = plan.point(atom, i);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += lambda[i] * x[k];
  }
}

/// (M_lambda)_# pi = sum_j pi_j delta(m_j). Atoms whose means coincide exactly
/// are merged; no tolerance is applied.
inline DiscreteMeasure pushforward_mean(const MultiMarginalPlan& plan,
                                        const SimplexWeights& weights) {
  if (weights.size() != plan.num_marginals()) {
    throw InvalidArgument("weight vector has length " + std::to_string(weights.size()) +
                          " but plan has " + std::to_string(plan.num_marginals()) +
                          " marginals");
  }
  if (plan.empty()) throw InvalidArgument("cannot push forward an empty plan");
  const std::size_t d = plan.dim();
  std::vector<double> pts(plan.size() * d);
  for (std::size_t a = 0; a < plan.size(); ++a) {
    atom_mean(plan, a, weights.values(), std::span<double>(pts.data() + a * d, d));
  }
  return DiscreteMeasure(d, std::move(pts),
                         std::vector<double>(plan.masses().begin(), plan.masses().end()));
}

/// Result of checking membership in Pi(mu^1, ..., mu^N).
struct PlanDiagnostics {
  std::vector<double> marginal_discrepancy;  ///< max per-atom error, per marginal
  double max_marginal_discrepancy = 0.0;
  double total_mass_error = 0.0;
  std::size_t duplicate_tuples = 0;
  std::size_t atoms = 0;
  bool feasible = false;
};

inline PlanDiagnostics validate_plan(const MultiMarginalPlan& plan) {
  PlanDiagnostics diag;
  const std::size_t n = plan.num_marginals();
  diag.atoms = plan.size();
  double total = 0.0;
  for (double m : plan.masses()) total += m;
  diag.total_mass_error = std::abs(total - 1.0);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& mu = plan.measure(i);
    std::vector<double> proj(mu.size(), 0.0);
    for (std::size_t a = 0; a < plan.size(); ++a) proj[plan.index(a, i)] += plan.mass(a);
    double worst = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      worst = std::max(worst, std::abs(proj[j] - mu.weight(j)));
    }
    diag.marginal_discrepancy.push_back(worst);
    diag.max_marginal_discrepancy = std::max(diag.max_marginal_discrepancy, worst);
  }
  for (std::size_t a = 1; a < plan.size(); ++a) {
    const auto prev = plan.tuple(a - 1);
    const auto cur = plan.tuple(a);
    if (std::equal(prev.begin(), prev.end(), cur.begin())) ++diag.duplicate_tuples;
  }
  diag.feasible = diag.max_marginal_discrepancy <= kMassTolerance &&
                  diag.total_mass_error <= kMassTolerance && diag.duplicate_tuples == 0;
  return diag;
}

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double t = x[k] - y[k];
    s += t * t;
  }
  return s;
}

}  // namespace motbary
