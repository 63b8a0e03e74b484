#pragma once

// Deterministic instance generators: adversarial configurations on the circle,
// the planar example where neither algorithm dominates, nested ellipse images
// and seeded random point clouds.

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "motbary/error.hpp"
#include "motbary/image.hpp"
#include "motbary/measures.hpp"
#include "motbary/mot_approx.hpp"

namespace motbary {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Representative of x in [0, 2 pi).
inline double torus_wrap(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r;
}

/// Representative of x in (-pi, pi].
inline double torus_signed(double x) {
  const double r = torus_wrap(x);
  return r > std::numbers::pi ? r - kTwoPi : r;
}

/// Geodesic distance on the circle of circumference 2 pi.
inline double torus_distance(double x, double y) { return std::abs(torus_signed(x - y)); }

/// +1 on (0, pi], -1 on (pi, 2 pi] (so the sign of 0 is -1).
inline int torus_sign(double x) {
  const double r = torus_wrap(x);
  return r > 0.0 && r <= std::numbers::pi ? 1 : -1;
}

/// gamma -> (cos gamma, sin gamma), flattened.
inline std::vector<double> torus_embed(std::span<const double> angles) {
  std::vector<double> out;
  out.reserve(2 * angles.size());
  for (double g : angles) {
    out.push_back(std::cos(g));
    out.push_back(std::sin(g));
  }
  return out;
}

/// Phi of a plan over 1-D angle measures, with squared geodesic distance on
/// the circle as the ground cost.
inline double phi_cost_torus(const MultiMarginalPlan& plan, const SimplexWeights& weights) {
  if (plan.dim() != 1) throw DimensionMismatch("torus plans hold 1-D angles");
  if (weights.size() != plan.num_marginals()) throw InvalidArgument("weight/marginal count mismatch");
  double total = 0.0;
  for (std::size_t a = 0; a < plan.size(); ++a) {
    double c = 0.0;
    for (std::size_t s = 0; s < plan.num_marginals(); ++s)
      for (std::size_t t = s + 1; t < plan.num_marginals(); ++t) {
        const double g = torus_distance(plan.point(a, s)[0], plan.point(a, t)[0]);
        c += weights[s] * weights[t] * g * g;
      }
    total += plan.mass(a) * c;
  }
  return total;
}

struct TorusParams {
  std::size_t num_measures = 3;  ///< N
  std::size_t atoms = 128;       ///< M, atoms per measure
  double eps_tilde = 1e-4;       ///< offset shrink for the reference construction
  std::vector<double> eps_seq;   ///< per-measure tie breakers for the greedy construction
  bool embed = true;             ///< map angles to the unit circle in the plane
};

/// Default greedy tie breakers eps_i = 1e-5 / i, i = 1..N.
inline std::vector<double> default_eps_seq(std::size_t n) {
  std::vector<double> eps(n);
  for (std::size_t i = 0; i < n; ++i) eps[i] = 1e-5 / static_cast<double>(i + 1);
  return eps;
}

struct WorstCaseInstance {
  std::vector<DiscreteMeasure> measures;
  SimplexWeights weights;
  /// Explicit feasible plan whose Phi upper-bounds the optimum.
  MultiMarginalPlan competitor;
  /// Plan the attacked algorithm is expected to return.
  MultiMarginalPlan predicted;
  /// angles[i][j]: angle of atom j of measure i.
  std::vector<std::vector<double>> angles;
  bool embedded = true;
  /// Greedy construction only: angle of the partial mean of tuple 0 after
  /// each round, the gap between that mean and the next chosen point, and
  /// whether both inductive estimates held in every round.
  std::vector<double> partial_mean_angles;
  std::vector<double> choice_gaps;
  bool estimates_hold = true;
};

namespace detail {

inline DiscreteMeasure circle_measure(std::span<const double> angles, bool embed) {
  std::vector<double> w(angles.size(), 1.0);
  if (embed) return DiscreteMeasure(2, torus_embed(angles), std::move(w));
  std::vector<double> pts;
  for (double g : angles) pts.push_back(torus_wrap(g));
  return DiscreteMeasure(1, std::move(pts), std::move(w));
}

inline std::vector<double> regular_angles(double start, std::size_t m) {
  std::vector<double> out(m);
  for (std::size_t j = 0; j < m; ++j) out[j] = start + static_cast<double>(j) * kTwoPi / static_cast<double>(m);
  return out;
}

/// Plan (1/M) sum_j delta(j + shift_1, ..., j + shift_N) with indices mod M.
inline MultiMarginalPlan shifted_diagonal(const std::vector<DiscreteMeasure>& measures,
                                          std::span<const std::size_t> shift, std::size_t m) {
  std::vector<MultiMarginalPlan::Index> tuples;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < measures.size(); ++i)
      tuples.push_back(static_cast<MultiMarginalPlan::Index>((j + shift[i]) % m));
  return MultiMarginalPlan(measures, std::move(tuples), std::vector<double>(m, 1.0 / static_cast<double>(m)));
}

}  // namespace detail

/**
 * @brief Instance on which the reference algorithm is off by a factor close to N.
 *
 * Measure 1 sits at 0, even-numbered measures at +a and odd-numbered ones
 * (from the third on) at -a, a = (pi / M) / (1 + eps_tilde), each repeated
 * M times around the circle. The reference algorithm couples everything to
 * the nearest atom of measure 1, while the competitor shifts the odd ones by
 * one atom and pays much less.
 */
inline WorstCaseInstance gen_reference_worst_case(std::size_t n, std::size_t m, double eps_tilde,
                                                  bool embed = true) {
  if (n < 3) throw InvalidArgument("reference worst case needs N >= 3");
  if (m < 4) throw InvalidArgument("reference worst case needs M >= 4");
  if (!(eps_tilde > 0.0) || eps_tilde > 1e-2) {
    throw InvalidArgument("eps_tilde must lie in (0, 1e-2]");
  }
  const double a = (std::numbers::pi / static_cast<double>(m)) / (1.0 + eps_tilde);
  std::vector<std::vector<double>> angles;
  std::vector<DiscreteMeasure> measures;
  std::vector<std::size_t> diag(n, 0), shift(n, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    const double start = i == 1 ? 0.0 : (i % 2 == 0 ? a : -a);
    angles.push_back(detail::regular_angles(start, m));
    measures.push_back(detail::circle_measure(angles.back(), embed));
    if (i >= 3 && i % 2 == 1) shift[i - 1] = 1;
  }
  auto competitor = detail::shifted_diagonal(measures, shift, m);
  auto predicted = detail::shifted_diagonal(measures, diag, m);
  return {std::move(measures), SimplexWeights::uniform(n), std::move(competitor),
          std::move(predicted), std::move(angles), embed, {}, {}, true};
}

/**
 * @brief Instance on which the greedy algorithm is off by about N/4.
 *
 * Built one measure at a time: measure i is a regular M-gon rotated to sit
 * half a spacing away from the current partial mean of tuple 0, nudged by
 * eps_i so that the greedy step takes the wrong one of two nearly equal
 * choices. When embedded, the partial means come from actually running the
 * greedy rounds on the measures built so far.
 */
inline WorstCaseInstance gen_greedy_worst_case(std::size_t n, std::size_t m,
                                               std::vector<double> eps_seq = {}, bool embed = true) {
  if (n < 2) throw InvalidArgument("greedy worst case needs N >= 2");
  if (m < 2) throw InvalidArgument("greedy worst case needs M >= 2");
  if (eps_seq.empty()) eps_seq = default_eps_seq(n);
  if (eps_seq.size() != n) throw InvalidArgument("eps sequence must have length N");
  const double half = std::numbers::pi / static_cast<double>(m);
  for (double e : eps_seq) {
    if (!(e > 0.0) || e >= half / 2.0) throw InvalidArgument("eps values must lie in (0, pi / (2M))");
  }

  WorstCaseInstance out{{}, SimplexWeights::uniform(n), MultiMarginalPlan({DiscreteMeasure::dirac({0.0})}, {}, {}),
                        MultiMarginalPlan({DiscreteMeasure::dirac({0.0})}, {}, {}), {}, embed, {}, {}, true};
  // Torus mode follows the recursion exactly; shift[i] is the index offset
  // of the atom chosen for tuple 0 in round i (0 or M - 1).
  std::vector<std::size_t> shift(n, 0);
  double mean = 0.0;  // partial mean of tuple 0, as a real representative
  for (std::size_t i = 0; i < n; ++i) {
    double start = 0.0;
    if (i > 0) start = mean + half + torus_sign(mean) * eps_seq[i];
    out.angles.push_back(detail::regular_angles(start, m));
    out.measures.push_back(detail::circle_measure(out.angles.back(), embed));
    if (i == 0) {
      out.partial_mean_angles.push_back(0.0);
      continue;
    }
    double chosen = 0.0;
    double next_mean = 0.0;
    if (embed) {
      const std::span<const DiscreteMeasure> prefix(out.measures.data(), i + 1);
      GreedyState state(prefix, SimplexWeights::uniform(i + 1));
      state.run();
      const auto tup = state.partial_tuples();
      if (state.atoms() != m || tup[0] != 0) throw SolverError("greedy run broke the cyclic structure");
      const auto means = state.partial_means();
      chosen = out.angles[i][tup[i]];
      next_mean = std::atan2(means[1], means[0]);
      shift[i] = tup[i];
    } else {
      const bool forward = torus_sign(mean) == -1;
      chosen = forward ? start : start - 2.0 * half;
      shift[i] = forward ? 0 : m - 1;
      next_mean = (static_cast<double>(i) * mean + chosen) / static_cast<double>(i + 1);
    }
    const double gap = torus_distance(chosen, mean);
    out.choice_gaps.push_back(gap);
    if (gap < half - eps_seq[i] - 1e-12) out.estimates_hold = false;
    // Opposite sides: the chosen point never shares the sign of the mean.
    if (torus_sign(chosen) == torus_sign(mean)) out.estimates_hold = false;
    mean = torus_signed(next_mean);
    out.partial_mean_angles.push_back(mean);
    if (std::abs(mean) > half / static_cast<double>(i + 1) + 1e-12) out.estimates_hold = false;
  }
  std::vector<std::size_t> diag(n, 0);
  out.competitor = detail::shifted_diagonal(out.measures, diag, m);
  out.predicted = detail::shifted_diagonal(out.measures, shift, m);
  return out;
}

/// The planar example in which neither algorithm dominates the other.
struct NeitherBetterInstance {
  std::vector<std::vector<double>> points;  ///< x_1..x_6
  std::vector<DiscreteMeasure> nu;          ///< nu^1, nu^2, nu^3
  SimplexWeights weights = SimplexWeights::uniform(4);
  std::vector<DiscreteMeasure> order_a;  ///< (nu^1, nu^2, nu^2, nu^3), greedy wins
  std::vector<DiscreteMeasure> order_b;  ///< (nu^2, nu^1, nu^3, nu^2), reference wins
  MultiMarginalPlan optimal_a;           ///< pairs x_1..x_3 and x_4..x_6, in order a
  MultiMarginalPlan optimal_b;
};

inline NeitherBetterInstance gen_neither_better() {
  const double h = 5.0 / 8.0;
  std::vector<std::vector<double>> x{{-1.0, h}, {0.0, h}, {1.0, h}, {1.0, -h}, {0.0, -h}, {-1.0, -h}};
  std::vector<DiscreteMeasure> nu{DiscreteMeasure::uniform({x[0], x[3]}),
                                  DiscreteMeasure::uniform({x[1], x[4]}),
                                  DiscreteMeasure::uniform({x[2], x[5]})};
  std::vector<DiscreteMeasure> a{nu[0], nu[1], nu[1], nu[2]};
  std::vector<DiscreteMeasure> b{nu[1], nu[0], nu[2], nu[1]};
  MultiMarginalPlan opt_a(a, {0, 0, 0, 0, 1, 1, 1, 1}, {0.5, 0.5});
  MultiMarginalPlan opt_b(b, {0, 0, 0, 0, 1, 1, 1, 1}, {0.5, 0.5});
  return {std::move(x), std::move(nu), SimplexWeights::uniform(4), std::move(a),
          std::move(b), std::move(opt_a), std::move(opt_b)};
}

struct EllipseParams {
  double center_min = 0.35;
  double center_max = 0.65;
  double axis_min = 0.15;
  double axis_max = 0.35;
  double inner_scale = 0.5;  ///< inner ring axes relative to the outer ring
  double ring_width = 2.0;   ///< in pixels
};

/// Binary images of two nested elliptic rings each, on a resolution^2 grid.
inline std::vector<GrayImage> gen_nested_ellipse_images(std::size_t n, std::size_t resolution,
                                                        std::uint64_t seed,
                                                        const EllipseParams& p = {}) {
  if (n < 1) throw InvalidArgument("need at least one ellipse");
  if (resolution < 8) throw InvalidArgument("resolution must be at least 8 to rasterize a ring");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> center(p.center_min, p.center_max);
  std::uniform_real_distribution<double> axis(p.axis_min, p.axis_max);
  const double res = static_cast<double>(resolution);
  const double half_width = p.ring_width / (2.0 * res);
  std::vector<GrayImage> out;
  for (std::size_t k = 0; k < n; ++k) {
    const double cx = center(rng), cy = center(rng);
    const double ax = axis(rng), ay = axis(rng);
    GrayImage img(resolution, resolution);
    for (std::size_t r = 0; r < resolution; ++r)
      for (std::size_t c = 0; c < resolution; ++c) {
        const double x = static_cast<double>(c) / res - cx;
        const double y = static_cast<double>(r) / res - cy;
        for (double s : {1.0, p.inner_scale}) {
          const double a = ax * s, b = ay * s;
          const double rho = std::sqrt((x / a) * (x / a) + (y / b) * (y / b));
          // First-order distance to the ellipse boundary.
          const double grad = std::sqrt((x / (a * a)) * (x / (a * a)) + (y / (b * b)) * (y / (b * b)));
          const double dist = grad > 0.0 ? std::abs(rho * rho - 1.0) / (2.0 * grad) : std::min(a, b);
          if (dist <= half_width) img.at(r, c) = 255;
        }
      }
    bool any = false;
    for (auto v : img.pixels) any = any || v != 0;
    if (!any) throw InvalidArgument("resolution too small to rasterize the rings");
    out.push_back(std::move(img));
  }
  return out;
}

inline std::vector<DiscreteMeasure> gen_nested_ellipses(std::size_t n, std::size_t resolution,
                                                        std::uint64_t seed = 0,
                                                        const EllipseParams& p = {}) {
  std::vector<DiscreteMeasure> out;
  for (const auto& img : gen_nested_ellipse_images(n, resolution, seed, p)) {
    out.push_back(measure_from_image(img));
  }
  return out;
}

/// N measures of n atoms: uniform points in [0,1]^d, Dirichlet(1, ..., 1) weights.
inline std::vector<DiscreteMeasure> gen_random_clouds(std::size_t n, std::size_t atoms, std::size_t d,
                                                      std::uint64_t seed) {
  if (n < 1 || atoms < 1 || d < 1) throw InvalidArgument("counts must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::exponential_distribution<double> gamma1(1.0);
  std::vector<DiscreteMeasure> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> pts(atoms * d), w(atoms);
    for (double& x : pts) x = u(rng);
    for (double& x : w) x = gamma1(rng);
    out.emplace_back(d, std::move(pts), std::move(w));
  }
  return out;
}

}  // namespace motbary
