#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "helpers.hpp"
#include "motbary/analysis.hpp"
#include "motbary/instance_gen.hpp"
#include "motbary/mot_approx.hpp"

using namespace motbary;
using namespace testing_support;

namespace {

std::vector<DiscreteMeasure> transform(const std::vector<DiscreteMeasure>& ms, double scale,
                                       std::span<const double> shift) {
  std::vector<DiscreteMeasure> out;
  for (const auto& m : ms) {
    std::vector<double> p(m.points().begin(), m.points().end());
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = scale * p[k] + shift[k % m.dim()];
    out.emplace_back(m.dim(), std::move(p), std::vector<double>(m.weights().begin(), m.weights().end()));
  }
  return out;
}

MultiMarginalPlan rebase(const MultiMarginalPlan& p, const std::vector<DiscreteMeasure>& ms) {
  return MultiMarginalPlan(ms, std::vector<MultiMarginalPlan::Index>(p.tuples().begin(), p.tuples().end()),
                           std::vector<double>(p.masses().begin(), p.masses().end()));
}

}  // namespace

TEST(PhiCost, WorkedExample) {
  SmallExample ex;
  EXPECT_NEAR(phi_cost(ex.optimal(), ex.weights), 2.0 / 9.0, 1e-15);
  EXPECT_NEAR(phi_cost(ex.crossed(), ex.weights), 8.0 / 9.0, 1e-15);
  EXPECT_NEAR(phi_cost_pairwise(ex.crossed(), ex.weights), 8.0 / 9.0, 1e-15);
}

TEST(PhiCost, DiagonalPlanCostsNothing) {
  std::mt19937_64 rng(51);
  auto m = random_measure(rng, 4, 3);
  MultiMarginalPlan p({m, m, m}, {0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3},
                      {m.weight(0), m.weight(1), m.weight(2), m.weight(3)});
  EXPECT_EQ(phi_cost_pairwise(p, SimplexWeights::uniform(3)), 0.0);
  EXPECT_NEAR(phi_cost(p, SimplexWeights::uniform(3)), 0.0, 1e-30);
  EXPECT_THROW(phi_cost(p, SimplexWeights::uniform(2)), InvalidArgument);
}

TEST(PhiCost, VarianceFormMatchesPairwiseForm) {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 4;
    auto ms = random_instance(rng, n, 1, 4, 1 + trial % 3);
    auto w = random_weights(rng, n);
    auto p = random_feasible_plan(rng, ms);
    ASSERT_TRUE(validate_plan(p).feasible);
    EXPECT_TRUE(rel_close(phi_cost(p, w), phi_cost_pairwise(p, w), 1e-10, 1e-15));
  }
}

TEST(PsiCost, WorkedExample) {
  SmallExample ex;
  auto nu_tilde = DiscreteMeasure::uniform({{4.0 / 3}, {5.0 / 3}});
  EXPECT_NEAR(psi_cost(nu_tilde, ex.measures, ex.weights), 6.0 / 9.0, 1e-12);
  auto planar = DiscreteMeasure::dirac({0.0, 0.0});
  EXPECT_THROW(psi_cost(planar, ex.measures, ex.weights), DimensionMismatch);
}

TEST(PsiCost, IdenticalMeasuresCostNothing) {
  std::mt19937_64 rng(53);
  auto m = random_measure(rng, 5, 2);
  std::vector<DiscreteMeasure> ms{m, m, m};
  EXPECT_NEAR(psi_cost(m, ms, SimplexWeights::uniform(3)), 0.0, 1e-15);
  EXPECT_NEAR(pairwise_lower_bound(ms, SimplexWeights::uniform(3)), 0.0, 1e-15);
}

TEST(PairwiseLowerBound, WorkedExampleIsTight) {
  SmallExample ex;
  EXPECT_NEAR(pairwise_lower_bound(ex.measures, ex.weights), 2.0 / 9.0, 1e-15);
}

TEST(PairwiseLowerBound, TwoMeasuresGiveTheOptimum) {
  std::mt19937_64 rng(54);
  for (int trial = 0; trial < 10; ++trial) {
    auto ms = random_instance(rng, 2, 1, 6, 2);
    auto w = random_weights(rng, 2);
    EXPECT_NEAR(pairwise_lower_bound(ms, w), w[0] * w[1] * w2_squared(ms[0], ms[1]), 1e-15);
    EXPECT_TRUE(rel_close(pairwise_lower_bound(ms, w), exact_mot_lp(ms, w).phi, 1e-9));
  }
}

TEST(PairwiseLowerBound, SandwichesTheReferencePlan) {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + trial % 3;
    auto ms = random_instance(rng, n, 2, 8, 2);
    auto w = random_weights(rng, n);
    const double ub = reference_upper_bound(ms, w);
    const double lb = pairwise_lower_bound(ms, w);
    EXPECT_GE(lb, w[0] * ub - 1e-12);
    EXPECT_LE(phi_cost(reference_algorithm(ms, w), w), ub + 1e-8);
  }
}

TEST(Baselines, BestInputIsTheHeaviestMeasure) {
  std::mt19937_64 rng(56);
  auto ms = random_instance(rng, 3, 2, 4, 2);
  SimplexWeights w({0.6, 0.2, 0.2});
  auto b = baseline_best_input(ms, w);
  EXPECT_TRUE(b.measure == ms[0]);
  EXPECT_NEAR(b.psi, psi_cost(ms[0], ms, w), 1e-15);
  SimplexWeights tie({0.2, 0.4, 0.4});
  EXPECT_TRUE(baseline_best_input(ms, tie).measure == ms[1]);
}

TEST(Baselines, MixtureOfTwoDiracs) {
  std::vector<DiscreteMeasure> ms{DiscreteMeasure::dirac({0.0}), DiscreteMeasure::dirac({2.0})};
  auto w = SimplexWeights::uniform(2);
  auto mix = baseline_mixture(ms, w);
  ASSERT_EQ(mix.measure.size(), 2u);
  EXPECT_NEAR(mix.psi, 2.0, 1e-15);
  const double opt = exact_barycenter(ms, w).psi;
  EXPECT_NEAR(opt, 1.0, 1e-15);
  EXPECT_LE(mix.psi / opt, 2.0 + 1e-6);
}

TEST(Baselines, IdenticalMeasures) {
  std::mt19937_64 rng(57);
  auto m = random_measure(rng, 4, 2);
  std::vector<DiscreteMeasure> ms{m, m};
  auto w = SimplexWeights::uniform(2);
  auto mix = baseline_mixture(ms, w);
  EXPECT_TRUE(mix.measure == m);
  EXPECT_NEAR(mix.psi, 0.0, 1e-15);
  EXPECT_NEAR(baseline_best_input(ms, w).psi, 0.0, 1e-15);
}

TEST(Baselines, RatiosAgainstTheOracle) {
  std::mt19937_64 rng(58);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + trial % 2;
    auto ms = random_instance(rng, n, 2, 4, 2);
    auto w = random_weights(rng, n);
    const double opt = exact_barycenter(ms, w).psi;
    auto best = baseline_best_input(ms, w);
    EXPECT_LE(best.psi, opt / w[w.argmax()] + 1e-6 * opt);
    EXPECT_LE(baseline_mixture(ms, w).psi, 2.0 * opt + 1e-6 * opt);
  }
}

TEST(Harmonic, MatchesExactRational) {
  // Exact H_N as a fraction over lcm(1..20), which fits in 64 bits.
  std::uint64_t lcm = 1;
  for (std::uint64_t i = 1; i <= 20; ++i) lcm = std::lcm(lcm, i);
  std::uint64_t num = 0;
  for (std::uint64_t n = 1; n <= 20; ++n) {
    num += lcm / n;
    EXPECT_NEAR(harmonic(n), static_cast<double>(num) / static_cast<double>(lcm), 1e-14);
  }
  EXPECT_EQ(harmonic(1), 1.0);
  EXPECT_EQ(harmonic(0), 0.0);
}

TEST(BoundConstants, ApplicableConstants) {
  auto b = bound_constants(SimplexWeights::uniform(4));
  EXPECT_DOUBLE_EQ(b.inverse_first_weight, 4.0);
  ASSERT_TRUE(b.greedy_sorted.has_value());
  EXPECT_DOUBLE_EQ(*b.greedy_sorted, 9.0);
  ASSERT_TRUE(b.randomized_greedy.has_value());
  EXPECT_DOUBLE_EQ(*b.randomized_greedy, 38.0 / 12.0);
  EXPECT_NEAR(b.greedy_lower_simple, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(b.greedy_lower, (4.0 - 25.0 / 12.0) / (M_PI * M_PI / 6.0 + 1.0), 1e-15);
  auto c = bound_constants(SimplexWeights({0.2, 0.5, 0.3}));
  EXPECT_FALSE(c.greedy_sorted.has_value());
  EXPECT_FALSE(c.randomized_greedy.has_value());
  EXPECT_DOUBLE_EQ(c.inverse_max_weight, 2.0);
  // The simple greedy bound sits below the sharper one.
  for (std::size_t n = 2; n <= 30; ++n) {
    auto d = bound_constants(SimplexWeights::uniform(n));
    EXPECT_LE(d.greedy_lower_simple, d.greedy_lower + 1e-12);
  }
}

TEST(CostRatio, ZeroOverZeroIsOne) {
  EXPECT_EQ(cost_ratio(0.0, 0.0), 1.0);
  EXPECT_TRUE(std::isinf(cost_ratio(1.0, 0.0)));
  EXPECT_DOUBLE_EQ(cost_ratio(3.0, 2.0), 1.5);
}

TEST(MakeReport, ExactPlanHasRatioOne) {
  std::mt19937_64 rng(59);
  auto ms = random_instance(rng, 3, 2, 4, 2);
  auto w = random_weights(rng, 3);
  auto plan = exact_mot_lp(ms, w).plan;
  auto r = make_report(plan, ms, w, {.use_oracle = true, .algorithm = Algorithm::oracle});
  ASSERT_TRUE(r.ratio_vs_exact.has_value());
  EXPECT_NEAR(*r.ratio_vs_exact, 1.0, 1e-9);
  EXPECT_LE(*r.ratio_vs_exact, r.ratio_vs_lb + 1e-9);
  EXPECT_TRUE(r.ok());
}

TEST(MakeReport, DegenerateInstanceUsesRatioOne) {
  std::mt19937_64 rng(60);
  auto m = random_measure(rng, 4, 2);
  std::vector<DiscreteMeasure> ms{m, m, m};
  auto w = SimplexWeights::uniform(3);
  auto r = make_report(greedy_algorithm(ms, w), ms, w, {.use_oracle = true, .algorithm = Algorithm::greedy});
  EXPECT_EQ(r.ratio_vs_lb, 1.0);
  EXPECT_EQ(*r.ratio_vs_exact, 1.0);
  EXPECT_TRUE(r.ok());
}

TEST(MakeReport, EllipseGreedyRatioIsFinite) {
  auto ms = gen_nested_ellipses(4, 16, 3);
  auto w = SimplexWeights::uniform(4);
  auto r = make_report(greedy_algorithm(ms, w), ms, w, {.algorithm = Algorithm::greedy});
  EXPECT_TRUE(std::isfinite(r.ratio_vs_lb));
  EXPECT_GE(r.ratio_vs_lb, 1.0);
  EXPECT_GE(r.phi, r.psi - 1e-8);
  EXPECT_TRUE(r.ok()) << r.violations.front();
}

TEST(MakeReport, FlagsInfeasiblePlans) {
  SmallExample ex;
  MultiMarginalPlan bad(ex.measures, {0, 0, 0, 1, 1, 1}, {0.6, 0.4});
  auto r = make_report(bad, ex.measures, ex.weights);
  EXPECT_FALSE(r.ok());
  EXPECT_THROW(make_report(bad, std::vector<DiscreteMeasure>(ex.measures.begin(), ex.measures.begin() + 2),
                           SimplexWeights::uniform(2)),
               InvalidArgument);
}

TEST(Invariance, TranslationAndScaling) {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto ms = random_instance(rng, 3, 2, 5, 2);
    auto w = random_weights(rng, 3);
    auto plan = random_feasible_plan(rng, ms);
    auto nu = pushforward_mean(plan, w);
    const double phi = phi_cost(plan, w), psi = psi_cost(nu, ms, w);
    const double shift[2] = {u(rng), u(rng)};
    const double s = 0.5 + std::abs(u(rng));
    auto moved = transform(ms, 1.0, shift);
    auto moved_plan = rebase(plan, moved);
    EXPECT_TRUE(rel_close(phi_cost(moved_plan, w), phi, 1e-9));
    EXPECT_TRUE(rel_close(psi_cost(pushforward_mean(moved_plan, w), moved, w), psi, 1e-9));
    const double zero[2] = {0.0, 0.0};
    auto scaled = transform(ms, s, zero);
    auto scaled_plan = rebase(plan, scaled);
    EXPECT_TRUE(rel_close(phi_cost(scaled_plan, w), s * s * phi, 1e-9));
    EXPECT_TRUE(rel_close(psi_cost(pushforward_mean(scaled_plan, w), scaled, w), s * s * psi, 1e-9));
  }
}

TEST(StructuralInequalities, MeanPushforwardAndVarianceIdentity) {
  std::mt19937_64 rng(62);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 4;
    auto ms = random_instance(rng, n, 1, 4, 1 + trial % 3);
    auto w = random_weights(rng, n);
    auto plan = random_feasible_plan(rng, ms);
    const double phi = phi_cost(plan, w);
    EXPECT_LE(psi_cost(pushforward_mean(plan, w), ms, w), phi + 1e-8);
    EXPECT_GE(phi, pairwise_lower_bound(ms, w) - 1e-9);

    const std::size_t d = ms[0].dim();
    std::vector<double> y(d), m(d, 0.0);
    for (double& v : y) v = u(rng);
    std::vector<std::vector<double>> xs(n, std::vector<double>(d));
    for (auto& x : xs)
      for (double& v : x) v = u(rng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) m[k] += w[i] * xs[i][k];
    double lhs = 0.0, spread = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lhs += w[i] * squared_distance(xs[i], y);
      spread += w[i] * squared_distance(xs[i], m);
    }
    const double resid = lhs - squared_distance(m, y) - spread;
    EXPECT_LE(std::abs(resid), 1e-10 * std::max(1.0, lhs));
  }
}
