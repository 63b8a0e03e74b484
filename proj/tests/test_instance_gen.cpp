#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "motbary/analysis.hpp"
#include "motbary/instance_gen.hpp"

using namespace motbary;
using namespace testing_support;

TEST(TorusEmbed, Basics) {
  const double a0[] = {0.0};
  auto p = torus_embed(a0);
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(p[1], 0.0);
  const double a1[] = {0.0, std::numbers::pi};
  auto q = torus_embed(a1);
  EXPECT_NEAR(std::hypot(q[0] - q[2], q[1] - q[3]), 2.0, 1e-15);
}

TEST(TorusEmbed, ChordApproachesArc) {
  const double s = 1e-3;
  const double a[] = {0.0, s};
  auto p = torus_embed(a);
  const double ratio = std::hypot(p[0] - p[2], p[1] - p[3]) / s;
  EXPECT_GE(ratio, 1.0 - 1e-6);
  EXPECT_LE(ratio, 1.0 + 1e-15);
  EXPECT_NEAR(ratio, 2.0 * std::sin(s / 2.0) / s, 1e-12);
}

TEST(TorusHelpers, SignAndDistance) {
  EXPECT_EQ(torus_sign(0.0), -1);
  EXPECT_EQ(torus_sign(0.1), 1);
  EXPECT_EQ(torus_sign(std::numbers::pi), 1);
  EXPECT_EQ(torus_sign(-0.1), -1);
  EXPECT_EQ(torus_sign(2.0 * std::numbers::pi), -1);
  EXPECT_NEAR(torus_distance(0.1, 2.0 * std::numbers::pi - 0.1), 0.2, 1e-15);
}

TEST(ReferenceWorstCase, TorusCostsMatchClosedForms) {
  for (std::size_t n : {3u, 4u, 5u, 6u}) {
    const std::size_t m = 16;
    const double e = 1e-2;
    auto inst = gen_reference_worst_case(n, m, e, false);
    const double a = std::numbers::pi / m;
    const double nn = static_cast<double>(n);
    const double phi_pred = phi_cost_torus(inst.predicted, inst.weights);
    const double phi_comp = phi_cost_torus(inst.competitor, inst.weights);
    if (n % 2 == 1) {
      EXPECT_NEAR(phi_pred * nn * nn, a * a * nn * (nn - 1) / ((1 + e) * (1 + e)), 1e-12);
      EXPECT_GE(phi_pred / phi_comp, nn / ((1 + 2 * e) * (1 + 2 * e) + e * e * (nn - 1)) - 1e-12);
    } else {
      EXPECT_NEAR(phi_pred * nn * nn, a * a * (nn * (nn - 1) - 1) / ((1 + e) * (1 + e)), 1e-12);
      EXPECT_GE(phi_pred / phi_comp,
                (nn * (nn - 1) - 1) / ((nn - 1) * (1 + 2 * e) * (1 + 2 * e) + nn * (nn - 2) * e * e) - 1e-12);
    }
  }
}

TEST(ReferenceWorstCase, EmbeddedInstance) {
  auto inst = gen_reference_worst_case(3, 64, 1e-3);
  ASSERT_EQ(inst.measures.size(), 3u);
  EXPECT_TRUE(validate_plan(inst.competitor).feasible);
  EXPECT_TRUE(validate_plan(inst.predicted).feasible);
  auto plan = reference_algorithm(inst.measures, inst.weights);
  EXPECT_EQ(plan, inst.predicted);
  const double ratio = phi_cost(plan, inst.weights) / phi_cost(inst.competitor, inst.weights);
  EXPECT_GE(ratio, 2.9);
}

TEST(ReferenceWorstCase, CompetitorBoundsTheOracle) {
  auto inst = gen_reference_worst_case(3, 6, 1e-2);
  const double opt = exact_mot_lp(inst.measures, inst.weights).phi;
  EXPECT_LE(opt, phi_cost(inst.competitor, inst.weights) + 1e-9);
}

TEST(ReferenceWorstCase, ParameterChecks) {
  EXPECT_THROW(gen_reference_worst_case(2, 64, 1e-3), InvalidArgument);
  EXPECT_THROW(gen_reference_worst_case(3, 3, 1e-3), InvalidArgument);
  EXPECT_THROW(gen_reference_worst_case(3, 64, 0.1), InvalidArgument);
  EXPECT_THROW(gen_reference_worst_case(3, 64, 0.0), InvalidArgument);
}

TEST(GreedyWorstCase, TorusRecursionEstimates) {
  for (std::size_t n : {2u, 4u, 8u, 12u}) {
    auto inst = gen_greedy_worst_case(n, 128, {}, false);
    EXPECT_TRUE(inst.estimates_hold);
    for (std::size_t i = 1; i <= n; ++i) {
      EXPECT_LE(std::abs(inst.partial_mean_angles[i - 1]), std::numbers::pi / 128 / i + 1e-15);
    }
    EXPECT_TRUE(validate_plan(inst.predicted).feasible);
  }
}

TEST(GreedyWorstCase, EmbeddedRunMatchesGreedy) {
  for (std::size_t n : {2u, 4u, 8u}) {
    auto inst = gen_greedy_worst_case(n, 128);
    EXPECT_TRUE(inst.estimates_hold);
    auto plan = greedy_algorithm(inst.measures, inst.weights);
    EXPECT_EQ(plan, inst.predicted);
    const double ratio = phi_cost(plan, inst.weights) / phi_cost(inst.competitor, inst.weights);
    if (n == 2) {
      EXPECT_NEAR(phi_cost(plan, inst.weights), exact_mot_lp(inst.measures, inst.weights).phi, 1e-12);
    } else {
      EXPECT_GE(ratio, static_cast<double>(n) / 4.0 - 1.0 / 3.0 - 0.05);
    }
  }
}

TEST(GreedyWorstCase, TorusRatioApproachesTheBound) {
  for (std::size_t n : {4u, 8u}) {
    auto inst = gen_greedy_worst_case(n, 128, {}, false);
    const double ratio = phi_cost_torus(inst.predicted, inst.weights) /
                         phi_cost_torus(inst.competitor, inst.weights);
    const auto b = bound_constants(inst.weights);
    EXPECT_GE(ratio, b.greedy_lower - 0.01);
  }
}

TEST(GreedyWorstCase, ParameterChecks) {
  EXPECT_THROW(gen_greedy_worst_case(1, 128), InvalidArgument);
  EXPECT_THROW(gen_greedy_worst_case(4, 128, {1e-5, 1e-5}), InvalidArgument);
  EXPECT_THROW(gen_greedy_worst_case(2, 128, {1e-5, 0.1}), InvalidArgument);
  EXPECT_THROW(gen_greedy_worst_case(2, 128, {1e-5, -1e-5}), InvalidArgument);
}

TEST(NeitherBetter, Configuration) {
  auto inst = gen_neither_better();
  EXPECT_EQ(inst.points[3][0], -inst.points[0][0]);
  EXPECT_EQ(inst.points[3][1], -inst.points[0][1]);
  EXPECT_TRUE(validate_plan(inst.optimal_a).feasible);
  EXPECT_NEAR(exact_mot_lp(inst.order_a, inst.weights).phi, phi_cost(inst.optimal_a, inst.weights), 1e-10);
  EXPECT_NEAR(exact_mot_lp(inst.order_b, inst.weights).phi, phi_cost(inst.optimal_b, inst.weights), 1e-10);
}

TEST(NestedEllipses, SizesAndRanges) {
  auto ms = gen_nested_ellipses(10, 16, 1);
  ASSERT_EQ(ms.size(), 10u);
  for (const auto& m : ms) {
    EXPECT_GE(m.size(), 30u);
    EXPECT_LE(m.size(), 120u);
    double total = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j) {
      EXPECT_GT(m.weight(j), 0.0);
      total += m.weight(j);
      for (double c : m.point(j)) {
        EXPECT_GE(c, 0.0);
        EXPECT_LT(c, 1.0);
      }
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  EXPECT_THROW(gen_nested_ellipses(2, 7), InvalidArgument);
}

TEST(NestedEllipses, SingleMeasure) {
  auto ms = gen_nested_ellipses(1, 16, 2);
  ASSERT_EQ(ms.size(), 1u);
  std::vector<DiscreteMeasure> pair{ms[0], ms[0]};
  auto w = SimplexWeights::uniform(2);
  EXPECT_EQ(phi_cost(greedy_algorithm(pair, w), w), 0.0);
  EXPECT_EQ(phi_cost(reference_algorithm(pair, w), w), 0.0);
}

TEST(RandomClouds, Deterministic) {
  auto a = gen_random_clouds(3, 5, 2, 99);
  auto b = gen_random_clouds(3, 5, 2, 99);
  auto c = gen_random_clouds(3, 5, 2, 100);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(a[i] == b[i]);
  EXPECT_FALSE(a[0] == c[0]);
  for (const auto& m : a) {
    for (double x : m.points()) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
}

TEST(RandomClouds, SingleAtomsHaveAUniquePlan) {
  auto ms = gen_random_clouds(4, 1, 2, 5);
  auto w = SimplexWeights::uniform(4);
  const double opt = exact_mot_lp(ms, w).phi;
  EXPECT_NEAR(phi_cost(greedy_algorithm(ms, w), w), opt, 1e-15);
  EXPECT_NEAR(phi_cost(reference_algorithm(ms, w), w), opt, 1e-15);
}
