#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "motbary/exact_oracle.hpp"
#include "motbary/ot2.hpp"

using namespace motbary;
using namespace testing_support;

namespace {

/// Optimal value of the transport LP from the dense oracle, independent of the
/// network simplex.
double lp_value(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  auto c = squared_euclidean_costs(mu.points(), nu.points(), mu.dim());
  DenseMotLp lp({mu.size(), nu.size()}, std::vector<double>(c.data().begin(), c.data().end()));
  auto sol = solve_dense_lp(lp, {{mu.weights().begin(), mu.weights().end()},
                                 {nu.weights().begin(), nu.weights().end()}});
  return sol.objective;
}

void expect_certificate(const Ot2Result& r, const TransportProblem& p) {
  double dual = 0.0;
  for (std::size_t i = 0; i < p.source.size(); ++i) dual += p.source.weight(i) * r.row_potential[i];
  for (std::size_t j = 0; j < p.target.size(); ++j) dual += p.target.weight(j) * r.col_potential[j];
  EXPECT_NEAR(dual, r.cost, 1e-9);
  for (std::size_t i = 0; i < p.source.size(); ++i)
    for (std::size_t j = 0; j < p.target.size(); ++j)
      EXPECT_LE(r.row_potential[i] + r.col_potential[j], p.cost(i, j) + 1e-7);
  for (std::size_t a = 0; a < r.coupling.size(); ++a) {
    const auto i = r.coupling.index(a, 0), j = r.coupling.index(a, 1);
    EXPECT_NEAR(r.row_potential[i] + r.col_potential[j], p.cost(i, j), 1e-7);
  }
}

}  // namespace

TEST(BuildCostMatrix, SquaredDistances) {
  auto a = DiscreteMeasure::uniform({{0.0}});
  auto b = DiscreteMeasure::uniform({{3.0}});
  EXPECT_DOUBLE_EQ(build_cost_matrix(a, b).cost(0, 0), 9.0);
  auto x = DiscreteMeasure::uniform({{-1.0, 5.0 / 8}});
  auto y = DiscreteMeasure::uniform({{1.0, 5.0 / 8}});
  EXPECT_DOUBLE_EQ(build_cost_matrix(x, y).cost(0, 0), 4.0);
  std::mt19937_64 rng(1);
  auto m = random_measure(rng, 5, 2);
  auto p = build_cost_matrix(m, m);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(p.cost(i, i), 0.0);
  auto n = random_measure(rng, 3, 2);
  auto pq = build_cost_matrix(m, n), qp = build_cost_matrix(n, m);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(pq.cost(i, j), qp.cost(j, i));
  EXPECT_THROW(build_cost_matrix(a, x), DimensionMismatch);
}

TEST(SolveOt2, IdenticalMeasuresGiveIdentityCoupling) {
  std::mt19937_64 rng(2);
  auto m = random_measure(rng, 6, 2);
  auto r = solve_ot2(build_cost_matrix(m, m));
  EXPECT_NEAR(r.cost, 0.0, 1e-15);
  ASSERT_EQ(r.coupling.size(), 6u);
  for (std::size_t a = 0; a < 6; ++a) EXPECT_EQ(r.coupling.index(a, 0), r.coupling.index(a, 1));
}

TEST(SolveOt2, MonotoneCouplingOnTheLine) {
  auto mu = DiscreteMeasure::uniform({{0.0}, {3.0}});
  auto nu = DiscreteMeasure::uniform({{1.0}, {2.0}});
  auto r = solve_ot2(build_cost_matrix(mu, nu));
  EXPECT_NEAR(r.cost, 1.0, 1e-15);
  Coupling expected(mu, nu, {0, 0, 1, 1}, {0.5, 0.5});
  EXPECT_EQ(r.coupling, expected);
}

TEST(SolveOt2, MatchesDenseLpOracle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> sz(1, 6), dim(1, 3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = dim(rng);
    auto mu = random_measure(rng, sz(rng), d);
    auto nu = random_measure(rng, sz(rng), d);
    auto p = build_cost_matrix(mu, nu);
    auto r = solve_ot2(p);
    EXPECT_TRUE(rel_close(r.cost, lp_value(mu, nu), 1e-9));
    EXPECT_LE(r.coupling.size(), mu.size() + nu.size() - 1);
    EXPECT_TRUE(validate_plan(r.coupling).feasible);
    expect_certificate(r, p);
  }
}

TEST(SolveOt2, DegenerateInstances) {
  // Equal partial sums force degenerate pivots.
  auto mu = DiscreteMeasure::uniform({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}});
  auto nu = DiscreteMeasure::uniform({{0.5, 0.5}, {2.0, 2.0}, {-1.0, 0.0}, {0.0, -1.0}});
  auto p = build_cost_matrix(mu, nu);
  auto r = solve_ot2(p);
  EXPECT_TRUE(rel_close(r.cost, lp_value(mu, nu), 1e-9));
  EXPECT_LE(r.coupling.size(), 7u);
  expect_certificate(r, p);
}

TEST(SolveOt2, LargerInstancesStayFeasibleAndSparse) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    auto mu = random_measure(rng, 80, 2);
    auto nu = random_measure(rng, 60, 2);
    auto p = build_cost_matrix(mu, nu);
    auto r = solve_ot2(p);
    EXPECT_TRUE(validate_plan(r.coupling).feasible);
    EXPECT_LE(r.coupling.size(), 139u);
    expect_certificate(r, p);
  }
}

TEST(SolveOt2, PivotBudgetIsAHardError) {
  std::mt19937_64 rng(8);
  auto mu = random_measure(rng, 30, 2);
  auto nu = random_measure(rng, 30, 2);
  TransportOptions opts;
  opts.pivot_budget_factor = 0;
  try {
    solve_ot2(build_cost_matrix(mu, nu), opts);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_EQ(e.iterations(), 0u);
  }
}

TEST(SolveTransport, RejectsUnbalancedInput) {
  CostMatrix c(1, 1, 0.0);
  std::vector<double> a{1.0}, b{2.0};
  EXPECT_THROW(solve_transport(a, b, c), InvalidArgument);
}

TEST(W2Squared, WorkedExampleDistance) {
  auto nu_tilde = DiscreteMeasure::uniform({{4.0 / 3}, {5.0 / 3}});
  auto nu_hat = DiscreteMeasure::uniform({{2.0 / 3}, {7.0 / 3}});
  EXPECT_NEAR(w2_squared(nu_tilde, nu_hat), 4.0 / 9.0, 1e-12);
}

TEST(W2Squared, SymmetricAndTranslationInvariant) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> shift(-5.0, 5.0);
  for (int trial = 0; trial < 25; ++trial) {
    auto mu = random_measure(rng, 5, 2);
    auto nu = random_measure(rng, 4, 2);
    EXPECT_NEAR(w2_squared(mu, mu), 0.0, 1e-15);
    EXPECT_NEAR(w2_squared(mu, nu), w2_squared(nu, mu), 1e-9);
    const double t0 = shift(rng), t1 = shift(rng);
    auto move = [&](const DiscreteMeasure& m) {
      std::vector<double> p(m.points().begin(), m.points().end());
      for (std::size_t k = 0; k < p.size(); k += 2) {
        p[k] += t0;
        p[k + 1] += t1;
      }
      return DiscreteMeasure(2, p, {m.weights().begin(), m.weights().end()});
    };
    EXPECT_NEAR(w2_squared(move(mu), move(nu)), w2_squared(mu, nu), 1e-9);
  }
}

TEST(SolveOt2, NonCrossingInOneDimension) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    auto mu = random_measure(rng, 7, 1);
    auto nu = random_measure(rng, 5, 1);
    auto r = solve_ot2(build_cost_matrix(mu, nu));
    const auto& c = r.coupling;
    for (std::size_t a = 0; a < c.size(); ++a)
      for (std::size_t b = 0; b < c.size(); ++b) {
        if (c.point(a, 0)[0] < c.point(b, 0)[0]) { EXPECT_LE(c.point(a, 1)[0], c.point(b, 1)[0]); }
      }
  }
}

TEST(W2Cache, ReusesValuesSymmetrically) {
  std::mt19937_64 rng(6);
  auto mu = random_measure(rng, 5, 2);
  auto nu = random_measure(rng, 6, 2);
  W2Cache cache;
  const double a = cache.get(mu, nu);
  const double b = cache.get(nu, mu);
  EXPECT_EQ(a, b);
  EXPECT_EQ(cache.size(), 1u);
  EXPECT_EQ(cache.hits(), 1u);
  EXPECT_NEAR(a, w2_squared(mu, nu), 1e-12);
  EXPECT_EQ(cache.get(mu, mu), 0.0);
}
