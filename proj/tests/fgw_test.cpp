#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tfgw/fgw.hpp"

using namespace tfgw;
using namespace tfgw::testing;

namespace {

/// Feasible coupling strictly inside U(h, hbar): a random vertex mixed with the product.
Matrix interior_coupling(const Vector& h, const Vector& hb, std::mt19937_64& rng, double mix = 0.5) {
  const Matrix vertex = solve_exact_ot(random_matrix(static_cast<int>(h.size()), static_cast<int>(hb.size()), rng), h, hb)
                            .coupling.plan;
  return mix * vertex + (1.0 - mix) * h * hb.transpose();
}

Matrix two_node(double w) {
  Matrix c(2, 2);
  c << 0, w, w, 0;
  return c;
}

}  // namespace

TEST(FgwCost, IdenticalGraphsDiagonalCouplingIsZero) {
  std::mt19937_64 rng(1);
  for (double alpha : {0.0, 0.3, 1.0}) {
    const Graph g = random_graph(6, 3, rng);
    const Matrix plan = g.weights.asDiagonal();
    EXPECT_NEAR(fgw_cost(g.structure, g.features, g.structure, g.features, alpha, plan).total, 0.0, 1e-14);
  }
}

TEST(FgwCost, MatchesNaiveQuadrupleSum) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> size(1, 8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int checked = 0;
  while (checked < 100) {
    const int n = size(rng), m = size(rng);
    if (n * m > 64) continue;
    const Graph a = random_graph(n, 2, rng), b = random_graph(m, 2, rng);
    const Matrix plan = interior_coupling(a.weights, b.weights, rng);
    const double alpha = unit(rng);
    const double fast = fgw_cost(a.structure, a.features, b.structure, b.features, alpha, plan).total;
    const double slow = fgw_cost_naive(a.structure, a.features, b.structure, b.features, alpha, plan);
    ASSERT_NEAR(fast, slow, 1e-10) << "n=" << n << " m=" << m;
    ++checked;
  }
}

TEST(FgwCost, DecompositionIdentity) {
  std::mt19937_64 rng(3);
  const Graph a = random_graph(4, 2, rng), b = random_graph(3, 2, rng);
  const auto c = fgw_cost(a.structure, a.features, b.structure, b.features, 0.3, interior_coupling(a.weights, b.weights, rng));
  EXPECT_EQ(c.total, 0.3 * c.gw_part + 0.7 * c.w_part);
}

TEST(FgwCost, RejectsShapeMismatch) {
  EXPECT_THROW(fgw_cost(Matrix::Zero(3, 3), Matrix::Zero(3, 1), Matrix::Zero(2, 2), Matrix::Zero(2, 1), 0.5,
                        Matrix::Constant(3, 3, 1.0 / 9)),
               ValidationError);
}

TEST(FgwCostNaive, ZeroStructuresIdenticalFeatures) {
  const Matrix f = Matrix::Ones(3, 2);
  EXPECT_EQ(fgw_cost_naive(Matrix::Zero(3, 3), f, Matrix::Zero(3, 3), f, 0.5, Matrix::Constant(3, 3, 1.0 / 9)), 0.0);
}

TEST(FgwCostNaive, HandComputedTwoNodeCase) {
  const Matrix f = Matrix::Zero(2, 1);
  Matrix plan(2, 2);
  plan << 0.5, 0, 0, 0.5;
  // Only (i,j,k,l) with i=k, j=l carry mass 1/4; the two off-diagonal pairs cost (1-2)^2.
  EXPECT_DOUBLE_EQ(fgw_cost_naive(two_node(1), f, two_node(2), f, 1.0, plan), 0.5);
}

TEST(FgwCostNaive, EnforcesSizeCap) {
  EXPECT_THROW(fgw_cost_naive(Matrix::Zero(9, 9), Matrix::Zero(9, 1), Matrix::Zero(8, 8), Matrix::Zero(8, 1), 0.5,
                              Matrix::Constant(9, 8, 1.0 / 72)),
               ValidationError);
}

TEST(CgGradient, LinearCaseIsFeatureCost) {
  std::mt19937_64 rng(4);
  const Graph a = random_graph(4, 3, rng), b = random_graph(5, 3, rng);
  const Matrix plan = interior_coupling(a.weights, b.weights, rng);
  EXPECT_TRUE(cg_linearized_gradient(a.structure, a.features, b.structure, b.features, 0.0, plan)
                  .isApprox(feature_cost(a.features, b.features), 1e-15));
}

TEST(CgGradient, ZeroStructuresGiveZero) {
  std::mt19937_64 rng(5);
  const Matrix plan = Matrix::Constant(3, 4, 1.0 / 12);
  const Matrix g = cg_linearized_gradient(Matrix::Zero(3, 3), random_matrix(3, 2, rng), Matrix::Zero(4, 4),
                                          random_matrix(4, 2, rng), 1.0, plan);
  EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
}

TEST(CgGradient, DirectionalDerivativeMatchesNaiveDifferences) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double eps = 1e-6;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + trial % 3, m = 2 + (trial / 3) % 3;
    const Graph a = random_graph(n, 2, rng), b = random_graph(m, 2, rng);
    const double alpha = unit(rng);
    const Matrix plan = interior_coupling(a.weights, b.weights, rng, 0.3);
    const Matrix dir = interior_coupling(a.weights, b.weights, rng, 0.3) - plan;
    const Matrix g = cg_linearized_gradient(a.structure, a.features, b.structure, b.features, alpha, plan);
    const double analytic = (g.array() * dir.array()).sum();
    const double fd = (fgw_cost_naive(a.structure, a.features, b.structure, b.features, alpha, plan + eps * dir) -
                       fgw_cost_naive(a.structure, a.features, b.structure, b.features, alpha, plan - eps * dir)) /
                      (2 * eps);
    EXPECT_LE(relative_gap(analytic, fd), 1e-5) << "trial " << trial;
  }
}

TEST(LineSearch, QuadraticFitsThreePoints) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 5, m = 2 + (trial / 5) % 5;
    const Graph a = random_graph(n, 2, rng), b = random_graph(m, 2, rng);
    const double alpha = unit(rng);
    const Matrix cost = feature_cost(a.features, b.features);
    const Matrix plan = interior_coupling(a.weights, b.weights, rng);
    const Matrix dir = solve_exact_ot(random_matrix(n, m, rng), a.weights, b.weights).coupling.plan - plan;
    const auto ls = exact_line_search(plan, dir, a.structure, b.structure, alpha, cost);
    for (double tau : {0.0, 0.5, 1.0}) {
      const double q = fgw_cost_with_feature_cost(a.structure, b.structure, cost, alpha, plan + tau * dir).total;
      EXPECT_NEAR(ls.a * tau * tau + ls.b * tau + ls.c, q, 1e-10) << "trial " << trial << " tau " << tau;
    }
    const double q_best = ls.a * ls.tau * ls.tau + ls.b * ls.tau + ls.c;
    for (double tau = 0.0; tau <= 1.0; tau += 0.01) EXPECT_LE(q_best, ls.a * tau * tau + ls.b * tau + ls.c + 1e-12);
  }
}

TEST(LineSearch, LinearDescentTakesFullStep) {
  std::mt19937_64 rng(8);
  const Graph a = random_graph(4, 2, rng), b = random_graph(4, 2, rng);
  const Matrix cost = feature_cost(a.features, b.features);
  const Matrix plan = a.weights * b.weights.transpose();
  const Matrix dir = solve_exact_ot(cost, a.weights, b.weights).coupling.plan - plan;
  EXPECT_EQ(exact_line_search(plan, dir, a.structure, b.structure, 0.0, cost).tau, 1.0);
}

TEST(LineSearch, ConcaveCaseTakesBetterEndpoint) {
  // Moving from the product coupling towards the identity matching of two equal 2-node graphs is concave.
  const Matrix c = two_node(1);
  Vector h(2);
  h << 0.5, 0.5;
  const Matrix plan = h * h.transpose();
  Matrix target(2, 2);
  target << 0.5, 0, 0, 0.5;
  const auto ls = exact_line_search(plan, target - plan, c, c, 1.0, Matrix::Zero(2, 2));
  EXPECT_LT(ls.a, 0.0);
  EXPECT_EQ(ls.tau, 1.0);
}

TEST(LineSearch, FlatDirectionReturnsZero) {
  const Matrix plan = Matrix::Constant(2, 2, 0.25);
  EXPECT_EQ(exact_line_search(plan, Matrix::Zero(2, 2), Matrix::Zero(2, 2), Matrix::Zero(2, 2), 0.5, Matrix::Zero(2, 2)).tau,
            0.0);
}

TEST(SolveFgw, TwoNodeExample) {
  const Graph a = make_graph(two_node(1), Matrix::Zero(2, 1));
  const Graph b = make_graph(two_node(2), Matrix::Zero(2, 1));
  const auto r = solve_fgw(a, b, 1.0);
  EXPECT_NEAR(r.value, 0.5, 1e-12);
  // Grid over the one-parameter coupling family [[t, .5-t], [.5-t, t]].
  double best = 1e9;
  for (int s = 0; s <= 1000; ++s) {
    const double t = 0.5 * s / 1000;
    Matrix plan(2, 2);
    plan << t, 0.5 - t, 0.5 - t, t;
    best = std::min(best, fgw_cost(a.structure, a.features, b.structure, b.features, 1.0, plan).total);
  }
  EXPECT_NEAR(best, 0.5, 1e-12);
}

TEST(SolveFgw, SelfDistanceIsZero) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Graph g = random_graph(1 + trial % 8, 2, rng);
    const double alpha = trial % 10 == 0 ? 1.0 : unit(rng);
    EXPECT_LE(solve_fgw(g, g, alpha).value, 1e-8) << "trial " << trial;
  }
}

TEST(SolveFgw, SelfDistanceOfRegularGraphIsZero) {
  // Regular structures make the gradient at the product coupling constant up to rounding.
  for (int n : {4, 6, 9, 12}) {
    Matrix cycle = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) cycle(i, (i + 1) % n) = cycle((i + 1) % n, i) = 1.0;
    const Graph g = make_graph(cycle, Matrix::Ones(n, 1));
    for (double alpha : {0.5, 1.0}) EXPECT_LE(solve_fgw(g, g, alpha).value, 1e-8) << "n " << n;
  }
}

TEST(SolveFgw, LinearCaseEqualsExactOt) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const Graph a = random_graph(1 + trial % 7, 3, rng), b = random_graph(1 + trial % 5, 3, rng);
    const auto r = solve_fgw(a, b, 0.0);
    const double lp = solve_exact_ot(feature_cost(a.features, b.features), a.weights, b.weights).objective;
    EXPECT_NEAR(r.value, lp, 1e-9) << "trial " << trial;
  }
}

TEST(SolveFgw, MonotoneTraceAndDecomposition) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CgOptions o;
  o.record_trace = true;
  for (int trial = 0; trial < 100; ++trial) {
    const Graph a = random_graph(3 + trial % 10, 2, rng), b = random_graph(3 + trial % 7, 2, rng);
    const double alpha = unit(rng);
    const auto r = solve_fgw(a, b, alpha, o);
    ASSERT_FALSE(r.trace.empty());
    for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1]);
    EXPECT_NEAR(r.value, alpha * r.gw_part + (1 - alpha) * r.w_part, 1e-10);
    EXPECT_GE(r.value, 0.0);
    EXPECT_LE(marginal_violation(r.coupling), 1e-9);
  }
}

TEST(SolveFgw, CostPermutationIdentityIsExact) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 7, m = 2 + trial % 5;
    const Graph a = random_graph(n, 2, rng), b = random_graph(m, 2, rng);
    const Matrix plan = interior_coupling(a.weights, b.weights, rng);
    const auto perm = random_permutation(static_cast<std::size_t>(n), rng);
    const Graph pa = permute_graph(a, perm);
    const double base = fgw_cost(a.structure, a.features, b.structure, b.features, 0.4, plan).total;
    const double moved = fgw_cost(pa.structure, pa.features, b.structure, b.features, 0.4, permute_rows(plan, perm)).total;
    EXPECT_NEAR(base, moved, 1e-12);
  }
}

TEST(SolveFgw, PermutationInvariantOnGenericGraphs) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 7, m = 2 + (trial / 7) % 7;
    const Graph a = random_graph(n, 2, rng), b = random_graph(m, 2, rng);
    const double alpha = unit(rng);
    const auto perm = random_permutation(static_cast<std::size_t>(n), rng);
    EXPECT_NEAR(solve_fgw(a, b, alpha).value, solve_fgw(permute_graph(a, perm), b, alpha).value, 1e-6)
        << "trial " << trial;
  }
}

TEST(SolveFgw, RestartsNeverWorsen) {
  std::mt19937_64 rng(14);
  CgOptions multi;
  multi.restarts = 4;
  for (int trial = 0; trial < 30; ++trial) {
    const Graph a = random_graph(6, 1, rng), b = random_graph(7, 1, rng);
    EXPECT_LE(solve_fgw(a, b, 0.8, multi).value, solve_fgw(a, b, 0.8).value);
  }
}

TEST(SolveFgw, RejectsInvalidInput) {
  std::mt19937_64 rng(15);
  const Graph a = random_graph(3, 1, rng), b = random_graph(3, 1, rng);
  EXPECT_THROW(solve_fgw(a, b, 1.5), ValidationError);
  EXPECT_THROW(solve_fgw(a, b, -0.1), ValidationError);
  CgOptions bad;
  bad.max_iterations = 0;
  EXPECT_THROW(solve_fgw(a, b, 0.5, bad), ValidationError);
  CgOptions provided;
  provided.init = InitialCoupling::Provided;
  provided.initial_plan = Matrix::Constant(3, 3, 0.2);
  EXPECT_THROW(solve_fgw(a, b, 0.5, provided), ValidationError);
}
