#include <random>

#include <gtest/gtest.h>

#include <limits>

#include "test_util.hpp"
#include "tfgw/exact_ot.hpp"

using namespace tfgw;

using namespace tfgw::testing;

TEST(ExactOt, ZeroCostMatching) {
  Matrix cost(2, 2);
  cost << 0, 1, 1, 0;
  Vector h(2);
  h << 0.5, 0.5;
  const auto r = solve_exact_ot(cost, h, h);
  EXPECT_DOUBLE_EQ(r.objective, 0.0);
  EXPECT_DOUBLE_EQ(r.coupling.plan(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(r.coupling.plan(1, 1), 0.5);
  EXPECT_DOUBLE_EQ(r.coupling.plan(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(r.coupling.plan(1, 0), 0.0);
}

TEST(ExactOt, ConstantCostGivesOne) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector a = random_simplex(3, rng), b = random_simplex(5, rng);
    const auto r = solve_exact_ot(Matrix::Ones(3, 5), a, b);
    EXPECT_NEAR(r.objective, 1.0, 1e-12);
  }
}

TEST(ExactOt, RoundoffLevelCostKeepsNorthWestCorner) {
  std::mt19937_64 rng(31);
  const Vector u = Vector::Constant(4, 0.25);
  Matrix cost = Matrix::Constant(4, 4, 2.0 / 3.0);
  for (Eigen::Index i = 0; i < cost.size(); ++i)
    cost.data()[i] += (rng() % 3 == 0 ? 1 : 0) * std::numeric_limits<double>::epsilon();
  const auto r = solve_exact_ot(cost, u, u);
  EXPECT_EQ(r.pivots, 0);
  EXPECT_TRUE(r.ties);
  EXPECT_LE((r.coupling.plan - Matrix(u.asDiagonal())).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ExactOt, MatchesBruteForce) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(1, 4);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = size(rng), m = size(rng);
    const Matrix cost = random_matrix(n, m, rng);
    const Vector a = random_simplex(n, rng), b = random_simplex(m, rng);
    const auto r = solve_exact_ot(cost, a, b);
    ASSERT_NEAR(r.objective, brute_force_ot(cost, a, b), 1e-9) << "trial " << trial;
    ASSERT_LE(marginal_violation(r.coupling), 1e-9);
    ASSERT_LE((r.coupling.plan.array() > 0.0).count(), n + m - 1);
  }
}

TEST(BruteForceOt, SingleCell) {
  Matrix cost(1, 1);
  cost << 2.5;
  Vector one(1);
  one << 1.0;
  EXPECT_DOUBLE_EQ(brute_force_ot(cost, one, one), 2.5);
}

TEST(BruteForceOt, RejectsLargeProblems) {
  EXPECT_THROW(brute_force_ot(Matrix::Zero(5, 2), Vector::Constant(5, 0.2), Vector::Constant(2, 0.5)),
               ValidationError);
}

TEST(BruteForceOt, ZeroCostMatching) {
  Matrix cost(2, 2);
  cost << 0, 1, 1, 0;
  EXPECT_DOUBLE_EQ(brute_force_ot(cost, Vector::Constant(2, 0.5), Vector::Constant(2, 0.5)), 0.0);
}

TEST(BruteForceOt, ThreeByTwoAgreesWithSolver) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix cost = random_matrix(3, 2, rng);
    const Vector a = random_simplex(3, rng), b = random_simplex(2, rng);
    EXPECT_NEAR(brute_force_ot(cost, a, b), solve_exact_ot(cost, a, b).objective, 1e-12);
  }
}

TEST(ExactOt, ScalingKeepsSupportAndScalesObjective) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> factor(0.1, 10.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + trial % 6, m = 1 + (trial / 6) % 6;
    const Matrix cost = random_matrix(n, m, rng);
    const Vector a = random_simplex(n, rng), b = random_simplex(m, rng);
    const double lambda = factor(rng);
    const auto base = solve_exact_ot(cost, a, b);
    const auto scaled = solve_exact_ot(lambda * cost, a, b);
    EXPECT_NEAR(scaled.objective, lambda * base.objective, 1e-12 * std::max(1.0, lambda));
    EXPECT_EQ((base.coupling.plan.array() > 0.0).matrix(), (scaled.coupling.plan.array() > 0.0).matrix());
  }
}

TEST(ExactOt, ShiftAddsConstant) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> shift(-5.0, 5.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + trial % 6, m = 1 + (trial / 6) % 6;
    const Matrix cost = random_matrix(n, m, rng);
    const Vector a = random_simplex(n, rng), b = random_simplex(m, rng);
    const double c = shift(rng);
    const auto base = solve_exact_ot(cost, a, b);
    const auto moved = solve_exact_ot(cost.array() + c, a, b);
    EXPECT_NEAR(moved.objective, base.objective + c, 1e-12);
  }
}

TEST(ExactOt, MarginalsAndVertexSupportOnLargerProblems) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5 + trial % 30, m = 5 + (trial * 7) % 30;
    const auto r = solve_exact_ot(random_matrix(n, m, rng), random_simplex(n, rng), random_simplex(m, rng));
    EXPECT_LE(marginal_violation(r.coupling), 1e-9);
    EXPECT_LE((r.coupling.plan.array() > 0.0).count(), n + m - 1);
    EXPECT_GE(r.coupling.plan.minCoeff(), 0.0);
  }
}

TEST(ExactOt, WarmStartReachesSameObjective) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 10, m = 2 + (trial / 10) % 10;
    const Vector a = random_simplex(n, rng), b = random_simplex(m, rng);
    const auto first = solve_exact_ot(random_matrix(n, m, rng), a, b);
    const Matrix cost = random_matrix(n, m, rng);
    const auto cold = solve_exact_ot(cost, a, b);
    const auto warm = solve_exact_ot(cost, a, b, &first.basis);
    EXPECT_NEAR(cold.objective, warm.objective, 1e-12);
  }
}

TEST(ExactOt, Deterministic) {
  std::mt19937_64 rng(26);
  const Matrix cost = random_matrix(7, 9, rng);
  const Vector a = random_simplex(7, rng), b = random_simplex(9, rng);
  EXPECT_EQ(solve_exact_ot(cost, a, b).coupling.plan, solve_exact_ot(cost, a, b).coupling.plan);
}

TEST(ExactOt, RejectsInvalidInput) {
  Matrix cost = Matrix::Zero(2, 2);
  const Vector h = Vector::Constant(2, 0.5);
  EXPECT_THROW(solve_exact_ot(cost, h, Vector::Constant(2, 0.6)), ValidationError);
  cost(0, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(solve_exact_ot(cost, h, h), ValidationError);
  cost(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(solve_exact_ot(cost, h, h), ValidationError);
}
