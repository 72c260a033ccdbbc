#include <gtest/gtest.h>

#include "error_code.hpp"
#include "oracles.hpp"
#include "otkd/errors.hpp"
#include "otkd/ot_core.hpp"

using namespace otkd;

namespace {

FeatureBatch fb(std::initializer_list<std::initializer_list<double>> rows) { return FeatureBatch(Matrix(rows)); }

CostMatrix cm(const Matrix& m) { return CostMatrix{m, CostMetric::kUser}; }

}  // namespace

TEST(FeatureBatch, RejectsEmptyAndNonFinite) {
  EXPECT_EQ(code_of([] { FeatureBatch(Matrix(0, 3)); }), ErrorCode::kInvalidParams);
  EXPECT_EQ(code_of([] { FeatureBatch(Matrix(2, 0)); }), ErrorCode::kInvalidParams);
  EXPECT_EQ(code_of([] { FeatureBatch(Matrix{{1.0, std::nan("")}}); }), ErrorCode::kNonFinite);
  EXPECT_EQ(code_of([] { FeatureBatch(Matrix{{1.0, HUGE_VAL}}); }), ErrorCode::kNonFinite);
}

TEST(MassVector, UniformIsExactAndSumsAreChecked) {
  const auto u = MassVector::uniform(7);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(u[i], 1.0 / 7.0);
  EXPECT_NO_THROW(MassVector({0.25, 0.75}));
  EXPECT_EQ(code_of([] { MassVector({0.5, 0.6}); }), ErrorCode::kInvalidParams);
  EXPECT_EQ(code_of([] { MassVector({1.5, -0.5}); }), ErrorCode::kInvalidParams);
}

TEST(CosineCost, ConstructedExamples) {
  const auto c = cosine_cost(fb({{1, 0}, {1, 0}, {1, 0}}), fb({{1, 0}, {0, 1}, {-1, 0}}));
  EXPECT_EQ(c.metric, CostMetric::kCosine);
  EXPECT_EQ(c(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(c(0, 1), 1.0);
  EXPECT_EQ(c(0, 2), 2.0);
}

TEST(CosineCost, ZeroIffPositivelyParallel) {
  const auto c = cosine_cost(fb({{2, 4}, {1, 1}}), fb({{0.5, 1.0}, {-3, -3}}));
  EXPECT_NEAR(c(0, 0), 0.0, 1e-15);
  EXPECT_GT(c(0, 1), 0.0);
  EXPECT_GT(c(1, 0), 0.0);
  EXPECT_NEAR(c(1, 1), 2.0, 1e-15);
}

TEST(CosineCost, MatchesDirectFormulaAndStaysInRange) {
  auto rng = SplitMix64(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t b = 1 + rng.below(8), d = 1 + rng.below(6);
    const Matrix x = oracle::gaussian(rng, b, d), y = oracle::gaussian(rng, b, d);
    const auto c = cosine_cost(FeatureBatch(x), FeatureBatch(y));
    const Matrix ref = oracle::cosine_matrix(x, y);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < b; ++j) {
        EXPECT_GE(c(i, j), 0.0);
        EXPECT_LE(c(i, j), 2.0);
        EXPECT_NEAR(c(i, j), std::clamp(ref(i, j), 0.0, 2.0), 1e-14);
      }
  }
}

TEST(CosineCost, ClampsRoundingAtParallelRows) {
  // Scaled copies of awkward vectors often give 1 - cos slightly below 0.
  auto rng = SplitMix64(5);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix x = oracle::gaussian(rng, 1, 7);
    const auto c = cosine_cost(FeatureBatch(x), FeatureBatch(x.scaled(3.1)));
    EXPECT_GE(c(0, 0), 0.0);
    EXPECT_LT(c(0, 0), 1e-14);
  }
}

TEST(CosineCost, Errors) {
  EXPECT_EQ(code_of([] { cosine_cost(fb({{1, 0}}), fb({{1, 0, 0}})); }), ErrorCode::kDimensionMismatch);
  EXPECT_EQ(code_of([] { cosine_cost(fb({{1, 0}, {0, 1}}), fb({{1, 0}})); }), ErrorCode::kDimensionMismatch);
  try {
    cosine_cost(fb({{1, 0}, {0, 1}}), fb({{1, 0}, {0, 1e-13}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroNormRow);
    EXPECT_EQ(e.index(), std::optional<std::size_t>(3));
  }
  try {
    cosine_cost(fb({{1, 0}, {0, 0}}), fb({{1, 0}, {0, 1}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroNormRow);
    EXPECT_EQ(e.index(), std::optional<std::size_t>(1));
  }
}

TEST(ExactEmd, TrivialExamples) {
  const auto a = exact_emd_uniform(cm(Matrix{{0, 1}, {1, 0}}));
  EXPECT_EQ(a.cost, 0.0);
  ASSERT_TRUE(a.plan);
  EXPECT_EQ(a.plan->entries, (Matrix{{0.5, 0}, {0, 0.5}}));
  EXPECT_TRUE(a.converged);

  const auto b = exact_emd_uniform(cm(Matrix{{1, 0}, {0, 1}}));
  EXPECT_EQ(b.cost, 0.0);
  EXPECT_EQ(b.plan->entries, (Matrix{{0, 0.5}, {0.5, 0}}));
}

TEST(ExactEmd, MatchesBruteForceOnRandom5x5) {
  auto rng = SplitMix64(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const Matrix c = oracle::uniform_cost(rng, 5);
    const auto sol = exact_emd_uniform(cm(c));
    EXPECT_NEAR(sol.cost, oracle::exact_uniform_cost(c), 1e-10);
  }
}

TEST(ExactEmd, OracleEquivalenceUpToB8) {
  auto rng = SplitMix64(77);
  for (std::size_t b = 1; b <= 8; ++b) {
    for (int trial = 0; trial < (b <= 6 ? 20 : 4); ++trial) {
      const Matrix c = oracle::uniform_cost(rng, b);
      const auto ref = oracle::brute_force_assignment(c);
      const auto sol = exact_emd_uniform(cm(c));
      EXPECT_NEAR(sol.cost, ref.sum / static_cast<double>(b), 1e-10);
      EXPECT_TRUE(validate_plan(*sol.plan, 1e-12).empty());
      EXPECT_NEAR(plan_cost(*sol.plan, cm(c)), sol.cost, 1e-10);
    }
  }
}

TEST(ExactEmd, LowestIndexTieBreak) {
  // Every permutation has cost 0: the identity must be returned.
  const auto zero = optimal_assignment(Matrix(4, 4, 0.0));
  EXPECT_EQ(zero, (std::vector<std::size_t>{0, 1, 2, 3}));
  // Integer costs with many ties; compare with the lexicographically first
  // optimum from enumeration.
  auto rng = SplitMix64(9);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t b = 2 + rng.below(5);
    Matrix c(b, b);
    for (double& x : c.data()) x = static_cast<double>(rng.below(3));
    EXPECT_EQ(optimal_assignment(c), oracle::brute_force_assignment(c).perm) << "trial " << trial;
  }
}

TEST(ExactEmd, ColumnPermutationEquivariance) {
  auto rng = SplitMix64(31);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t b = 2 + rng.below(7);
    const Matrix c = oracle::uniform_cost(rng, b);
    const auto perm = oracle::random_permutation(rng, b);
    Matrix cp(b, b);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < b; ++j) cp(i, j) = c(i, perm[j]);
    EXPECT_NEAR(exact_emd_uniform(cm(cp)).cost, exact_emd_uniform(cm(c)).cost, 1e-12);
  }
}

TEST(ExactEmd, LowerBoundsEveryFeasiblePlan) {
  auto rng = SplitMix64(8);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t b = 2 + rng.below(6);
    const Matrix c = oracle::uniform_cost(rng, b);
    const double exact = exact_emd_uniform(cm(c)).cost;
    // Random feasible plans: convex mixtures of permutation plans.
    Matrix t(b, b, 0.0);
    double wsum = 0.0;
    for (int k = 0; k < 4; ++k) {
      const double w = rng.uniform(0.1, 1.0);
      wsum += w;
      const Matrix p = permutation_plan(oracle::random_permutation(rng, b));
      for (std::size_t q = 0; q < t.size(); ++q) t.data()[q] += w * p.data()[q];
    }
    t = t.scaled(1.0 / wsum);
    TransportPlan plan{t, MassVector::uniform(b), MassVector::uniform(b)};
    ASSERT_TRUE(validate_plan(plan, 1e-9).empty());
    EXPECT_GE(plan_cost(plan, cm(c)), exact - 1e-10);
  }
}

TEST(ExactEmd, Errors) {
  EXPECT_EQ(code_of([] { exact_emd_uniform(cm(Matrix(2, 3))); }), ErrorCode::kNonSquare);
  EXPECT_EQ(code_of([] { exact_emd_uniform(cm(Matrix{{0, std::nan("")}, {1, 0}})); }), ErrorCode::kNonFinite);
}

TEST(ValidatePlan, Examples) {
  const auto u4 = MassVector::uniform(4);
  Matrix ident(4, 4, 0.0);
  for (std::size_t i = 0; i < 4; ++i) ident(i, i) = 0.25;
  EXPECT_TRUE(validate_plan({ident, u4, u4}, 1e-9).empty());
  EXPECT_TRUE(validate_plan({Matrix(4, 4, 1.0 / 16.0), u4, u4}, 1e-9).empty());

  Matrix bad = ident;
  bad(0, 1) = -0.01;
  const auto v = validate_plan({bad, u4, u4}, 1e-9);
  ASSERT_FALSE(v.empty());
  EXPECT_TRUE(std::any_of(v.begin(), v.end(), [](const PlanViolation& p) {
    return p.kind == ViolationKind::kNegativeEntry && p.row == 0 && p.col == 1;
  }));
  EXPECT_TRUE(std::any_of(v.begin(), v.end(), [](const PlanViolation& p) { return p.kind == ViolationKind::kRowSum; }));
  EXPECT_TRUE(
      std::any_of(v.begin(), v.end(), [](const PlanViolation& p) { return p.kind == ViolationKind::kColumnSum; }));
}

TEST(ValidatePlan, ToleranceBoundary) {
  const auto u2 = MassVector::uniform(2);
  Matrix t{{0.5 + 1e-7, 0}, {0, 0.5}};
  EXPECT_FALSE(validate_plan({t, u2, u2}, 1e-8).empty());
  EXPECT_TRUE(validate_plan({t, u2, u2}, 1e-6).empty());
  Matrix wrong_shape(3, 2, 0.0);
  const auto v = validate_plan({wrong_shape, u2, u2}, 1e-9);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, ViolationKind::kShape);
}

TEST(PlanCost, Examples) {
  const auto c = cm(Matrix{{0, 1}, {1, 0}});
  EXPECT_EQ(plan_cost(Matrix{{0.5, 0}, {0, 0.5}}, c), 0.0);
  EXPECT_EQ(plan_cost(Matrix{{0, 0.5}, {0.5, 0}}, c), 1.0);
  auto rng = SplitMix64(4);
  const Matrix t = permutation_plan(oracle::random_permutation(rng, 5));
  EXPECT_NEAR(plan_cost(t, cm(Matrix(5, 5, 0.37))), 0.37, 1e-15);
  EXPECT_NEAR(plan_cost(Matrix(5, 5, 1.0 / 25.0), cm(Matrix(5, 5, 0.37))), 0.37, 1e-15);
  EXPECT_EQ(code_of([&] { plan_cost(Matrix(2, 2), cm(Matrix(3, 3))); }), ErrorCode::kDimensionMismatch);
}

TEST(MarginalViolation, L1OfWorseSide) {
  const auto u2 = MassVector::uniform(2);
  EXPECT_EQ(marginal_violation(Matrix{{0.5, 0}, {0, 0.5}}, u2, u2), 0.0);
  // rows sum to (0.6, 0.4): L1 0.2; columns (0.5, 0.5).
  EXPECT_NEAR(marginal_violation(Matrix{{0.3, 0.3}, {0.2, 0.2}}, u2, u2), 0.2, 1e-15);
}
