#include <gtest/gtest.h>

#include "oracles.hpp"
#include "otkd/errors.hpp"
#include "otkd/solvers.hpp"

using namespace otkd;

namespace {

CostMatrix cm(const Matrix& m) { return CostMatrix{m, CostMetric::kUser}; }

CostMatrix random_cosine(SplitMix64& rng, std::size_t b, std::size_t d) {
  return cosine_cost(FeatureBatch(oracle::gaussian(rng, b, d)), FeatureBatch(oracle::gaussian(rng, b, d)));
}

SinkhornConfig sk(double eps) {
  SinkhornConfig c;
  c.epsilon = eps;
  return c;
}

IpotConfig ip(double beta, std::size_t n) {
  IpotConfig c;
  c.beta = beta;
  c.num_iters = n;
  return c;
}

}  // namespace

TEST(Sinkhorn, ZeroCostGivesIndependentCoupling) {
  for (double eps : {0.01, 0.5, 10.0}) {
    const auto u = MassVector::uniform(4);
    const auto s = sinkhorn_rot(cm(Matrix(4, 4, 0.0)), u, u, sk(eps));
    EXPECT_EQ(s.cost, 0.0);
    for (double t : s.plan->entries.data()) EXPECT_NEAR(t, 1.0 / 16.0, 1e-15);
    EXPECT_TRUE(s.converged);
  }
}

TEST(Sinkhorn, SinglePoint) {
  const auto u = MassVector::uniform(1);
  for (double eps : {0.001, 1.0}) {
    const auto s = sinkhorn_rot(cm(Matrix{{0.7}}), u, u, sk(eps));
    EXPECT_NEAR(s.plan->entries(0, 0), 1.0, 1e-15);
    EXPECT_NEAR(s.cost, 0.7, 1e-15);
  }
}

TEST(Sinkhorn, SmallEpsilonApproachesExact) {
  auto rng = SplitMix64(606);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix c = oracle::uniform_cost(rng, 6);
    const auto u = MassVector::uniform(6);
    const auto s = sinkhorn_rot(cm(c), u, u, sk(0.01));
    EXPECT_NEAR(s.cost, oracle::exact_uniform_cost(c), 5e-3);
  }
}

TEST(Sinkhorn, FeasibleUpperBound) {
  auto rng = SplitMix64(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t b = 2 + rng.below(7);
    const auto c = random_cosine(rng, b, 5);
    const auto u = MassVector::uniform(b);
    auto cfg = sk(0.05);
    cfg.max_iters = 1000000;  // near-degenerate instances mix slowly at this epsilon
    const auto s = sinkhorn_rot(c, u, u, cfg);
    ASSERT_TRUE(s.converged) << "b=" << b << " violation " << s.marginal_violation;
    EXPECT_LE(s.marginal_violation, cfg.marginal_tol);
    EXPECT_TRUE(validate_plan(*s.plan, 10 * cfg.marginal_tol).empty());
    EXPECT_GE(s.cost, oracle::exact_uniform_cost(c.entries) - 1e-9);
    EXPECT_NEAR(plan_cost(*s.plan, c), s.cost, 1e-10);
    ASSERT_TRUE(s.entropy);
  }
}

TEST(Sinkhorn, EpsilonMonotone) {
  auto rng = SplitMix64(12);
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = random_cosine(rng, 6, 4);
    const auto u = MassVector::uniform(6);
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {0.5, 0.1, 0.02}) {
      const double v = sinkhorn_rot(c, u, u, sk(eps)).cost;
      EXPECT_LE(v, prev + 1e-6);
      prev = v;
    }
  }
}

TEST(Sinkhorn, LogDomainAgreesWithScaling) {
  auto rng = SplitMix64(1);
  const auto c = random_cosine(rng, 7, 3);
  const auto u = MassVector::uniform(7);
  auto std_cfg = sk(0.05);
  std_cfg.domain = SinkhornDomain::kStandard;
  auto log_cfg = sk(0.05);
  log_cfg.domain = SinkhornDomain::kLog;
  const auto a = sinkhorn_rot(c, u, u, std_cfg);
  const auto b = sinkhorn_rot(c, u, u, log_cfg);
  EXPECT_NEAR(a.cost, b.cost, 1e-9);
  for (std::size_t k = 0; k < 49; ++k) EXPECT_NEAR(a.plan->entries.data()[k], b.plan->entries.data()[k], 1e-9);
}

TEST(Sinkhorn, TinyEpsilonUnderflowHandling) {
  const Matrix c{{0.0, 2.0}, {2.0, 0.0}};
  const auto u = MassVector::uniform(2);
  auto cfg = sk(1e-4);
  cfg.domain = SinkhornDomain::kStandard;
  // exp(-2/1e-4) underflows to 0 but the diagonal keeps rows alive.
  EXPECT_NO_THROW(sinkhorn_rot(cm(c), u, u, cfg));
  // A row whose kernel is entirely zero cannot be scaled.
  const Matrix dead{{2.0, 2.0}, {0.0, 0.0}};
  try {
    sinkhorn_rot(cm(dead), u, u, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumericalUnderflow);
  }
  cfg.domain = SinkhornDomain::kAuto;
  const auto s = sinkhorn_rot(cm(dead), u, u, cfg);
  EXPECT_TRUE(std::isfinite(s.cost));
  EXPECT_NEAR(s.cost, 1.0, 1e-9);  // half the mass must pay 2
}

TEST(Sinkhorn, ConfigValidation) {
  const auto u = MassVector::uniform(2);
  for (auto bad : {sk(0.0), sk(-1.0)}) {
    EXPECT_THROW(sinkhorn_rot(cm(Matrix(2, 2)), u, u, bad), Error);
  }
  auto zero_iters = sk(0.1);
  zero_iters.max_iters = 0;
  EXPECT_THROW(sinkhorn_rot(cm(Matrix(2, 2)), u, u, zero_iters), Error);
  try {
    sinkhorn_rot(cm(Matrix(2, 3)), u, u, sk(0.1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonSquare);
  }
}

TEST(Ipot, TrivialExamples) {
  const auto u4 = MassVector::uniform(4);
  EXPECT_EQ(ipot(cm(Matrix(4, 4, 0.0)), u4, u4, ip(20, 7)).cost, 0.0);
  const auto u1 = MassVector::uniform(1);
  const auto s = ipot(cm(Matrix{{0.7}}), u1, u1, ip(20, 1));
  EXPECT_NEAR(s.plan->entries(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(s.cost, 0.7, 1e-15);
  EXPECT_EQ(s.iterations_used, 1u);
}

// The first outer iteration from v = 1/b, T = 1 1^T, worked by hand.
TEST(Ipot, FirstIterationMatchesHandComputation) {
  const Matrix c{{0.0, 1.0}, {0.5, 0.2}};
  const double beta = 2.0;
  const auto u2 = MassVector::uniform(2);
  const auto s = ipot(cm(c), u2, u2, ip(beta, 1));
  double q[2][2], v[2] = {0.5, 0.5}, u[2];
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) q[i][j] = std::exp(-c(i, j) / beta);
  for (int i = 0; i < 2; ++i) u[i] = 0.5 / (q[i][0] * v[0] + q[i][1] * v[1]);
  for (int j = 0; j < 2; ++j) v[j] = 0.5 / (q[0][j] * u[0] + q[1][j] * u[1]);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(s.plan->entries(i, j), u[i] * q[i][j] * v[j], 1e-15);
}

TEST(Ipot, ConvergesToExactOnCosineCosts) {
  auto rng = SplitMix64(44);
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = random_cosine(rng, 4, 6);
    const auto u = MassVector::uniform(4);
    const double exact = oracle::exact_uniform_cost(c.entries);
    const auto s = ipot(c, u, u, ip(20, 2000));
    EXPECT_LE(std::abs(s.cost - exact), 1e-3 * exact + 1e-12) << "trial " << trial;
  }
}

TEST(Ipot, ColumnMarginalExactAfterEachSweep) {
  auto rng = SplitMix64(45);
  const auto c = random_cosine(rng, 6, 3);
  const auto u = MassVector::uniform(6);
  const auto s = ipot(c, u, u, ip(20, 50));
  for (std::size_t j = 0; j < 6; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < 6; ++i) col += s.plan->entries(i, j);
    EXPECT_NEAR(col, 1.0 / 6.0, 1e-15);
  }
  EXPECT_EQ(s.iterations_used, 50u);
}

TEST(Ipot, InnerStepsConfigurable) {
  auto rng = SplitMix64(46);
  const auto c = random_cosine(rng, 5, 3);
  const auto u = MassVector::uniform(5);
  auto cfg = ip(20, 30);
  const double one = ipot(c, u, u, cfg).marginal_violation;
  cfg.inner_sinkhorn_steps = 5;
  const double five = ipot(c, u, u, cfg).marginal_violation;
  EXPECT_LE(five, one);
  cfg.inner_sinkhorn_steps = 0;
  EXPECT_THROW(ipot(c, u, u, cfg), Error);
}

TEST(Remd, Examples) {
  EXPECT_EQ(remd(cm(Matrix(3, 3, 0.0))).cost, 0.0);
  EXPECT_EQ(remd(cm(Matrix{{0, 1}, {1, 0}})).cost, 0.0);
  const Matrix c{{0.2, 0.5}, {0.3, 0.1}};
  const auto r = remd(cm(c));
  EXPECT_NEAR(r.cost, 0.15, 1e-15);
  EXPECT_NEAR(oracle::exact_uniform_cost(c), 0.15, 1e-15);
  EXPECT_FALSE(r.plan);
  EXPECT_EQ(r.iterations_used, 1u);
  EXPECT_TRUE(r.converged);
}

TEST(Remd, LowerBoundAndClosedForm) {
  auto rng = SplitMix64(70);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t b = 1 + rng.below(7);
    const Matrix c = oracle::uniform_cost(rng, b);
    const double r = remd(cm(c)).cost;
    EXPECT_NEAR(r, oracle::remd_value(c), 1e-15);
    EXPECT_LE(r, oracle::exact_uniform_cost(c) + 1e-9);
  }
}

TEST(Remd, PositiveHomogeneity) {
  auto rng = SplitMix64(71);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix c = oracle::uniform_cost(rng, 6);
    const double base = remd(cm(c)).cost;
    for (double s : {0.25, 2.0, 1024.0}) EXPECT_EQ(remd(cm(c.scaled(s))).cost, s * base);
    for (double s : {0.3, 7.1}) EXPECT_NEAR(remd(cm(c.scaled(s))).cost, s * base, 1e-15 * s * (1 + base));
  }
}

TEST(Remd, ActiveWeightsReproduceValueWithFirstIndexTies) {
  // Row side wins (rows 0.1 + 0.1 > cols 0.1 + 0.0); row 0 ties at columns 0 and 1.
  const Matrix c{{0.1, 0.1}, {0.0, 0.2}};
  EXPECT_NEAR(oracle::remd_value(c), 0.05, 1e-15);
  const Matrix w = remd_active_weights(cm(c));
  EXPECT_EQ(w, (Matrix{{0.5, 0.0}, {0.5, 0.0}}));
  auto rng = SplitMix64(72);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix c2 = oracle::uniform_cost(rng, 5);
    EXPECT_NEAR(plan_cost(remd_active_weights(cm(c2)), cm(c2)), remd(cm(c2)).cost, 1e-15);
  }
}

TEST(Remd, Errors) {
  EXPECT_THROW(remd(cm(Matrix(2, 3))), Error);
  EXPECT_THROW(remd(cm(Matrix{{0, INFINITY}, {0, 0}})), Error);
}

TEST(OtLoss, IdenticalAndPermutedSets) {
  auto rng = SplitMix64(90);
  const Matrix x = oracle::gaussian(rng, 6, 4);
  OtParams p;
  p.method = OtMethod::kExact;
  EXPECT_NEAR(ot_loss(FeatureBatch(x), FeatureBatch(x), p).loss, 0.0, 1e-15);
  const Matrix xp = oracle::apply_row_permutation(x, oracle::random_permutation(rng, 6));
  EXPECT_NEAR(ot_loss(FeatureBatch(x), FeatureBatch(xp), p).loss, 0.0, 1e-15);
  p.method = OtMethod::kIpot;
  p.ipot.num_iters = 2000;
  EXPECT_LE(ot_loss(FeatureBatch(x), FeatureBatch(x), p).loss, 1e-6);
  p.method = OtMethod::kRemd;
  EXPECT_NEAR(ot_loss(FeatureBatch(x), FeatureBatch(xp), p).loss, 0.0, 1e-15);
}

TEST(OtLoss, OrderingRemdExactSinkhorn) {
  auto rng = SplitMix64(91);
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureBatch t(oracle::gaussian(rng, 6, 8)), s(oracle::gaussian(rng, 6, 8));
    OtParams p;
    p.method = OtMethod::kRemd;
    const double r = ot_loss(t, s, p).loss;
    p.method = OtMethod::kExact;
    const double e = ot_loss(t, s, p).loss;
    p.method = OtMethod::kSinkhorn;
    const double k = ot_loss(t, s, p).loss;
    EXPECT_GE(e - r, -1e-9);
    EXPECT_GE(k - e, -1e-9);
  }
}

TEST(OtLoss, RowPermutationInvariance) {
  auto rng = SplitMix64(92);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t b = 2 + rng.below(7);
    const Matrix t = oracle::gaussian(rng, b, 5), s = oracle::gaussian(rng, b, 5);
    const Matrix sp = oracle::apply_row_permutation(s, oracle::random_permutation(rng, b));
    for (auto m : {OtMethod::kExact, OtMethod::kIpot, OtMethod::kRemd, OtMethod::kSinkhorn}) {
      OtParams p;
      p.method = m;
      EXPECT_NEAR(ot_loss(FeatureBatch(t), FeatureBatch(s), p).loss,
                  ot_loss(FeatureBatch(t), FeatureBatch(sp), p).loss, 1e-8)
          << to_string(m);
    }
  }
}

TEST(OtLoss, PlanCostConsistency) {
  auto rng = SplitMix64(93);
  const FeatureBatch t(oracle::gaussian(rng, 7, 3)), s(oracle::gaussian(rng, 7, 3));
  for (auto m : {OtMethod::kExact, OtMethod::kIpot, OtMethod::kSinkhorn}) {
    OtParams p;
    p.method = m;
    const auto r = ot_loss(t, s, p);
    ASSERT_TRUE(r.solution.plan);
    EXPECT_NEAR(plan_cost(*r.solution.plan, r.cost), r.loss, 1e-10);
    EXPECT_EQ(gradient_weights(r, m), r.solution.plan->entries);
  }
}

TEST(OtMethod, NamesRoundTrip) {
  for (auto m : {OtMethod::kExact, OtMethod::kSinkhorn, OtMethod::kIpot, OtMethod::kRemd}) {
    EXPECT_EQ(parse_ot_method(to_string(m)), m);
  }
  EXPECT_FALSE(parse_ot_method("emd"));
}
