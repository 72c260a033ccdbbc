#include <gtest/gtest.h>

#include "error_code.hpp"
#include "oracles.hpp"
#include "otkd/losses.hpp"

using namespace otkd;

namespace {

Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t k) {
  Tensor t(labels.size(), k, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) t.values[i * k + labels[i]] = 1.0;
  return t;
}

double ce(const Matrix& logits, const std::vector<std::size_t>& labels) {
  Tape tape;
  return cross_entropy_loss(tape.constant(logits), tape.constant(one_hot(labels, logits.cols()))).item();
}

double kd(const Matrix& s, const Matrix& t, double temp) {
  Tape tape;
  return kd_loss(tape.constant(s), tape.constant(t), temp).item();
}

OtParams params(OtMethod m) {
  OtParams p;
  p.method = m;
  return p;
}

// Smallest gap between the best and second-best entry of every row and
// column, plus the gap between the two REMD sides.
double remd_uniqueness(const Matrix& c) {
  const std::size_t n = c.rows();
  double gap = std::abs(oracle::remd_value(c) * n - [&] {
    double rows = 0.0, cols = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = c(i, 0), k = c(0, i);
      for (std::size_t j = 1; j < n; ++j) {
        r = std::min(r, c(i, j));
        k = std::min(k, c(j, i));
      }
      rows += r;
      cols += k;
    }
    return std::min(rows, cols);
  }());
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r(c.row(i).begin(), c.row(i).end()), k(n);
    for (std::size_t j = 0; j < n; ++j) k[j] = c(j, i);
    std::sort(r.begin(), r.end());
    std::sort(k.begin(), k.end());
    gap = std::min({gap, r[1] - r[0], k[1] - k[0]});
  }
  return gap;
}

std::vector<double> node_gradient(const Matrix& teacher, const Matrix& student, const OtParams& p) {
  Tape tape;
  Var s = tape.leaf(Tensor::from_matrix(student));
  tape.backward(ot_loss_node(tape.constant(teacher), s, p));
  return tape.grad(s);
}

Matrix reshape(const std::vector<double>& x, std::size_t r, std::size_t c) { return Matrix(r, c, x); }

}  // namespace

TEST(CrossEntropy, UniformLogits) {
  EXPECT_NEAR(ce(Matrix(3, 4, 0.7), {0, 1, 3}), std::log(4.0), 1e-15);
}

TEST(CrossEntropy, DominantTrueClass) {
  const double v = ce(Matrix{{50, 0, 0}, {0, 0, 50}}, {0, 2});
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, 1e-20);
}

TEST(CrossEntropy, MatchesScalarRecomputation) {
  auto rng = SplitMix64(17);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix logits = oracle::gaussian(rng, 5, 3).scaled(3.0);
    std::vector<std::size_t> labels(5);
    for (auto& l : labels) l = rng.below(3);
    EXPECT_NEAR(ce(logits, labels), oracle::cross_entropy(logits, labels), 1e-13);
  }
}

TEST(CrossEntropy, Errors) {
  Tape tape;
  EXPECT_EQ(code_of([&] { cross_entropy_loss(tape.constant(Matrix(2, 3)), tape.constant(Matrix(2, 2))); }),
            ErrorCode::kShapeMismatch);
  EXPECT_EQ(code_of([&] { cross_entropy_loss(tape.constant(Matrix(1, 2)), tape.constant(Matrix{{0.5, 0.5}})); }),
            ErrorCode::kInvalidParams);
}

TEST(Kd, IdenticalLogitsGiveZero) {
  auto rng = SplitMix64(18);
  const Matrix s = oracle::gaussian(rng, 4, 5);
  EXPECT_NEAR(kd(s, s, 4.0), 0.0, 1e-15);
  // Softmax is shift invariant per row, so KD is zero iff the tempered
  // distributions agree.
  Matrix shifted = s;
  for (std::size_t j = 0; j < 5; ++j) shifted(2, j) += 3.0;
  EXPECT_NEAR(kd(shifted, s, 4.0), 0.0, 1e-14);
  Matrix perturbed = s;
  perturbed(1, 1) += 0.1;
  EXPECT_GT(kd(perturbed, s, 4.0), 0.0);
}

TEST(Kd, TwoClassClosedForm) {
  const double p = 1.0 / (1.0 + std::exp(-2.0));  // softmax(2,0)[0]
  const double q = 1.0 - p;                       // softmax(0,2)[0]
  const double expected = p * std::log(p / q) + q * std::log(q / p);
  EXPECT_NEAR(kd(Matrix{{0, 2}}, Matrix{{2, 0}}, 1.0), expected, 1e-15);
}

TEST(Kd, NonnegativeAndMatchesOracle) {
  auto rng = SplitMix64(19);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix s = oracle::gaussian(rng, 6, 4).scaled(4.0), t = oracle::gaussian(rng, 6, 4).scaled(4.0);
    const double temp = 0.5 + 4.0 * rng.uniform();
    const double v = kd(s, t, temp);
    EXPECT_GE(v, 0.0);
    EXPECT_NEAR(v, oracle::kd(s, t, temp), 1e-12 * (1 + v));
  }
}

TEST(Kd, NoGradientToTeacher) {
  Tape tape;
  Var s = tape.leaf(Tensor::from_matrix(Matrix{{1, 2, 3}}));
  Var t = tape.leaf(Tensor::from_matrix(Matrix{{3, 2, 1}}));
  tape.backward(kd_loss(s, t, 2.0));
  EXPECT_FALSE(tape.grad(s).empty());
  for (double g : tape.grad(t)) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(code_of([&] { kd_loss(s, t, 0.0); }), ErrorCode::kInvalidParams);
  EXPECT_EQ(code_of([&] { kd_loss(s, tape.constant(Matrix(1, 2)), 1.0); }), ErrorCode::kShapeMismatch);
}

TEST(OtLossNode, CoincidentSetsAreStationary) {
  auto rng = SplitMix64(30);
  const Matrix x = oracle::gaussian(rng, 5, 4);
  Tape tape;
  Var s = tape.leaf(Tensor::from_matrix(x));
  Var loss = ot_loss_node(tape.constant(x), s, params(OtMethod::kExact));
  EXPECT_NEAR(loss.item(), 0.0, 1e-15);
  tape.backward(loss);
  for (double g : tape.grad(s)) EXPECT_NEAR(g, 0.0, 1e-7);
}

TEST(OtLossNode, ExactGradientMatchesResolvedFiniteDifferences) {
  auto rng = SplitMix64(31);
  int checked = 0;
  while (checked < 10) {
    const Matrix t = oracle::gaussian(rng, 3, 4), s = oracle::gaussian(rng, 3, 4);
    if (oracle::assignment_margin(oracle::cosine_matrix(t, s)) < 0.05) continue;
    ++checked;
    const auto num = oracle::central_diff(
        [&](const std::vector<double>& x) { return oracle::exact_uniform_cost(oracle::cosine_matrix(t, reshape(x, 3, 4))); },
        s.values(), 1e-5);
    EXPECT_LE(oracle::max_rel_error(node_gradient(t, s, params(OtMethod::kExact)), num), 1e-4);
  }
}

TEST(OtLossNode, RemdSubgradientMatchesFiniteDifferences) {
  auto rng = SplitMix64(32);
  int checked = 0;
  while (checked < 10) {
    const Matrix t = oracle::gaussian(rng, 3, 4), s = oracle::gaussian(rng, 3, 4);
    if (remd_uniqueness(oracle::cosine_matrix(t, s)) < 0.05) continue;
    ++checked;
    const auto num = oracle::central_diff(
        [&](const std::vector<double>& x) { return oracle::remd_value(oracle::cosine_matrix(t, reshape(x, 3, 4))); },
        s.values(), 1e-5);
    EXPECT_LE(oracle::max_rel_error(node_gradient(t, s, params(OtMethod::kRemd)), num), 1e-4);
  }
}

// The envelope gradient is exact only once IPOT has reached the vertex
// plan. At beta = 20 that takes longer the closer the runner-up assignment
// is, so near-ties get a larger iteration budget.
TEST(OtLossNode, IpotEnvelopeGradient) {
  auto rng = SplitMix64(33);
  int checked = 0;
  while (checked < 10) {
    const Matrix t = oracle::gaussian(rng, 3, 4), s = oracle::gaussian(rng, 3, 4);
    const double margin = oracle::assignment_margin(oracle::cosine_matrix(t, s));
    if (margin < 0.05) continue;
    ++checked;
    auto p = params(OtMethod::kIpot);
    p.ipot.num_iters = margin < 0.1 ? 20000 : 5000;
    const auto num = oracle::central_diff(
        [&](const std::vector<double>& x) {
          return ot_loss(FeatureBatch(t), FeatureBatch(reshape(x, 3, 4)), p).loss;
        },
        s.values(), 1e-4);
    EXPECT_LE(oracle::max_rel_error(node_gradient(t, s, p), num), 1e-4) << "margin " << margin;
  }
}

TEST(OtLossNode, ForwardBitIdenticalToSolver) {
  auto rng = SplitMix64(34);
  for (auto m : {OtMethod::kExact, OtMethod::kSinkhorn, OtMethod::kIpot, OtMethod::kRemd}) {
    const Matrix t = oracle::gaussian(rng, 6, 5), s = oracle::gaussian(rng, 6, 5);
    Tape tape;
    OtLossResult captured;
    Var v = ot_loss_node(tape.constant(t), tape.leaf(Tensor::from_matrix(s)), params(m), &captured);
    const double direct = ot_loss(FeatureBatch(t), FeatureBatch(s), params(m)).loss;
    EXPECT_EQ(v.item(), direct) << to_string(m);
    EXPECT_EQ(captured.loss, direct);
  }
}

TEST(OtLossNode, BothSidesReceiveGradientWhenRequested) {
  auto rng = SplitMix64(35);
  Tape tape;
  Var t = tape.leaf(Tensor::from_matrix(oracle::gaussian(rng, 4, 3)));
  Var s = tape.leaf(Tensor::from_matrix(oracle::gaussian(rng, 4, 3)));
  tape.backward(ot_loss_node(t, s, params(OtMethod::kExact)));
  EXPECT_EQ(tape.grad(t).size(), 12u);
  EXPECT_EQ(tape.grad(s).size(), 12u);
}

TEST(OtLossNode, PropagatesSolverErrors) {
  Tape tape;
  EXPECT_EQ(code_of([&] {
              ot_loss_node(tape.constant(Matrix{{1, 0}, {0, 0}}), tape.constant(Matrix{{1, 0}, {0, 1}}),
                           params(OtMethod::kRemd));
            }),
            ErrorCode::kZeroNormRow);
  EXPECT_EQ(code_of([&] { ot_loss_node(tape.constant(Matrix(2, 2, 1)), tape.constant(Matrix(3, 2, 1)), params(OtMethod::kExact)); }),
            ErrorCode::kDimensionMismatch);
}

TEST(FitnetsL2, MeanSquaredDifference) {
  Tape tape;
  Var t = tape.constant(Matrix{{1, 2}, {3, 4}});
  Var s = tape.leaf(Tensor::from_matrix(Matrix{{1, 0}, {3, 7}}));
  Var loss = fitnets_l2_loss(t, s);
  EXPECT_DOUBLE_EQ(loss.item(), (4.0 + 9.0) / 4.0);
  tape.backward(loss);
  EXPECT_EQ(tape.grad(s), (std::vector<double>{0.0, -1.0, 0.0, 1.5}));
  EXPECT_EQ(code_of([&] { fitnets_l2_loss(t, tape.constant(Matrix(2, 3))); }), ErrorCode::kShapeMismatch);
}
