#include <gtest/gtest.h>

#include "error_code.hpp"
#include "oracles.hpp"
#include "otkd/autodiff.hpp"
#include "otkd/gradcheck.hpp"
#include "otkd/losses.hpp"

using namespace otkd;

namespace {

Tensor row(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor(1, n, std::move(v));
}

Tensor random_tensor(SplitMix64& rng, std::size_t r, std::size_t c) {
  return Tensor::from_matrix(oracle::gaussian(rng, r, c));
}

// Evaluates f on a fresh tape at a flat value vector shaped like `like`.
double eval_at(const std::function<Var(Tape&, Var)>& f, const Tensor& like, const std::vector<double>& x) {
  Tape tape;
  return f(tape, tape.constant(Tensor(like.rows(), like.cols(), x))).item();
}

std::vector<double> analytic(const std::function<Var(Tape&, Var)>& f, const Tensor& at) {
  Tape tape;
  Var x = tape.leaf(at);
  tape.backward(f(tape, x));
  return tape.grad(x);
}

}  // namespace

TEST(Tensor, ShapeInvariant) {
  EXPECT_EQ(code_of([] { Tensor(2, 3, std::vector<double>(5)); }), ErrorCode::kShapeMismatch);
  Tensor t(2, 3, 1.5);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_FALSE(t.has_grad());
  EXPECT_EQ(Tensor::scalar(2.0).item(), 2.0);
  EXPECT_EQ(code_of([&] { t.item(); }), ErrorCode::kShapeMismatch);
  const Matrix m{{1, 2}, {3, 4}};
  EXPECT_EQ(Tensor::from_matrix(m).to_matrix(), m);
}

TEST(Relu, ForwardAndSubgradientAtZero) {
  Tape tape;
  Var x = tape.leaf(row({-1.0, 0.0, 2.0}));
  Var y = relu(x);
  EXPECT_EQ(y.value().values, (std::vector<double>{0.0, 0.0, 2.0}));
  tape.backward(reduce_sum(y));  // seed (1,1,1)
  EXPECT_EQ(tape.grad(x), (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(LeakyRelu, ForwardAndGradient) {
  Tape tape;
  Var x = tape.leaf(row({-2.0, 0.0, 3.0}));
  Var y = leaky_relu(x, 0.1);
  EXPECT_DOUBLE_EQ(y.value().values[0], -0.2);
  EXPECT_EQ(y.value().values[1], 0.0);
  EXPECT_EQ(y.value().values[2], 3.0);
  tape.backward(reduce_sum(y));
  EXPECT_EQ(tape.grad(x), (std::vector<double>{0.1, 0.1, 1.0}));
  Tape t2;
  Var z = t2.leaf(row({-1.0, 0.0, 2.0}));
  EXPECT_EQ(leaky_relu(z, 0.0).value().values, relu(z).value().values);
}

TEST(RowSoftmax, Symmetry) {
  Tape tape;
  Var y = row_softmax(tape.constant(row({0.0, 0.0})));
  EXPECT_EQ(y.value().values, (std::vector<double>{0.5, 0.5}));
  Var big = row_softmax(tape.constant(row({1000.0, 1000.0, 1000.0 - std::log(2.0)})));
  EXPECT_NEAR(big.value().values[0], 0.4, 1e-12);
  EXPECT_NEAR(big.value().values[2], 0.2, 1e-12);
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  auto rng = SplitMix64(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor a = random_tensor(rng, 3, 4), b = random_tensor(rng, 4, 2), w = random_tensor(rng, 3, 2);
    auto f_a = [&](Tape& t, Var x) { return reduce_sum(mul(matmul(x, t.constant(b)), t.constant(w))); };
    auto f_b = [&](Tape& t, Var x) { return reduce_sum(mul(matmul(t.constant(a), x), t.constant(w))); };
    const auto num_a = oracle::central_diff([&](const std::vector<double>& x) { return eval_at(f_a, a, x); }, a.values, 1e-5);
    const auto num_b = oracle::central_diff([&](const std::vector<double>& x) { return eval_at(f_b, b, x); }, b.values, 1e-5);
    EXPECT_LE(oracle::max_rel_error(analytic(f_a, a), num_a), 1e-6);
    EXPECT_LE(oracle::max_rel_error(analytic(f_b, b), num_b), 1e-6);
  }
}

TEST(Ops, ForwardValues) {
  Tape tape;
  Var a = tape.constant(Matrix{{1, 2}, {3, 4}});
  Var b = tape.constant(Matrix{{10, 20}});
  EXPECT_EQ(add(a, b).value().to_matrix(), (Matrix{{11, 22}, {13, 24}}));
  EXPECT_EQ(sub(a, a).value().to_matrix(), Matrix(2, 2, 0.0));
  EXPECT_EQ(mul(a, a).value().to_matrix(), (Matrix{{1, 4}, {9, 16}}));
  EXPECT_EQ(matmul(a, a).value().to_matrix(), (Matrix{{7, 10}, {15, 22}}));
  EXPECT_EQ(scalar_mul(a, -2).value().to_matrix(), (Matrix{{-2, -4}, {-6, -8}}));
  EXPECT_EQ(reduce_sum(a).item(), 10.0);
  EXPECT_EQ(reduce_mean(a).item(), 2.5);
  EXPECT_DOUBLE_EQ(log(a).value().values[3], std::log(4.0));
  Var n = l2_normalize_rows(tape.constant(Matrix{{3, 4}}));
  EXPECT_DOUBLE_EQ(n.value().values[0], 0.6);
  EXPECT_DOUBLE_EQ(n.value().values[1], 0.8);
}

TEST(Ops, ShapeErrors) {
  Tape tape;
  Var a = tape.constant(Matrix(2, 3));
  Var b = tape.constant(Matrix(2, 2));
  EXPECT_EQ(code_of([&] { matmul(a, a); }), ErrorCode::kShapeMismatch);
  EXPECT_EQ(code_of([&] { add(a, b); }), ErrorCode::kShapeMismatch);
  EXPECT_EQ(code_of([&] { mul(a, b); }), ErrorCode::kShapeMismatch);
  EXPECT_EQ(code_of([&] { tape.backward(a); }), ErrorCode::kShapeMismatch);
  EXPECT_EQ(code_of([&] { l2_normalize_rows(tape.constant(Matrix{{1, 1}, {0, 0}})); }), ErrorCode::kZeroNormRow);
  try {
    l2_normalize_rows(tape.constant(Matrix{{1, 1}, {0, 0}}));
  } catch (const Error& e) {
    EXPECT_EQ(e.index(), 1u);
  }
  Tape other;
  Var c = other.constant(Matrix(2, 3));
  EXPECT_EQ(code_of([&] { add(a, c); }), ErrorCode::kShapeMismatch);
}

TEST(Tape, ConstantsReceiveNoGradient) {
  Tape tape;
  Var c = tape.constant(Matrix{{1, 2}});
  Var x = tape.leaf(row({3.0, 4.0}));
  Var y = reduce_sum(mul(c, x));
  EXPECT_FALSE(tape.requires_grad(c));
  EXPECT_TRUE(tape.requires_grad(y));
  tape.backward(y);
  EXPECT_TRUE(tape.grad(c).empty());
  EXPECT_EQ(tape.grad(x), (std::vector<double>{1.0, 2.0}));
}

TEST(Tape, WatchAccumulatesIntoExternalTensor) {
  Tensor w(1, 2, std::vector<double>{1.0, -1.0}, true);
  for (int pass = 1; pass <= 2; ++pass) {
    Tape tape;
    Var x = tape.watch(w);
    tape.backward(reduce_sum(mul(x, x)));
    EXPECT_EQ(w.grad, (std::vector<double>{2.0 * pass, -2.0 * pass}));
  }
  w.zero_grad();
  EXPECT_FALSE(w.has_grad());
  Tensor frozen(1, 2, 1.0, false);
  Tape tape;
  Var x = tape.watch(frozen);
  Var y = reduce_sum(x);
  EXPECT_FALSE(tape.requires_grad(y));
}

TEST(Tape, BackwardDoesNotMutateForwardValues) {
  auto rng = SplitMix64(9);
  Tape tape;
  Var x = tape.leaf(random_tensor(rng, 4, 3));
  Var h = leaky_relu(matmul(x, tape.constant(random_tensor(rng, 3, 3))), 0.1);
  Var s = row_softmax(h);
  Var loss = reduce_mean(log(s));
  std::vector<std::vector<double>> before;
  for (std::size_t k = 0; k < tape.size(); ++k) before.push_back(tape.value(Var{&tape, k}).values);
  tape.backward(loss);
  for (std::size_t k = 0; k < tape.size(); ++k) EXPECT_EQ(tape.value(Var{&tape, k}).values, before[k]);
}

TEST(Tape, SharedSubexpressionGradientsAdd) {
  Tape tape;
  Var x = tape.leaf(row({3.0}));
  Var y = add(mul(x, x), x);  // x^2 + x
  tape.backward(reduce_sum(y));
  EXPECT_EQ(tape.grad(x), (std::vector<double>{7.0}));
}

TEST(GradCheck, SumOfSquares) {
  ScalarFn f = [](Tape&, Var x) { return reduce_sum(mul(x, x)); };
  const Tensor p = row({1.0, 2.0});
  EXPECT_EQ(analytic(f, p), (std::vector<double>{2.0, 4.0}));
  const auto r = grad_check(f, p, 1e-5, 1e-8);
  EXPECT_TRUE(r.passed);
  EXPECT_LE(r.max_abs_error, 1e-8);
  EXPECT_EQ(r.checked, 2u);
}

TEST(GradCheck, DetectsWrongGradient) {
  // Records x*x but claims the gradient is x.
  ScalarFn f = [](Tape& t, Var x) {
    Tensor out = x.value();
    for (double& v : out.values) v *= v;
    Var y = t.record(out, {x}, [x](Tape& tape, const std::vector<double>& g) {
      std::vector<double> d(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) d[k] = g[k] * x.value().values[k];
      tape.accumulate(x, d);
    });
    return reduce_sum(y);
  };
  const auto r = grad_check(f, row({1.0, 2.0, 3.0}), 1e-5, 1e-6);
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(r.failing, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_NEAR(r.max_rel_error, 0.5, 1e-6);
}

TEST(GradCheck, CrossEntropySelfTest) {
  auto rng = SplitMix64(2);
  Tensor labels(5, 3, 0.0);
  for (std::size_t i = 0; i < 5; ++i) labels.values[i * 3 + rng.below(3)] = 1.0;
  ScalarFn f = [&](Tape& t, Var x) { return cross_entropy_loss(x, t.constant(labels)); };
  const auto r = grad_check(f, random_tensor(rng, 5, 3), 1e-5, 1e-6);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(GradCheck, SuiteCoversEveryOpAndPasses) {
  const auto checks = run_gradcheck_suite(0, 10);
  std::vector<std::string> names;
  for (const auto& c : checks) {
    names.push_back(c.op);
    EXPECT_TRUE(c.passed) << c.op << " worst " << c.worst_rel_error;
    EXPECT_EQ(c.points, 10u);
    EXPECT_LE(c.tolerance, c.op == "ot_ipot" ? 1e-3 : 1e-4);
  }
  for (const char* op : {"matmul", "add_broadcast", "relu", "leaky_relu", "row_softmax", "log", "scalar_mul",
                         "reduce_mean", "l2_normalize_rows", "cross_entropy", "kd_loss", "ot_exact",
                         "ot_remd", "ot_ipot"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), op), names.end()) << op;
  }
}
