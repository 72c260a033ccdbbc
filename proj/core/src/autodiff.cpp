#include "otkd/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "otkd/errors.hpp"

namespace otkd {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill, bool requires_grad)
    : shape{rows, cols}, values(rows * cols, fill), requires_grad(requires_grad) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad)
    : shape{rows, cols}, values(std::move(values)), requires_grad(requires_grad) {
  if (this->values.size() != rows * cols) {
    throw Error(ErrorCode::kShapeMismatch, "tensor value count does not match its shape");
  }
}

Tensor Tensor::from_matrix(const Matrix& m, bool requires_grad) {
  return Tensor(m.rows(), m.cols(), m.values(), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor(1, 1, value); }

double Tensor::item() const {
  if (values.size() != 1) throw Error(ErrorCode::kShapeMismatch, "item() on a non-scalar tensor");
  return values[0];
}

Matrix Tensor::to_matrix() const { return Matrix(rows(), cols(), values); }

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::constant(Tensor value) {
  value.requires_grad = false;
  value.grad.clear();
  nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(const Matrix& value) { return constant(Tensor::from_matrix(value)); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  value.grad.clear();
  value.requires_grad = requires_grad;
  nodes_.push_back(Node{std::move(value), {}, requires_grad, {}, nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::watch(Tensor& external) {
  Tensor copy(external.rows(), external.cols(), external.values, external.requires_grad);
  nodes_.push_back(Node{std::move(copy), {}, external.requires_grad, {},
                        external.requires_grad ? &external : nullptr});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (Var v : inputs) {
    if (v.tape != this) throw Error(ErrorCode::kShapeMismatch, "op inputs live on different tapes");
    needs = needs || nodes_[v.index].requires_grad;
  }
  value.requires_grad = needs;
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{},
                        nullptr});
  return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(Var v, std::span<const double> g) {
  Node& n = nodes_[v.index];
  if (!n.requires_grad) return;
  if (n.grad.empty()) n.grad.assign(n.value.numel(), 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) n.grad[k] += g[k];
}

void Tape::accumulate_at(Var v, std::size_t k, double g) {
  Node& n = nodes_[v.index];
  if (!n.requires_grad) return;
  if (n.grad.empty()) n.grad.assign(n.value.numel(), 0.0);
  n.grad[k] += g;
}

void Tape::backward(Var root) {
  if (root.tape != this) throw Error(ErrorCode::kShapeMismatch, "root lives on another tape");
  if (nodes_[root.index].value.numel() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "backward() needs a scalar root");
  }
  if (!nodes_[root.index].requires_grad) return;
  for (auto& n : nodes_) n.grad.clear();
  nodes_[root.index].grad.assign(1, 1.0);
  for (std::size_t k = root.index + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) {
      // Backward rules only append to earlier nodes' grads, never to this
      // vector, so a reference is stable here.
      const std::vector<double>& g = n.grad;
      n.backward(*this, g);
    }
    if (n.external != nullptr) {
      Tensor& ext = *n.external;
      if (ext.grad.empty()) ext.grad.assign(ext.numel(), 0.0);
      for (std::size_t i = 0; i < n.grad.size(); ++i) ext.grad[i] += n.grad[i];
    }
  }
}

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorCode::kShapeMismatch,
              std::string(op) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                  " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows()) shape_error("matmul", A, B);
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor out(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A.values[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out.values[i * n + j] += aip * B.values[p * n + j];
    }
  return a.tape->record(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const std::vector<double>& g) {
    const auto& Av = t.value(a).values;
    const auto& Bv = t.value(b).values;
    if (t.requires_grad(a)) {
      std::vector<double> ga(m * k, 0.0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * Bv[p * n + j];
          ga[i * k + p] = s;
        }
      t.accumulate(a, ga);
    }
    if (t.requires_grad(b)) {
      std::vector<double> gb(k * n, 0.0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = Av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
      t.accumulate(b, gb);
    }
  });
}

Var add(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const bool broadcast = B.rows() == 1 && A.rows() != 1 && B.cols() == A.cols();
  if (!broadcast && A.shape != B.shape) shape_error("add", A, B);
  Tensor out(A.rows(), A.cols(), A.values);
  const std::size_t n = A.cols();
  for (std::size_t k = 0; k < out.numel(); ++k) out.values[k] += B.values[broadcast ? k % n : k];
  return a.tape->record(std::move(out), {a, b}, [a, b, broadcast, n](Tape& t, const std::vector<double>& g) {
    t.accumulate(a, g);
    if (!t.requires_grad(b)) return;
    if (!broadcast) {
      t.accumulate(b, g);
      return;
    }
    std::vector<double> gb(n, 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) gb[k % n] += g[k];
    t.accumulate(b, gb);
  });
}

Var sub(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape != B.shape) shape_error("sub", A, B);
  Tensor out(A.rows(), A.cols(), A.values);
  for (std::size_t k = 0; k < out.numel(); ++k) out.values[k] -= B.values[k];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const std::vector<double>& g) {
    t.accumulate(a, g);
    if (!t.requires_grad(b)) return;
    std::vector<double> gb(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) gb[k] = -g[k];
    t.accumulate(b, gb);
  });
}

Var mul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape != B.shape) shape_error("mul", A, B);
  Tensor out(A.rows(), A.cols(), A.values);
  for (std::size_t k = 0; k < out.numel(); ++k) out.values[k] *= B.values[k];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const std::vector<double>& g) {
    const auto& Av = t.value(a).values;
    const auto& Bv = t.value(b).values;
    std::vector<double> tmp(g.size());
    if (t.requires_grad(a)) {
      for (std::size_t k = 0; k < g.size(); ++k) tmp[k] = g[k] * Bv[k];
      t.accumulate(a, tmp);
    }
    if (t.requires_grad(b)) {
      for (std::size_t k = 0; k < g.size(); ++k) tmp[k] = g[k] * Av[k];
      t.accumulate(b, tmp);
    }
  });
}

Var relu(Var a) {
  const Tensor& A = a.value();
  Tensor out(A.rows(), A.cols(), A.values);
  for (double& x : out.values) x = x > 0.0 ? x : 0.0;
  return a.tape->record(std::move(out), {a}, [a](Tape& t, const std::vector<double>& g) {
    const auto& Av = t.value(a).values;
    std::vector<double> ga(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] = Av[k] > 0.0 ? g[k] : 0.0;
    t.accumulate(a, ga);
  });
}

Var leaky_relu(Var a, double slope) {
  const Tensor& A = a.value();
  Tensor out(A.rows(), A.cols(), A.values);
  for (double& x : out.values) x = x > 0.0 ? x : slope * x;
  return a.tape->record(std::move(out), {a}, [a, slope](Tape& t, const std::vector<double>& g) {
    const auto& Av = t.value(a).values;
    std::vector<double> ga(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] = Av[k] > 0.0 ? g[k] : slope * g[k];
    t.accumulate(a, ga);
  });
}

Var row_softmax(Var a) {
  const Tensor& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  Tensor out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = A.values[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, A.values[i * n + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out.values[i * n + j] = std::exp(A.values[i * n + j] - mx);
      s += out.values[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out.values[i * n + j] /= s;
  }
  std::vector<double> y = out.values;
  return a.tape->record(std::move(out), {a}, [a, y = std::move(y), m, n](Tape& t, const std::vector<double>& g) {
    std::vector<double> ga(m * n);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] = y[i * n + j] * (g[i * n + j] - dot);
    }
    t.accumulate(a, ga);
  });
}

Var log(Var a) {
  const Tensor& A = a.value();
  Tensor out(A.rows(), A.cols(), A.values);
  for (double& x : out.values) x = std::log(x);
  return a.tape->record(std::move(out), {a}, [a](Tape& t, const std::vector<double>& g) {
    const auto& Av = t.value(a).values;
    std::vector<double> ga(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] = g[k] / Av[k];
    t.accumulate(a, ga);
  });
}

Var scalar_mul(Var a, double s) {
  const Tensor& A = a.value();
  Tensor out(A.rows(), A.cols(), A.values);
  for (double& x : out.values) x *= s;
  return a.tape->record(std::move(out), {a}, [a, s](Tape& t, const std::vector<double>& g) {
    std::vector<double> ga(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] = g[k] * s;
    t.accumulate(a, ga);
  });
}

Var reduce_sum(Var a) {
  const Tensor& A = a.value();
  double s = 0.0;
  for (double x : A.values) s += x;
  const std::size_t count = A.numel();
  return a.tape->record(Tensor::scalar(s), {a}, [a, count](Tape& t, const std::vector<double>& g) {
    t.accumulate(a, std::vector<double>(count, g[0]));
  });
}

Var reduce_mean(Var a) {
  const Tensor& A = a.value();
  const std::size_t count = A.numel();
  if (count == 0) throw Error(ErrorCode::kShapeMismatch, "reduce_mean of an empty tensor");
  double s = 0.0;
  for (double x : A.values) s += x;
  const double inv = 1.0 / static_cast<double>(count);
  return a.tape->record(Tensor::scalar(s * inv), {a}, [a, count, inv](Tape& t, const std::vector<double>& g) {
    t.accumulate(a, std::vector<double>(count, g[0] * inv));
  });
}

Var l2_normalize_rows(Var a) {
  const Tensor& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  Tensor out(m, n);
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += A.values[i * n + j] * A.values[i * n + j];
    norms[i] = std::sqrt(s);
    if (norms[i] < 1e-12) throw Error(ErrorCode::kZeroNormRow, "cannot normalize a zero row", i);
    for (std::size_t j = 0; j < n; ++j) out.values[i * n + j] = A.values[i * n + j] / norms[i];
  }
  std::vector<double> y = out.values;
  return a.tape->record(std::move(out), {a},
                        [a, y = std::move(y), norms = std::move(norms), m, n](Tape& t, const std::vector<double>& g) {
    // d(x/|x|) = (g - (g . y) y) / |x|
    std::vector<double> ga(m * n);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] = (g[i * n + j] - dot * y[i * n + j]) / norms[i];
    }
    t.accumulate(a, ga);
  });
}

}  // namespace otkd
