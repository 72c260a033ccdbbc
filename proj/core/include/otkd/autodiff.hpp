#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "otkd/matrix.hpp"

namespace otkd {

// Dense rank-2 tensor (scalars are 1x1). `grad` stays empty until a
// backward pass deposits into it.
struct Tensor {
  std::vector<std::size_t> shape{0, 0};
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0, bool requires_grad = false);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values,
         bool requires_grad = false);
  static Tensor from_matrix(const Matrix& m, bool requires_grad = false);
  static Tensor scalar(double value);

  std::size_t rows() const noexcept { return shape[0]; }
  std::size_t cols() const noexcept { return shape[1]; }
  std::size_t numel() const noexcept { return values.size(); }
  bool has_grad() const noexcept { return !grad.empty(); }
  double item() const;
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
  Matrix to_matrix() const;
  void zero_grad() { grad.clear(); }
};

class Tape;

// Handle to a node recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t index = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const { return value().item(); }
};

// Define-by-run reverse-mode tape. Nodes are appended in execution order,
// so every node's inputs precede it. One tape serves one forward/backward
// pass and is not thread-safe.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const std::vector<double>& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that never receives gradient.
  Var constant(Tensor value);
  Var constant(const Matrix& value);
  // Leaf whose gradient is kept on the tape (read it with grad()).
  Var leaf(Tensor value, bool requires_grad = true);
  // Leaf bound to an external tensor (a model parameter). When the tensor
  // requires grad, backward() accumulates into tensor.grad.
  Var watch(Tensor& external);

  // Records an op result. The node requires grad iff any input does.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  // Seeds d(root)/d(root) = 1 for a 1x1 root and propagates.
  void backward(Var root);

  const Tensor& value(Var v) const { return nodes_[v.index].value; }
  const std::vector<double>& grad(Var v) const { return nodes_[v.index].grad; }
  bool requires_grad(Var v) const { return nodes_[v.index].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Used by backward rules.
  void accumulate(Var v, std::span<const double> g);
  void accumulate_at(Var v, std::size_t k, double g);

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    BackwardFn backward;
    Tensor* external = nullptr;
  };
  std::deque<Node> nodes_;  // deque keeps value() references valid as ops are recorded
};

// Core ops. Shape errors raise ShapeMismatch.
Var matmul(Var a, Var b);
// Same shapes, or b is 1 x cols(a) and is broadcast over rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var relu(Var a);        // subgradient 0 at 0
Var leaky_relu(Var a, double slope);  // slope below 0, derivative at 0 is slope
Var row_softmax(Var a);
Var log(Var a);
Var scalar_mul(Var a, double s);
Var reduce_mean(Var a);
Var reduce_sum(Var a);
// Rows scaled to unit length; ZeroNormRow(i) below 1e-12.
Var l2_normalize_rows(Var a);

}  // namespace otkd
