#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "otkd/matrix.hpp"

namespace otkd {

// b x d feature activations from one network stage; rows are examples.
// Construction rejects empty shapes (InvalidParams) and non-finite entries
// (NonFinite).
class FeatureBatch {
 public:
  explicit FeatureBatch(Matrix data);

  std::size_t batch_size() const noexcept { return data_.rows(); }
  std::size_t dim() const noexcept { return data_.cols(); }
  const Matrix& data() const noexcept { return data_; }
  std::span<const double> row(std::size_t i) const { return data_.row(i); }

 private:
  Matrix data_;
};

// Only cosine is produced by this library; the tag leaves room for others.
enum class CostMetric { kCosine, kUser };

std::string_view to_string(CostMetric metric) noexcept;

struct CostMatrix {
  Matrix entries;
  CostMetric metric = CostMetric::kUser;

  std::size_t size() const noexcept { return entries.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return entries(i, j); }
};

// Nonnegative weights summing to one (within 1e-12).
class MassVector {
 public:
  explicit MassVector(std::vector<double> weights);
  static MassVector uniform(std::size_t n);

  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  MassVector() = default;
  std::vector<double> weights_;
};

struct TransportPlan {
  Matrix entries;
  MassVector row_marginal;
  MassVector col_marginal;
};

struct OtSolution {
  double cost = 0.0;
  std::optional<TransportPlan> plan;
  std::size_t iterations_used = 0;
  bool converged = false;
  // L1 deviation of the plan from its prescribed marginals (max over the
  // row and column sides); zero for plan-free solvers.
  double marginal_violation = 0.0;
  // Sum of T log T, reported by the entropic solver only.
  std::optional<double> entropy;
};

enum class ViolationKind { kShape, kNegativeEntry, kRowSum, kColumnSum };

struct PlanViolation {
  ViolationKind kind;
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;     // offending entry or marginal sum
  double expected = 0.0;  // target marginal (0 for negative entries)
};

std::string_view to_string(ViolationKind kind) noexcept;

// C[i,j] = 1 - <x_i, y_j> / (|x_i| |y_j|), clamped to [0, 2].
// Throws DimensionMismatch when the batches disagree in b or d and
// ZeroNormRow(i) when a row norm is below 1e-12 (teacher rows first, then
// student rows offset by b).
CostMatrix cosine_cost(const FeatureBatch& teacher, const FeatureBatch& student);

// Optimal assignment for a square cost matrix. Among equal-cost optima the
// lexicographically smallest permutation (row 0 takes the lowest column
// it can) is returned. Result[i] is the column assigned to row i.
std::vector<std::size_t> optimal_assignment(const Matrix& cost);

// Exact OT with both marginals uniform 1/b. By Birkhoff's theorem an
// optimal plan is (1/b) times a permutation matrix, found by the
// assignment solver above. Throws NonSquare or NonFinite.
OtSolution exact_emd_uniform(const CostMatrix& cost);

std::vector<PlanViolation> validate_plan(const TransportPlan& plan, double tol);

// Frobenius inner product <T, C>. Throws DimensionMismatch.
double plan_cost(const Matrix& plan, const CostMatrix& cost);
double plan_cost(const TransportPlan& plan, const CostMatrix& cost);

// Max over (sum_i |row_i - mu_i|, sum_j |col_j - nu_j|).
double marginal_violation(const Matrix& plan, const MassVector& mu,
                          const MassVector& nu);

Matrix permutation_plan(const std::vector<std::size_t>& assignment);

}  // namespace otkd
