#include "otkd/ot_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "otkd/errors.hpp"

namespace otkd {

namespace {

constexpr double kMinRowNorm = 1e-12;
constexpr double kMassTolerance = 1e-12;

double row_norm(std::span<const double> row) {
  double s = 0.0;
  for (double x : row) s += x * x;
  return std::sqrt(s);
}

void require_square_finite(const Matrix& m) {
  if (!m.is_square() || m.rows() == 0) {
    throw Error(ErrorCode::kNonSquare,
                "cost matrix is " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()));
  }
  if (!m.all_finite()) throw Error(ErrorCode::kNonFinite, "cost matrix has non-finite entries");
}

// Kuhn augmenting path restricted to tight edges, rows >= first_free_row and
// columns not locked.
bool augment(std::size_t row, const std::vector<std::vector<std::size_t>>& tight,
             const std::vector<bool>& locked_col, std::vector<std::size_t>& owner,
             std::vector<std::size_t>& match, std::vector<bool>& seen) {
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  for (std::size_t j : tight[row]) {
    if (locked_col[j] || seen[j]) continue;
    seen[j] = true;
    if (owner[j] == kNone || augment(owner[j], tight, locked_col, owner, match, seen)) {
      owner[j] = row;
      match[row] = j;
      return true;
    }
  }
  return false;
}

}  // namespace

FeatureBatch::FeatureBatch(Matrix data) : data_(std::move(data)) {
  if (data_.rows() == 0 || data_.cols() == 0) {
    throw Error(ErrorCode::kInvalidParams, "feature batch must have b >= 1 and d >= 1");
  }
  if (!data_.all_finite()) throw Error(ErrorCode::kNonFinite, "feature batch has non-finite entries");
}

std::string_view to_string(CostMetric metric) noexcept {
  switch (metric) {
    case CostMetric::kCosine: return "cosine";
    case CostMetric::kUser: return "user";
  }
  return "unknown";
}

MassVector::MassVector(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw Error(ErrorCode::kInvalidParams, "mass vector is empty");
  double total = 0.0;
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCode::kInvalidParams, "mass vector has a negative or non-finite weight");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > kMassTolerance) {
    throw Error(ErrorCode::kInvalidParams, "mass vector sums to " + std::to_string(total));
  }
}

MassVector MassVector::uniform(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidParams, "mass vector is empty");
  MassVector m;
  m.weights_.assign(n, 1.0 / static_cast<double>(n));
  return m;
}

std::string_view to_string(ViolationKind kind) noexcept {
  switch (kind) {
    case ViolationKind::kShape: return "Shape";
    case ViolationKind::kNegativeEntry: return "NegativeEntry";
    case ViolationKind::kRowSum: return "RowSum";
    case ViolationKind::kColumnSum: return "ColumnSum";
  }
  return "unknown";
}

CostMatrix cosine_cost(const FeatureBatch& teacher, const FeatureBatch& student) {
  const std::size_t b = teacher.batch_size();
  if (teacher.dim() != student.dim() || b != student.batch_size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "teacher is " + std::to_string(b) + "x" + std::to_string(teacher.dim()) +
                    ", student is " + std::to_string(student.batch_size()) + "x" +
                    std::to_string(student.dim()));
  }
  std::vector<double> tnorm(b), snorm(b);
  for (std::size_t i = 0; i < b; ++i) {
    tnorm[i] = row_norm(teacher.row(i));
    if (tnorm[i] < kMinRowNorm) throw Error(ErrorCode::kZeroNormRow, "teacher row has zero norm", i);
  }
  for (std::size_t j = 0; j < b; ++j) {
    snorm[j] = row_norm(student.row(j));
    if (snorm[j] < kMinRowNorm) {
      throw Error(ErrorCode::kZeroNormRow, "student row has zero norm", b + j);
    }
  }
  CostMatrix cost{Matrix(b, b), CostMetric::kCosine};
  for (std::size_t i = 0; i < b; ++i) {
    const auto x = teacher.row(i);
    for (std::size_t j = 0; j < b; ++j) {
      const auto y = student.row(j);
      double dot = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) dot += x[k] * y[k];
      const double c = 1.0 - dot / (tnorm[i] * snorm[j]);
      cost.entries(i, j) = std::clamp(c, 0.0, 2.0);
    }
  }
  return cost;
}

std::vector<std::size_t> optimal_assignment(const Matrix& cost) {
  require_square_finite(cost);
  const std::size_t n = cost.rows();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Shortest augmenting path Hungarian method with potentials, 1-based
  // internally; p[j] is the row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> match(n), owner(n);
  for (std::size_t j = 1; j <= n; ++j) {
    match[p[j] - 1] = j - 1;
    owner[j - 1] = p[j] - 1;
  }

  // Every optimal assignment lives on edges that are tight for the final
  // dual potentials. Walk rows in order and move each one to the lowest
  // tight column that still admits a perfect matching of the rest.
  const double tol = 1e-11 * std::max(1.0, cost.max_abs());
  std::vector<std::vector<std::size_t>> tight(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double reduced = cost(i, j) - u[i + 1] - v[j + 1];
      if (reduced <= tol || j == match[i]) tight[i].push_back(j);
    }
  }
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<bool> locked(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : tight[i]) {
      if (j >= match[i]) break;
      if (locked[j]) continue;
      // Tentatively give column j to row i and re-seat its previous owner.
      auto trial_match = match;
      auto trial_owner = owner;
      const std::size_t displaced = trial_owner[j];
      const std::size_t freed = trial_match[i];
      trial_owner[freed] = kNone;
      trial_owner[j] = i;
      trial_match[i] = j;
      auto trial_locked = locked;
      trial_locked[j] = true;
      std::vector<bool> seen(n, false);
      if (augment(displaced, tight, trial_locked, trial_owner, trial_match, seen)) {
        match = std::move(trial_match);
        owner = std::move(trial_owner);
        break;
      }
    }
    locked[match[i]] = true;
  }
  return match;
}

Matrix permutation_plan(const std::vector<std::size_t>& assignment) {
  const std::size_t n = assignment.size();
  Matrix plan(n, n, 0.0);
  const double mass = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) plan(i, assignment[i]) = mass;
  return plan;
}

OtSolution exact_emd_uniform(const CostMatrix& cost) {
  const auto assignment = optimal_assignment(cost.entries);
  const std::size_t n = assignment.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost(i, assignment[i]);

  OtSolution out;
  out.cost = total / static_cast<double>(n);
  out.plan = TransportPlan{permutation_plan(assignment), MassVector::uniform(n),
                           MassVector::uniform(n)};
  out.iterations_used = 1;
  out.converged = true;
  out.marginal_violation =
      marginal_violation(out.plan->entries, out.plan->row_marginal, out.plan->col_marginal);
  return out;
}

std::vector<PlanViolation> validate_plan(const TransportPlan& plan, double tol) {
  std::vector<PlanViolation> out;
  const Matrix& t = plan.entries;
  if (t.rows() != plan.row_marginal.size() || t.cols() != plan.col_marginal.size()) {
    out.push_back({ViolationKind::kShape, t.rows(), t.cols(), 0.0, 0.0});
    return out;
  }
  std::vector<double> col_sums(t.cols(), 0.0);
  for (std::size_t i = 0; i < t.rows(); ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < t.cols(); ++j) {
      const double x = t(i, j);
      if (!(x >= -tol)) out.push_back({ViolationKind::kNegativeEntry, i, j, x, 0.0});
      row_sum += x;
      col_sums[j] += x;
    }
    if (!(std::abs(row_sum - plan.row_marginal[i]) <= tol)) {
      out.push_back({ViolationKind::kRowSum, i, 0, row_sum, plan.row_marginal[i]});
    }
  }
  for (std::size_t j = 0; j < t.cols(); ++j) {
    if (!(std::abs(col_sums[j] - plan.col_marginal[j]) <= tol)) {
      out.push_back({ViolationKind::kColumnSum, 0, j, col_sums[j], plan.col_marginal[j]});
    }
  }
  return out;
}

double plan_cost(const Matrix& plan, const CostMatrix& cost) {
  if (plan.rows() != cost.entries.rows() || plan.cols() != cost.entries.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "plan and cost shapes differ");
  }
  double total = 0.0;
  const auto t = plan.data();
  const auto c = cost.entries.data();
  for (std::size_t k = 0; k < t.size(); ++k) total += t[k] * c[k];
  return total;
}

double plan_cost(const TransportPlan& plan, const CostMatrix& cost) {
  return plan_cost(plan.entries, cost);
}

double marginal_violation(const Matrix& plan, const MassVector& mu, const MassVector& nu) {
  if (plan.rows() != mu.size() || plan.cols() != nu.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "plan and marginal sizes differ");
  }
  std::vector<double> col_sums(plan.cols(), 0.0);
  double row_dev = 0.0;
  for (std::size_t i = 0; i < plan.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < plan.cols(); ++j) {
      s += plan(i, j);
      col_sums[j] += plan(i, j);
    }
    row_dev += std::abs(s - mu[i]);
  }
  double col_dev = 0.0;
  for (std::size_t j = 0; j < plan.cols(); ++j) col_dev += std::abs(col_sums[j] - nu[j]);
  return std::max(row_dev, col_dev);
}

}  // namespace otkd
