#include "otkd/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "otkd/errors.hpp"

namespace otkd {

namespace {

// Below this the scaling vectors in the standard Sinkhorn form would need
// magnitudes beyond ~1e100, so the log-domain form is used instead.
constexpr double kLogDomainKernelFloor = 1e-100;

void check_problem(const CostMatrix& cost, const MassVector& mu, const MassVector& nu) {
  const Matrix& c = cost.entries;
  if (!c.is_square() || c.rows() == 0) throw Error(ErrorCode::kNonSquare, "cost matrix must be square");
  if (!c.all_finite()) throw Error(ErrorCode::kNonFinite, "cost matrix has non-finite entries");
  if (mu.size() != c.rows() || nu.size() != c.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "marginal sizes do not match the cost matrix");
  }
}

double entropy_of(const Matrix& t) {
  double h = 0.0;
  for (double x : t.data()) {
    if (x > 0.0) h += x * std::log(x);
  }
  return h;
}

double log_sum_exp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

OtSolution finish(const CostMatrix& cost, Matrix plan, const MassVector& mu, const MassVector& nu,
                  std::size_t iters, bool converged, bool with_entropy) {
  OtSolution out;
  out.cost = plan_cost(plan, cost);
  out.iterations_used = iters;
  out.converged = converged;
  out.marginal_violation = marginal_violation(plan, mu, nu);
  if (with_entropy) out.entropy = entropy_of(plan);
  out.plan = TransportPlan{std::move(plan), mu, nu};
  return out;
}

struct ScalingOutcome {
  bool ok = false;
  Matrix plan;
  std::size_t iters = 0;
  bool converged = false;
};

ScalingOutcome sinkhorn_scaling(const CostMatrix& cost, const MassVector& mu, const MassVector& nu,
                                const SinkhornConfig& cfg) {
  const std::size_t n = cost.size();
  Matrix kernel(n, n);
  for (std::size_t k = 0; k < kernel.size(); ++k) {
    kernel.data()[k] = std::exp(-cost.entries.data()[k] / cfg.epsilon);
  }
  std::vector<double> u(n, 1.0), v(n, 1.0), kv(n), ktu(n);
  auto apply = [&](const std::vector<double>& x, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += kernel(i, j) * x[j];
      out[i] = s;
    }
  };
  auto apply_t = [&](const std::vector<double>& x, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out[j] += kernel(i, j) * x[i];
  };

  ScalingOutcome res;
  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    apply(v, kv);
    for (std::size_t i = 0; i < n; ++i) {
      if (!(kv[i] > 0.0) || !std::isfinite(kv[i])) return res;
      u[i] = mu[i] / kv[i];
      if (!std::isfinite(u[i])) return res;
    }
    apply_t(u, ktu);
    for (std::size_t j = 0; j < n; ++j) {
      if (!(ktu[j] > 0.0) || !std::isfinite(ktu[j])) return res;
      v[j] = nu[j] / ktu[j];
      if (!std::isfinite(v[j])) return res;
    }
    apply(v, kv);
    double violation = 0.0;
    for (std::size_t i = 0; i < n; ++i) violation += std::abs(u[i] * kv[i] - mu[i]);
    if (!std::isfinite(violation)) return res;
    res.iters = it;
    if (violation <= cfg.marginal_tol) {
      res.converged = true;
      break;
    }
  }
  res.plan = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) res.plan(i, j) = u[i] * kernel(i, j) * v[j];
  res.ok = res.plan.all_finite();
  return res;
}

ScalingOutcome sinkhorn_log(const CostMatrix& cost, const MassVector& mu, const MassVector& nu,
                            const SinkhornConfig& cfg) {
  const std::size_t n = cost.size();
  const double eps = cfg.epsilon;
  std::vector<double> f(n, 0.0), g(n, 0.0), log_mu(n), log_nu(n), scratch(n);
  for (std::size_t i = 0; i < n; ++i) {
    log_mu[i] = std::log(mu[i]);
    log_nu[i] = std::log(nu[i]);
  }
  auto row_lse = [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) scratch[j] = (g[j] - cost(i, j)) / eps;
    return log_sum_exp(scratch);
  };
  auto col_lse = [&](std::size_t j) {
    for (std::size_t i = 0; i < n; ++i) scratch[i] = (f[i] - cost(i, j)) / eps;
    return log_sum_exp(scratch);
  };

  ScalingOutcome res;
  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) f[i] = eps * (log_mu[i] - row_lse(i));
    for (std::size_t j = 0; j < n; ++j) g[j] = eps * (log_nu[j] - col_lse(j));
    double violation = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += std::exp((f[i] + g[j] - cost(i, j)) / eps);
      violation += std::abs(s - mu[i]);
    }
    if (std::isnan(violation)) return res;
    res.iters = it;
    if (violation <= cfg.marginal_tol) {
      res.converged = true;
      break;
    }
  }
  res.plan = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) res.plan(i, j) = std::exp((f[i] + g[j] - cost(i, j)) / eps);
  res.ok = res.plan.all_finite();
  return res;
}

}  // namespace

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(ErrorCode::kInvalidParams, "epsilon must be > 0");
  if (max_iters < 1) throw Error(ErrorCode::kInvalidParams, "max_iters must be >= 1");
  if (!(marginal_tol > 0.0)) throw Error(ErrorCode::kInvalidParams, "marginal_tol must be > 0");
}

void IpotConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error(ErrorCode::kInvalidParams, "beta must be > 0");
  if (num_iters < 1) throw Error(ErrorCode::kInvalidParams, "num_iters must be >= 1");
  if (inner_sinkhorn_steps < 1) throw Error(ErrorCode::kInvalidParams, "inner_sinkhorn_steps must be >= 1");
  if (!(marginal_tol > 0.0)) throw Error(ErrorCode::kInvalidParams, "marginal_tol must be > 0");
}

OtSolution sinkhorn_rot(const CostMatrix& cost, const MassVector& mu, const MassVector& nu,
                        const SinkhornConfig& cfg) {
  cfg.validate();
  check_problem(cost, mu, nu);

  bool use_log = cfg.domain == SinkhornDomain::kLog;
  if (cfg.domain == SinkhornDomain::kAuto) {
    double max_cost = 0.0;
    for (double c : cost.entries.data()) max_cost = std::max(max_cost, c);
    use_log = std::exp(-max_cost / cfg.epsilon) < kLogDomainKernelFloor;
  }
  if (!use_log) {
    auto res = sinkhorn_scaling(cost, mu, nu, cfg);
    if (res.ok) return finish(cost, std::move(res.plan), mu, nu, res.iters, res.converged, true);
    if (cfg.domain == SinkhornDomain::kStandard) {
      throw Error(ErrorCode::kNumericalUnderflow,
                  "Sinkhorn kernel underflowed; epsilon " + std::to_string(cfg.epsilon) +
                      " is too small for the scaling form");
    }
  }
  auto res = sinkhorn_log(cost, mu, nu, cfg);
  if (!res.ok) {
    throw Error(ErrorCode::kNumericalUnderflow,
                "log-domain Sinkhorn produced non-finite potentials; epsilon " +
                    std::to_string(cfg.epsilon) + " is too small");
  }
  return finish(cost, std::move(res.plan), mu, nu, res.iters, res.converged, true);
}

OtSolution ipot(const CostMatrix& cost, const MassVector& mu, const MassVector& nu,
                const IpotConfig& cfg) {
  cfg.validate();
  check_problem(cost, mu, nu);
  const std::size_t n = cost.size();

  Matrix kernel(n, n);
  for (std::size_t k = 0; k < kernel.size(); ++k) {
    kernel.data()[k] = std::exp(-cost.entries.data()[k] / cfg.beta);
  }
  Matrix plan(n, n, 1.0);
  Matrix q(n, n);
  std::vector<double> u(n, 1.0), v(n, 1.0 / static_cast<double>(n));
  const auto underflow = [&] {
    return Error(ErrorCode::kNumericalUnderflow,
                 "IPOT scaling hit a zero or non-finite sum; beta " + std::to_string(cfg.beta) +
                     " is too small");
  };

  for (std::size_t t = 0; t < cfg.num_iters; ++t) {
    for (std::size_t k = 0; k < q.size(); ++k) q.data()[k] = kernel.data()[k] * plan.data()[k];
    for (std::size_t step = 0; step < cfg.inner_sinkhorn_steps; ++step) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += q(i, j) * v[j];
        if (!(s > 0.0) || !std::isfinite(s)) throw underflow();
        u[i] = mu[i] / s;
      }
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += q(i, j) * u[i];
        if (!(s > 0.0) || !std::isfinite(s)) throw underflow();
        v[j] = nu[j] / s;
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) plan(i, j) = u[i] * q(i, j) * v[j];
  }
  if (!plan.all_finite()) throw underflow();

  const double violation = marginal_violation(plan, mu, nu);
  return finish(cost, std::move(plan), mu, nu, cfg.num_iters, violation <= cfg.marginal_tol, false);
}

namespace {

struct RelaxedSides {
  double row_side = 0.0;  // sum_i min_j C_ij
  double col_side = 0.0;  // sum_j min_i C_ij
  std::vector<std::size_t> row_argmin;
  std::vector<std::size_t> col_argmin;
};

RelaxedSides relaxed_sides(const CostMatrix& cost) {
  const Matrix& c = cost.entries;
  if (!c.is_square() || c.rows() == 0) throw Error(ErrorCode::kNonSquare, "cost matrix must be square");
  if (!c.all_finite()) throw Error(ErrorCode::kNonFinite, "cost matrix has non-finite entries");
  const std::size_t n = c.rows();
  RelaxedSides s;
  s.row_argmin.assign(n, 0);
  s.col_argmin.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j < n; ++j) {
      if (c(i, j) < c(i, s.row_argmin[i])) s.row_argmin[i] = j;
      if (c(j, i) < c(s.col_argmin[i], i)) s.col_argmin[i] = j;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    s.row_side += c(i, s.row_argmin[i]);
    s.col_side += c(s.col_argmin[i], i);
  }
  return s;
}

}  // namespace

OtSolution remd(const CostMatrix& cost) {
  const auto sides = relaxed_sides(cost);
  OtSolution out;
  out.cost = std::max(sides.row_side, sides.col_side) / static_cast<double>(cost.size());
  out.iterations_used = 1;
  out.converged = true;
  return out;
}

Matrix remd_active_weights(const CostMatrix& cost) {
  const auto sides = relaxed_sides(cost);
  const std::size_t n = cost.size();
  const double mass = 1.0 / static_cast<double>(n);
  Matrix w(n, n, 0.0);
  if (sides.row_side >= sides.col_side) {
    for (std::size_t i = 0; i < n; ++i) w(i, sides.row_argmin[i]) += mass;
  } else {
    for (std::size_t j = 0; j < n; ++j) w(sides.col_argmin[j], j) += mass;
  }
  return w;
}

std::string_view to_string(OtMethod method) noexcept {
  switch (method) {
    case OtMethod::kExact: return "exact";
    case OtMethod::kSinkhorn: return "sinkhorn";
    case OtMethod::kIpot: return "ipot";
    case OtMethod::kRemd: return "remd";
  }
  return "unknown";
}

std::optional<OtMethod> parse_ot_method(std::string_view name) noexcept {
  if (name == "exact") return OtMethod::kExact;
  if (name == "sinkhorn") return OtMethod::kSinkhorn;
  if (name == "ipot") return OtMethod::kIpot;
  if (name == "remd") return OtMethod::kRemd;
  return std::nullopt;
}

OtSolution solve_uniform(const CostMatrix& cost, const OtParams& params) {
  switch (params.method) {
    case OtMethod::kExact:
      return exact_emd_uniform(cost);
    case OtMethod::kSinkhorn: {
      const auto m = MassVector::uniform(std::max<std::size_t>(cost.size(), 1));
      return sinkhorn_rot(cost, m, m, params.sinkhorn);
    }
    case OtMethod::kIpot: {
      const auto m = MassVector::uniform(std::max<std::size_t>(cost.size(), 1));
      return ipot(cost, m, m, params.ipot);
    }
    case OtMethod::kRemd:
      return remd(cost);
  }
  throw Error(ErrorCode::kInvalidParams, "unknown OT method");
}

OtLossResult ot_loss(const FeatureBatch& teacher, const FeatureBatch& student,
                     const OtParams& params) {
  OtLossResult out;
  out.cost = cosine_cost(teacher, student);
  out.solution = solve_uniform(out.cost, params);
  out.loss = out.solution.cost;
  return out;
}

Matrix gradient_weights(const OtLossResult& result, OtMethod method) {
  if (method == OtMethod::kRemd) return remd_active_weights(result.cost);
  if (!result.solution.plan) throw Error(ErrorCode::kInvalidParams, "solver returned no plan");
  return result.solution.plan->entries;
}

}  // namespace otkd
