#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

#include "otkd/ot_core.hpp"

namespace otkd {

enum class SinkhornDomain {
  kAuto,      // scaling form, switching to log-domain when the kernel underflows
  kStandard,  // scaling form only; underflow is an error
  kLog,
};

struct SinkhornConfig {
  double epsilon = 0.05;
  std::size_t max_iters = 10000;
  double marginal_tol = 1e-9;
  SinkhornDomain domain = SinkhornDomain::kAuto;

  void validate() const;
};

struct IpotConfig {
  double beta = 20.0;
  std::size_t num_iters = 50;
  std::size_t inner_sinkhorn_steps = 1;
  // Only decides the reported `converged` flag; IPOT always runs num_iters.
  double marginal_tol = 1e-6;

  void validate() const;
};

// Entropic OT. The returned cost is the unregularized <T_eps, C>; the
// entropy sum(T log T) is reported separately. Stops when the L1 row
// marginal violation (columns are exact after each sweep) drops below
// marginal_tol, or after max_iters.
OtSolution sinkhorn_rot(const CostMatrix& cost, const MassVector& mu, const MassVector& nu,
                        const SinkhornConfig& cfg);

// Inexact proximal point OT:
//   v <- 1/b, G <- exp(-C/beta), T <- 1 1^T
//   repeat N times:
//     Q <- G (.) T
//     inner_sinkhorn_steps times: u <- mu / (Q v), v <- nu / (Q^T u)
//     T <- diag(u) Q diag(v)
OtSolution ipot(const CostMatrix& cost, const MassVector& mu, const MassVector& nu,
                const IpotConfig& cfg);

// Relaxed EMD: (1/b) max(sum_i min_j C_ij, sum_j min_i C_ij). No plan.
OtSolution remd(const CostMatrix& cost);

// Subgradient weights of remd(): the relaxed optimum of whichever side
// attains the max (row side on ties), each row (or column) sending 1/b to
// its first argmin.
Matrix remd_active_weights(const CostMatrix& cost);

enum class OtMethod { kExact, kSinkhorn, kIpot, kRemd };

std::string_view to_string(OtMethod method) noexcept;
std::optional<OtMethod> parse_ot_method(std::string_view name) noexcept;

struct OtParams {
  OtMethod method = OtMethod::kIpot;
  SinkhornConfig sinkhorn;
  IpotConfig ipot;
};

// Dispatch on uniform marginals.
OtSolution solve_uniform(const CostMatrix& cost, const OtParams& params);

struct OtLossResult {
  double loss = 0.0;
  CostMatrix cost;
  OtSolution solution;
};

// Cosine cost between the batches, then the selected solver.
OtLossResult ot_loss(const FeatureBatch& teacher, const FeatureBatch& student,
                     const OtParams& params);

// The matrix W with loss = <W, C> held fixed for gradient purposes: the
// solver's plan, or remd_active_weights() for REMD.
Matrix gradient_weights(const OtLossResult& result, OtMethod method);

}  // namespace otkd
