#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "otkd/autodiff.hpp"

namespace otkd {

using ScalarFn = std::function<Var(Tape&, Var)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::vector<std::size_t> failing;  // flat coordinates above tolerance
  std::size_t checked = 0;
  bool passed = true;
};

// Compares reverse-mode gradients of f at `point` with central differences
// (f(x+h) - f(x-h)) / 2h. The relative error of a coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, rel_floor).
GradCheckReport grad_check(const ScalarFn& f, const Tensor& point, double h, double tol,
                           double rel_floor = 1e-3);

struct OpCheck {
  std::string op;
  double worst_rel_error = 0.0;
  double tolerance = 0.0;
  double step = 0.0;
  std::size_t points = 0;
  bool passed = false;
};

// Every differentiable op and loss, each at `points` random points drawn
// from `seed`. Core ops use h = 1e-5 and tolerance 1e-6; the fixed-plan OT
// gradients (exact, REMD) use h = 1e-5 and 1e-4; IPOT's envelope gradient
// uses h = 1e-4 and 1e-3. OT instances are resampled until the optimum is
// unique by a clear margin.
std::vector<OpCheck> run_gradcheck_suite(std::uint64_t seed, std::size_t points = 10);

}  // namespace otkd
