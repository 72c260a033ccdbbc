#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "otkd/solvers.hpp"

namespace otkd {

struct BenchConfig {
  std::vector<std::size_t> sizes{32, 64, 128, 256};
  std::vector<OtMethod> methods{OtMethod::kRemd, OtMethod::kIpot};
  std::size_t dim = 64;
  std::size_t repetitions = 7;
  // Each repetition repeats the solve until at least this much time passes.
  double min_rep_seconds = 0.02;
  std::uint64_t seed = 0;
  OtParams params;  // method field is ignored

  void validate() const;  // InvalidParams
};

struct BenchRow {
  OtMethod method = OtMethod::kRemd;
  std::size_t b = 0;
  double median_ms = 0.0;
  std::size_t iters = 0;
};

// Median wall-clock per solve on a seeded random cosine cost (Gaussian
// features, one instance per size). Cost construction is not timed.
std::vector<BenchRow> run_solver_bench(const BenchConfig& cfg);

// method,b,median_ms,iters
std::string bench_csv(const std::vector<BenchRow>& rows);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// Slope of median_ms against b for one method's rows.
double bench_slope(const std::vector<BenchRow>& rows, OtMethod method);

}  // namespace otkd
