#include "otkd/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "otkd/errors.hpp"
#include "otkd/rng.hpp"

namespace otkd {

namespace {

constexpr std::uint64_t kBenchStream = 0x42454e4348;

CostMatrix random_cosine_cost(std::size_t b, std::size_t d, std::uint64_t seed) {
  auto rng = SplitMix64::derive(seed, kBenchStream ^ b);
  Matrix x(b, d);
  Matrix y(b, d);
  for (double& v : x.data()) v = rng.normal();
  for (double& v : y.data()) v = rng.normal();
  return cosine_cost(FeatureBatch(std::move(x)), FeatureBatch(std::move(y)));
}

volatile double g_sink = 0.0;

}  // namespace

void BenchConfig::validate() const {
  if (sizes.empty() || methods.empty()) throw Error(ErrorCode::kInvalidParams, "bench needs sizes and methods");
  for (std::size_t b : sizes) {
    if (b < 1 || b > 4096) throw Error(ErrorCode::kInvalidParams, "batch size out of range: " + std::to_string(b));
  }
  if (dim < 1) throw Error(ErrorCode::kInvalidParams, "dim must be >= 1");
  if (repetitions < 1) throw Error(ErrorCode::kInvalidParams, "repetitions must be >= 1");
  if (!(min_rep_seconds >= 0.0)) throw Error(ErrorCode::kInvalidParams, "min_rep_seconds must be >= 0");
}

std::vector<BenchRow> run_solver_bench(const BenchConfig& cfg) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;
  for (OtMethod method : cfg.methods) {
    OtParams params = cfg.params;
    params.method = method;
    for (std::size_t b : cfg.sizes) {
      const CostMatrix cost = random_cosine_cost(b, cfg.dim, cfg.seed);
      // Warm-up solve; also decides the inner repeat count.
      auto t0 = clock::now();
      const OtSolution first = solve_uniform(cost, params);
      const double once = std::chrono::duration<double>(clock::now() - t0).count();
      const auto inner = static_cast<std::size_t>(
          std::clamp(std::ceil(cfg.min_rep_seconds / std::max(once, 1e-9)), 1.0, 1e6));

      std::vector<double> per_solve_ms;
      for (std::size_t r = 0; r < cfg.repetitions; ++r) {
        t0 = clock::now();
        for (std::size_t k = 0; k < inner; ++k) g_sink = g_sink + solve_uniform(cost, params).cost;
        const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        per_solve_ms.push_back(ms / static_cast<double>(inner));
      }
      std::sort(per_solve_ms.begin(), per_solve_ms.end());
      const std::size_t n = per_solve_ms.size();
      const double median =
          n % 2 == 1 ? per_solve_ms[n / 2] : 0.5 * (per_solve_ms[n / 2 - 1] + per_solve_ms[n / 2]);
      rows.push_back({method, b, median, first.iterations_used});
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "method,b,median_ms,iters\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", r.median_ms);
    out << to_string(r.method) << ',' << r.b << ',' << buf << ',' << r.iters << "\n";
  }
  return out.str();
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorCode::kInvalidParams, "slope needs two or more paired points");
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw Error(ErrorCode::kInvalidParams, "log-log slope needs positive data");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw Error(ErrorCode::kInvalidParams, "log-log slope needs distinct x values");
  return sxy / sxx;
}

double bench_slope(const std::vector<BenchRow>& rows, OtMethod method) {
  std::vector<double> x, y;
  for (const auto& r : rows) {
    if (r.method != method) continue;
    x.push_back(static_cast<double>(r.b));
    y.push_back(r.median_ms);
  }
  return loglog_slope(x, y);
}

}  // namespace otkd
