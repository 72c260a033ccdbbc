#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace otkd::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kNumerical = 3,
  kDivergence = 4,
  kMissingArtifact = 5,
};

struct SolveArgs {
  std::string method = "ipot";
  std::string teacher;
  std::string student;
  double epsilon = 0.05;
  double beta = 20.0;
  std::optional<std::size_t> iters;  // IPOT N (default 50) or Sinkhorn cap (default 10000)
  std::string out;
};

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::size_t points = 10;
};

struct BenchArgs {
  std::vector<std::size_t> sizes{32, 64, 128, 256};
  std::vector<std::string> methods{"remd", "ipot"};
  std::size_t reps = 7;
  std::size_t dim = 64;
  double epsilon = 0.05;
  double beta = 20.0;
  std::size_t iters = 50;
  std::uint64_t seed = 0;
  std::string out;
};

struct GenDataArgs {
  std::size_t classes = 5;
  std::size_t per_class = 200;
  std::size_t dim = 16;
  double spread = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::string config;
  std::string teacher;  // distill / compare only
  std::string out;      // checkpoint (train-teacher, distill) or directory (compare)
  std::string report_dir;
  std::string label;
  std::vector<std::uint64_t> seeds;  // compare; first entry overrides train.seed elsewhere
  std::vector<std::string> cells;    // compare
  std::size_t threads = 0;
};

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string csv;
};

int run_solve(const SolveArgs& a);
int run_gradcheck(const GradcheckArgs& a);
int run_bench(const BenchArgs& a);
int run_gen_data(const GenDataArgs& a);
int run_train_teacher(const TrainArgs& a);
int run_distill(const TrainArgs& a);
int run_compare(const TrainArgs& a);
int run_report(const ReportArgs& a);

}  // namespace otkd::cli

namespace otkd::cli {

// A referenced input artifact (dataset, checkpoint, report) does not exist.
struct MissingArtifact : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace otkd::cli
