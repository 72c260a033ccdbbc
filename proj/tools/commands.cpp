#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "otkd/bench.hpp"
#include "otkd/checkpoint.hpp"
#include "otkd/data.hpp"
#include "otkd/distill.hpp"
#include "otkd/errors.hpp"
#include "otkd/feature_io.hpp"
#include "otkd/gradcheck.hpp"
#include "otkd/run_config.hpp"
#include "otkd/solvers.hpp"

namespace fs = std::filesystem;

namespace otkd::cli {

namespace {

void require_exists(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw MissingArtifact(std::string(what) + " not found: " + path);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

OtMethod method_or_throw(const std::string& name) {
  const auto m = parse_ot_method(name);
  if (!m) throw Error(ErrorCode::kInvalidParams, "unknown method '" + name + "'");
  return *m;
}

struct Prepared {
  RunConfig cfg;
  Dataset train;
  Dataset test;
};

Prepared prepare(const TrainArgs& a) {
  Prepared p;
  if (!a.config.empty()) {
    require_exists(a.config, "config");
    p.cfg = load_run_config(a.config);
  }
  if (!a.label.empty()) p.cfg.label = a.label;
  if (!a.seeds.empty()) p.cfg.train.seed = a.seeds.front();
  require_exists(a.data, "dataset");
  const Dataset ds = load_csv(a.data);
  if (p.cfg.model.input_dim == 0) p.cfg.model.input_dim = ds.dim();
  if (p.cfg.model.num_classes == 0) p.cfg.model.num_classes = ds.num_classes;
  auto [train, test] = split(ds, p.cfg.test_fraction, p.cfg.split_seed);
  p.train = std::move(train);
  p.test = std::move(test);
  return p;
}

fs::path report_dir_for(const TrainArgs& a) {
  if (!a.report_dir.empty()) return a.report_dir;
  const fs::path out(a.out);
  return out.has_parent_path() ? out.parent_path() : fs::path(".");
}

std::string stem_for(const RunReport& r) { return r.label + "_s" + std::to_string(r.seed); }

void write_report(const RunReport& r, const fs::path& dir) {
  fs::create_directories(dir);
  r.write_json(dir / (stem_for(r) + ".json"));
  r.write_epoch_csv(dir / (stem_for(r) + ".csv"));
}

void finish_training(TrainResult& result, const Prepared& p, const TrainArgs& a) {
  result.report.label = p.cfg.label;
  const fs::path dir = report_dir_for(a);
  write_report(result.report, dir);
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(result.model, out,
                  {{"label", result.report.label},
                   {"train_seed", result.report.seed},
                   {"final_test_acc", result.report.final_test_acc},
                   {"report", (dir / (stem_for(result.report) + ".json")).string()}});
  std::printf("%s seed=%llu test_acc=%.4f train_acc=%.4f\n", result.report.label.c_str(),
              static_cast<unsigned long long>(result.report.seed), result.report.final_test_acc,
              result.report.final_train_acc);
}

}  // namespace

int run_solve(const SolveArgs& a) {
  OtParams params;
  params.method = method_or_throw(a.method);
  params.sinkhorn.epsilon = a.epsilon;
  params.ipot.beta = a.beta;
  if (a.iters) {
    params.sinkhorn.max_iters = *a.iters;
    params.ipot.num_iters = *a.iters;
  }
  const FeatureBatch teacher = read_features(a.teacher);
  const FeatureBatch student = read_features(a.student);
  const OtLossResult r = ot_loss(teacher, student, params);
  const nlohmann::json j = {{"cost", r.solution.cost},
                            {"converged", r.solution.converged},
                            {"iterations", r.solution.iterations_used},
                            {"marginal_violation", r.solution.marginal_violation}};
  write_text(a.out, j.dump(2) + "\n");
  std::cout << j.dump() << "\n";
  return kOk;
}

int run_gradcheck(const GradcheckArgs& a) {
  const auto checks = run_gradcheck_suite(a.seed, a.points);
  std::size_t width = 2;
  for (const auto& c : checks) width = std::max(width, c.op.size());
  std::printf("%-*s  %12s  %9s  %7s  %s\n", static_cast<int>(width), "op", "worst_rel", "tolerance", "h",
              "status");
  bool all = true;
  for (const auto& c : checks) {
    std::printf("%-*s  %12.3e  %9.1e  %7.0e  %s\n", static_cast<int>(width), c.op.c_str(), c.worst_rel_error,
                c.tolerance, c.step, c.passed ? "ok" : "FAIL");
    all = all && c.passed;
  }
  return all ? kOk : kNumerical;
}

int run_bench(const BenchArgs& a) {
  BenchConfig cfg;
  cfg.sizes = a.sizes;
  cfg.methods.clear();
  for (const auto& m : a.methods) cfg.methods.push_back(method_or_throw(m));
  cfg.repetitions = a.reps;
  cfg.dim = a.dim;
  cfg.seed = a.seed;
  cfg.params.sinkhorn.epsilon = a.epsilon;
  cfg.params.ipot.beta = a.beta;
  cfg.params.ipot.num_iters = a.iters;
  const auto rows = run_solver_bench(cfg);
  const std::string csv = bench_csv(rows);
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    write_text(a.out, csv);
  }
  if (cfg.sizes.size() >= 2) {
    for (OtMethod m : cfg.methods) {
      std::fprintf(a.out.empty() ? stderr : stdout, "loglog slope %s: %.3f\n", std::string(to_string(m)).c_str(),
                   bench_slope(rows, m));
    }
  }
  return kOk;
}

int run_gen_data(const GenDataArgs& a) {
  MixtureParams p;
  p.num_classes = a.classes;
  p.per_class = a.per_class;
  p.dim = a.dim;
  p.spread = a.spread;
  p.seed = a.seed;
  const Dataset ds = gen_gaussian_mixture(p);
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_csv(ds, out);
  std::printf("wrote %zu examples (%zu classes, d=%zu) to %s\n", ds.size(), ds.num_classes, ds.dim(),
              a.out.c_str());
  return kOk;
}

int run_train_teacher(const TrainArgs& a) {
  Prepared p = prepare(a);
  if (a.label.empty() && a.config.empty()) p.cfg.label = "teacher";
  TrainResult result = train_teacher(p.train, p.test, p.cfg.model, p.cfg.train);
  finish_training(result, p, a);
  return kOk;
}

int run_distill(const TrainArgs& a) {
  require_exists(a.teacher, "teacher checkpoint");
  Prepared p = prepare(a);
  const StageModel teacher = load_checkpoint(a.teacher);
  TrainResult result = distill_student(teacher, p.cfg.model, p.train, p.test, p.cfg.loss, p.cfg.train);
  finish_training(result, p, a);
  return kOk;
}

int run_compare(const TrainArgs& a) {
  require_exists(a.teacher, "teacher checkpoint");
  Prepared p = prepare(TrainArgs{a.data, a.config, {}, {}, {}, {}, {}, {}, 0});
  const StageModel teacher = load_checkpoint(a.teacher);

  std::vector<CompareCell> cells;
  for (auto cell : standard_cells(p.cfg.loss.alpha, p.cfg.loss.gamma)) {
    LossConfig loss = p.cfg.loss;
    loss.alpha = cell.loss.alpha;
    loss.gamma = cell.loss.gamma;
    loss.feature_loss = cell.loss.feature_loss;
    cell.loss = loss;
    if (a.cells.empty() || std::find(a.cells.begin(), a.cells.end(), cell.name) != a.cells.end()) {
      cells.push_back(std::move(cell));
    }
  }
  for (const auto& name : a.cells) {
    if (std::none_of(cells.begin(), cells.end(), [&](const CompareCell& c) { return c.name == name; })) {
      throw Error(ErrorCode::kInvalidConfig, "unknown cell '" + name + "'");
    }
  }

  const Comparison cmp =
      compare_losses(teacher, p.cfg.model, p.train, p.test, cells, a.seeds, p.cfg.train, a.threads);
  const fs::path dir(a.out);
  for (const auto& r : cmp.reports) write_report(r, dir);
  write_text(dir / "comparison.csv", cmp.to_csv());
  write_text(dir / "comparison.txt", cmp.to_text());
  std::cout << cmp.to_text();
  return kOk;
}

int run_report(const ReportArgs& a) {
  std::vector<RunReport> reports;
  for (const auto& input : a.inputs) {
    require_exists(input, "report input");
    if (fs::is_directory(input)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(input)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        // Directories may also hold checkpoint sidecars; skip anything that
        // is not a RunReport.
        std::ifstream in(f);
        const auto j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("epochs")) continue;
        reports.push_back(RunReport::from_json(j));
      }
    } else {
      reports.push_back(read_report(input));
    }
  }
  if (reports.empty()) throw MissingArtifact("no RunReports found");
  const Comparison cmp = summarize_reports(std::move(reports));
  std::cout << cmp.to_text();
  if (!a.csv.empty()) write_text(a.csv, cmp.to_csv());
  return kOk;
}

}  // namespace otkd::cli
