#include <exception>
#include <functional>
#include <iostream>

#include "commands.hpp"
#include "otkd/errors.hpp"

namespace cli = otkd::cli;

namespace {

int exit_code_for(otkd::ErrorCode code) {
  using otkd::ErrorCode;
  switch (code) {
    case ErrorCode::kNumericalUnderflow:
    case ErrorCode::kNonFinite:
    case ErrorCode::kZeroNormRow:
      return cli::kNumerical;
    case ErrorCode::kDivergenceDetected:
      return cli::kDivergence;
    default:
      return cli::kUsage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal-transport knowledge distillation toolkit", "otkd"};
  app.require_subcommand(1);
  std::function<int()> action;

  cli::SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Solve OT between two feature files");
  s->add_option("--method", solve.method, "exact|sinkhorn|ipot|remd")
      ->check(CLI::IsMember({"exact", "sinkhorn", "ipot", "remd"}))
      ->capture_default_str();
  s->add_option("--teacher", solve.teacher, "Teacher features (CSV or binary)")->required();
  s->add_option("--student", solve.student, "Student features (CSV or binary)")->required();
  s->add_option("--epsilon", solve.epsilon, "Sinkhorn entropic weight")->capture_default_str();
  s->add_option("--beta", solve.beta, "IPOT kernel scale")->capture_default_str();
  s->add_option("--iters", solve.iters, "IPOT iterations (default 50) / Sinkhorn iteration cap (default 10000)");
  s->add_option("--out", solve.out, "Output JSON")->required();
  s->callback([&] { action = [&] { return cli::run_solve(solve); }; });

  cli::GradcheckArgs grad;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  g->add_option("--seed", grad.seed)->capture_default_str();
  g->add_option("--points", grad.points, "Random points per op")->capture_default_str();
  g->callback([&] { action = [&] { return cli::run_gradcheck(grad); }; });

  cli::BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Time solvers across batch sizes");
  b->add_option("--sizes", bench.sizes)->delimiter(',')->capture_default_str();
  b->add_option("--methods", bench.methods)
      ->delimiter(',')
      ->check(CLI::IsMember({"exact", "sinkhorn", "ipot", "remd"}))
      ->capture_default_str();
  b->add_option("--reps", bench.reps, "Timed repetitions per cell")->capture_default_str();
  b->add_option("--dim", bench.dim, "Feature dimension of the random instances")->capture_default_str();
  b->add_option("--epsilon", bench.epsilon)->capture_default_str();
  b->add_option("--beta", bench.beta)->capture_default_str();
  b->add_option("--iters", bench.iters)->capture_default_str();
  b->add_option("--seed", bench.seed)->capture_default_str();
  b->add_option("--out", bench.out, "CSV path (stdout when omitted)");
  b->callback([&] { action = [&] { return cli::run_bench(bench); }; });

  cli::GenDataArgs gen;
  auto* d = app.add_subcommand("gen-data", "Write a Gaussian-mixture dataset as CSV");
  d->add_option("--classes", gen.classes)->capture_default_str();
  d->add_option("--per-class", gen.per_class)->capture_default_str();
  d->add_option("--dim", gen.dim)->capture_default_str();
  d->add_option("--spread", gen.spread)->capture_default_str();
  d->add_option("--seed", gen.seed)->capture_default_str();
  d->add_option("--out", gen.out)->required();
  d->callback([&] { action = [&] { return cli::run_gen_data(gen); }; });

  cli::TrainArgs teacher_args;
  auto* t = app.add_subcommand("train-teacher", "Train a teacher with cross-entropy");
  t->add_option("--data", teacher_args.data, "Dataset CSV")->required();
  t->add_option("--config", teacher_args.config, "Run config file");
  t->add_option("--out", teacher_args.out, "Checkpoint path")->required();
  t->add_option("--report-dir", teacher_args.report_dir, "Where RunReport JSON/CSV go (default: next to --out)");
  t->add_option("--label", teacher_args.label, "Overrides run.label");
  t->add_option("--seed", teacher_args.seeds, "Overrides train.seed")->expected(1);
  t->callback([&] { action = [&] { return cli::run_train_teacher(teacher_args); }; });

  cli::TrainArgs distill_args;
  auto* ds = app.add_subcommand("distill", "Distill a student from a trained teacher");
  ds->add_option("--data", distill_args.data, "Dataset CSV")->required();
  ds->add_option("--teacher", distill_args.teacher, "Teacher checkpoint")->required();
  ds->add_option("--config", distill_args.config, "Run config file");
  ds->add_option("--out", distill_args.out, "Student checkpoint path")->required();
  ds->add_option("--report-dir", distill_args.report_dir);
  ds->add_option("--label", distill_args.label);
  ds->add_option("--seed", distill_args.seeds, "Overrides train.seed")->expected(1);
  ds->callback([&] { action = [&] { return cli::run_distill(distill_args); }; });

  cli::TrainArgs compare_args;
  auto* c = app.add_subcommand("compare", "Run a loss-configuration matrix over seeds");
  c->add_option("--data", compare_args.data, "Dataset CSV")->required();
  c->add_option("--teacher", compare_args.teacher, "Teacher checkpoint")->required();
  c->add_option("--config", compare_args.config, "Run config file (student model, solver and training settings)");
  c->add_option("--seeds", compare_args.seeds)->delimiter(',')->required();
  c->add_option("--cells", compare_args.cells, "Subset of ce,kd,ipot,ipot+kd,remd,remd+kd,fitnets")
      ->delimiter(',');
  c->add_option("--out-dir", compare_args.out, "Directory for reports and tables")->required();
  c->add_option("--threads", compare_args.threads, "Worker threads (0: hardware concurrency)");
  c->callback([&] { action = [&] { return cli::run_compare(compare_args); }; });

  cli::ReportArgs report;
  auto* r = app.add_subcommand("report", "Tabulate stored RunReports as mean +- std per label");
  r->add_option("inputs", report.inputs, "RunReport JSON files or directories")->required();
  r->add_option("--csv", report.csv, "Also write the table as CSV");
  r->callback([&] { action = [&] { return cli::run_report(report); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kUsage;
  }

  try {
    return action();
  } catch (const cli::MissingArtifact& e) {
    std::cerr << "otkd: " << e.what() << "\n";
    return cli::kMissingArtifact;
  } catch (const otkd::Error& e) {
    std::cerr << "otkd: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "otkd: " << e.what() << "\n";
    return cli::kUsage;
  }
}
