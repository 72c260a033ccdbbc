#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "otkd/data.hpp"
#include "otkd/losses.hpp"
#include "otkd/model.hpp"

namespace otkd {

enum class FeatureLoss { kExact, kSinkhorn, kIpot, kRemd, kFitnetsL2 };

std::string_view to_string(FeatureLoss f) noexcept;
std::optional<FeatureLoss> parse_feature_loss(std::string_view name) noexcept;

struct LossConfig {
  double alpha = 0.9;  // feature-loss weight
  double gamma = 1.0;  // KD weight
  FeatureLoss feature_loss = FeatureLoss::kIpot;
  double epsilon = 0.05;            // sinkhorn
  std::size_t sinkhorn_iters = 1000;
  double beta = 20.0;               // ipot
  std::size_t ipot_iters = 50;
  std::array<bool, kNumStages> stage_mask{true, true, true, true};
  double kd_temperature = 4.0;

  void validate() const;  // InvalidConfig
  OtParams ot_params() const;
  nlohmann::json to_json() const;
  static LossConfig from_json(const nlohmann::json& j);
};

enum class Optimizer { kSgd, kMomentum };

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 60;
  double lr = 0.005;
  std::vector<std::size_t> lr_decay_epochs{35, 45, 55};
  double lr_decay_factor = 0.1;
  Optimizer optimizer = Optimizer::kMomentum;
  double momentum = 0.9;
  double weight_decay = 5e-4;  // added to the gradient as wd * w
  std::uint64_t seed = 0;
  std::size_t embed_dim = 128;
  std::size_t eval_batch = 256;

  void validate() const;  // InvalidConfig
  // Rate used during 0-based epoch e: lr * factor^(number of decay epochs <= e).
  double lr_at(std::size_t epoch) const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct LossValues {
  double ce = 0.0;
  std::array<double, kNumStages> feature{};  // unweighted, 0 for masked stages
  double kd = 0.0;
  double total = 0.0;
};

struct CompositeLoss {
  Var total;
  LossValues values;
};

// L = CE + alpha * sum_{l in mask} F(aligned stage-l features) + gamma * KD,
// where F is the configured feature loss. Terms with zero weight are not
// built at all, so alpha = gamma = 0 returns the cross-entropy node itself.
// `teacher` should come from forward_frozen().
CompositeLoss composite_loss(Tape& tape, const StageOutputs& student, const StageOutputs& teacher,
                             Var labels, const LossConfig& cfg, EmbeddingAdapter& adapter);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  LossValues mean;        // averaged over the epoch's steps
  double test_acc = 0.0;
  double seconds = 0.0;
};

struct StepLog {
  std::size_t epoch = 0;
  std::size_t step = 0;
  LossValues values;
};

struct RunReport {
  std::string label;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json data = nlohmann::json::object();
  std::vector<EpochLog> epochs;
  std::vector<StepLog> steps;  // kept in memory, not serialized
  double final_test_acc = 0.0;
  double final_train_acc = 0.0;
  std::uint64_t weight_checksum = 0;

  // Timing lives only in epochs[].seconds and the top-level "timing" key.
  nlohmann::json to_json(bool include_timing = true) const;
  static RunReport from_json(const nlohmann::json& j);
  void write_json(const std::filesystem::path& path) const;
  // epoch,ce,ot_s1,ot_s2,ot_s3,ot_s4,kd,total,test_acc,seconds
  void write_epoch_csv(const std::filesystem::path& path) const;
};

RunReport read_report(const std::filesystem::path& path);

struct TrainResult {
  StageModel model;
  RunReport report;
};

// Fraction of rows whose first-maximum logit is the label. Independent of
// batch_size.
double evaluate(const StageModel& model, const Dataset& ds, std::size_t batch_size = 256);

// Optional hook invoked after every optimizer step.
using StepHook = std::function<void(const StepLog&)>;

// Cross-entropy training. The model is build_model(spec, cfg.seed).
TrainResult train_teacher(const Dataset& train, const Dataset& test, const ArchSpec& spec,
                          const TrainConfig& cfg, const StepHook& hook = {});

// Distillation into build_model(student_spec, cfg.seed) with the same loop
// as train_teacher(), so alpha = gamma = 0 reproduces it exactly. Only
// student and adapter parameters are updated.
TrainResult distill_student(const StageModel& teacher, const ArchSpec& student_spec,
                            const Dataset& train, const Dataset& test, const LossConfig& loss,
                            const TrainConfig& cfg, const StepHook& hook = {});

struct CompareCell {
  std::string name;
  LossConfig loss;
};

// The fixed matrix {ce, kd, ipot, ipot+kd, remd, remd+kd, fitnets}.
std::vector<CompareCell> standard_cells(double alpha = 0.9, double gamma = 1.0);

struct ComparisonRow {
  std::string name;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1) denominator
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  std::vector<RunReport> reports;  // cell-major, then seed order

  std::string to_csv() const;
  std::string to_text() const;
};

double sample_mean(const std::vector<double>& xs);
double sample_stddev(const std::vector<double>& xs);

// Runs every (cell, seed) pair; cells are independent and may run on up to
// `threads` workers. Results are placed by (cell, seed) index. Needs >= 2
// seeds.
Comparison compare_losses(const StageModel& teacher, const ArchSpec& student_spec,
                          const Dataset& train, const Dataset& test,
                          const std::vector<CompareCell>& cells, const std::vector<std::uint64_t>& seeds,
                          const TrainConfig& base, std::size_t threads = 0);

// Groups reports by label (first-seen order) into mean/std rows.
Comparison summarize_reports(std::vector<RunReport> reports);

}  // namespace otkd
