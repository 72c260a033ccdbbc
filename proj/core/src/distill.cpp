#include "otkd/distill.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "otkd/errors.hpp"
#include "otkd/rng.hpp"

namespace otkd {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646;

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::kInvalidConfig, what); }

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

nlohmann::json values_json(const LossValues& v) {
  return {{"ce", v.ce}, {"ot", v.feature}, {"kd", v.kd}, {"total", v.total}};
}

LossValues values_from_json(const nlohmann::json& j) {
  LossValues v;
  v.ce = j.at("ce").get<double>();
  v.feature = j.at("ot").get<std::array<double, kNumStages>>();
  v.kd = j.at("kd").get<double>();
  v.total = j.at("total").get<double>();
  return v;
}

bool all_finite(const LossValues& v) {
  if (!std::isfinite(v.ce) || !std::isfinite(v.kd) || !std::isfinite(v.total)) return false;
  return std::all_of(v.feature.begin(), v.feature.end(), [](double x) { return std::isfinite(x); });
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& order, std::size_t begin, std::size_t end) {
  Matrix out(end - begin, m.cols());
  for (std::size_t r = begin; r < end; ++r) {
    const auto src = m.row(order[r]);
    std::copy(src.begin(), src.end(), out.row(r - begin).begin());
  }
  return out;
}

TrainResult run_training(const StageModel* teacher, const ArchSpec& spec, const Dataset& train,
                         const Dataset& test, const LossConfig& loss, const TrainConfig& cfg,
                         const StepHook& hook) {
  cfg.validate();
  loss.validate();
  spec.validate();
  if (train.size() == 0) invalid("empty training set");
  if (train.dim() != spec.input_dim || (test.size() > 0 && test.dim() != spec.input_dim)) {
    invalid("dataset dimension does not match model input_dim");
  }
  if (train.num_classes > spec.num_classes || test.num_classes > spec.num_classes) {
    invalid("dataset has more classes than the model");
  }
  const bool use_teacher = teacher != nullptr && (loss.alpha > 0.0 || loss.gamma > 0.0);
  if (use_teacher && teacher->spec().input_dim != spec.input_dim) invalid("teacher input_dim differs");
  if (use_teacher && teacher->spec().num_classes != spec.num_classes) invalid("teacher num_classes differs");
  if (use_teacher && loss.alpha > 0.0 && cfg.batch_size < 2) invalid("feature losses need batch_size >= 2");

  StageModel model = build_model(spec, cfg.seed);
  model.set_trainable(true);
  std::optional<EmbeddingAdapter> adapter;
  std::vector<Tensor*> params = model.parameters();
  if (teacher != nullptr) {
    adapter = EmbeddingAdapter::build(teacher->stage_dims(), model.stage_dims(), cfg.embed_dim, cfg.seed);
    if (use_teacher && loss.alpha > 0.0) {
      for (Tensor* t : adapter->trainable_parameters()) params.push_back(t);
    }
  }
  std::vector<std::vector<double>> velocity(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) velocity[k].assign(params[k]->numel(), 0.0);

  const Matrix targets = one_hot(train.labels, spec.num_classes);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = SplitMix64::derive(cfg.seed, kShuffleStream);

  RunReport report;
  report.label = teacher == nullptr ? "teacher" : "distill";
  report.seed = cfg.seed;
  report.config = {{"loss", loss.to_json()}, {"train", cfg.to_json()}, {"model", spec.to_json()}};
  if (teacher != nullptr) {
    report.config["teacher"] = {{"model", teacher->spec().to_json()}, {"checksum", teacher->checksum()}};
  }
  report.data = {{"train", train.provenance}, {"test", test.provenance},
                 {"train_size", train.size()}, {"test_size", test.size()}};

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cfg.lr_at(epoch);
    rng.shuffle(std::span<std::size_t>(order));
    LossValues sum;
    std::size_t steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      for (Tensor* p : params) p->zero_grad();

      Tape tape;
      const Var x = tape.constant(gather_rows(train.inputs, order, begin, end));
      const Var y = tape.constant(gather_rows(targets, order, begin, end));
      const StageOutputs s = model.forward(tape, x);
      CompositeLoss L;
      if (use_teacher) {
        const StageOutputs t = teacher->forward_frozen(tape, x);
        L = composite_loss(tape, s, t, y, loss, *adapter);
      } else {
        L.total = cross_entropy_loss(s.logits, y);
        L.values.ce = L.total.item();
        L.values.total = L.values.ce;
      }
      if (!all_finite(L.values)) {
        throw Error(ErrorCode::kDivergenceDetected,
                    "non-finite loss at epoch " + std::to_string(epoch + 1) + " step " + std::to_string(steps + 1));
      }
      tape.backward(L.total);

      for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        if (!p.has_grad()) continue;
        auto& v = velocity[k];
        for (std::size_t i = 0; i < p.numel(); ++i) {
          const double g = p.grad[i] + cfg.weight_decay * p.values[i];
          if (cfg.optimizer == Optimizer::kMomentum) {
            v[i] = cfg.momentum * v[i] + g;
            p.values[i] -= lr * v[i];
          } else {
            p.values[i] -= lr * g;
          }
        }
      }

      StepLog log{epoch + 1, steps + 1, L.values};
      report.steps.push_back(log);
      if (hook) hook(log);
      sum.ce += L.values.ce;
      for (std::size_t l = 0; l < kNumStages; ++l) sum.feature[l] += L.values.feature[l];
      sum.kd += L.values.kd;
      sum.total += L.values.total;
      ++steps;
    }
    for (Tensor* p : params) p->zero_grad();

    EpochLog e;
    e.epoch = epoch + 1;
    const auto n = static_cast<double>(steps);
    e.mean.ce = sum.ce / n;
    for (std::size_t l = 0; l < kNumStages; ++l) e.mean.feature[l] = sum.feature[l] / n;
    e.mean.kd = sum.kd / n;
    e.mean.total = sum.total / n;
    e.test_acc = test.size() > 0 ? evaluate(model, test, cfg.eval_batch) : 0.0;
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(e);
  }

  report.final_test_acc = test.size() > 0 ? evaluate(model, test, cfg.eval_batch) : 0.0;
  report.final_train_acc = evaluate(model, train, cfg.eval_batch);
  report.weight_checksum = model.checksum();
  model.set_trainable(false);
  return {std::move(model), std::move(report)};
}

}  // namespace

std::string_view to_string(FeatureLoss f) noexcept {
  switch (f) {
    case FeatureLoss::kExact: return "exact";
    case FeatureLoss::kSinkhorn: return "sinkhorn";
    case FeatureLoss::kIpot: return "ipot";
    case FeatureLoss::kRemd: return "remd";
    case FeatureLoss::kFitnetsL2: return "fitnets_l2";
  }
  return "?";
}

std::optional<FeatureLoss> parse_feature_loss(std::string_view name) noexcept {
  for (auto f : {FeatureLoss::kExact, FeatureLoss::kSinkhorn, FeatureLoss::kIpot, FeatureLoss::kRemd,
                 FeatureLoss::kFitnetsL2}) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

void LossConfig::validate() const {
  if (!finite_nonneg(alpha)) invalid("alpha must be finite and >= 0");
  if (!finite_nonneg(gamma)) invalid("gamma must be finite and >= 0");
  if (alpha > 0.0 && std::none_of(stage_mask.begin(), stage_mask.end(), [](bool b) { return b; })) {
    invalid("stage mask is empty while alpha > 0");
  }
  if (!(kd_temperature > 0.0) || !std::isfinite(kd_temperature)) invalid("kd_temperature must be positive");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) invalid("epsilon must be positive");
  if (!(beta > 0.0) || !std::isfinite(beta)) invalid("beta must be positive");
  if (sinkhorn_iters < 1 || ipot_iters < 1) invalid("solver iteration counts must be >= 1");
}

OtParams LossConfig::ot_params() const {
  OtParams p;
  switch (feature_loss) {
    case FeatureLoss::kExact: p.method = OtMethod::kExact; break;
    case FeatureLoss::kSinkhorn: p.method = OtMethod::kSinkhorn; break;
    case FeatureLoss::kRemd: p.method = OtMethod::kRemd; break;
    case FeatureLoss::kIpot:
    case FeatureLoss::kFitnetsL2: p.method = OtMethod::kIpot; break;
  }
  p.sinkhorn.epsilon = epsilon;
  p.sinkhorn.max_iters = sinkhorn_iters;
  p.ipot.beta = beta;
  p.ipot.num_iters = ipot_iters;
  return p;
}

nlohmann::json LossConfig::to_json() const {
  std::vector<std::size_t> stages;
  for (std::size_t l = 0; l < kNumStages; ++l) {
    if (stage_mask[l]) stages.push_back(l + 1);
  }
  return {{"alpha", alpha},           {"gamma", gamma},
          {"feature_loss", std::string(to_string(feature_loss))},
          {"epsilon", epsilon},       {"sinkhorn_iters", sinkhorn_iters},
          {"beta", beta},             {"ipot_iters", ipot_iters},
          {"stages", stages},         {"kd_temperature", kd_temperature}};
}

LossConfig LossConfig::from_json(const nlohmann::json& j) {
  LossConfig c;
  try {
    c.alpha = j.value("alpha", c.alpha);
    c.gamma = j.value("gamma", c.gamma);
    const auto name = j.value("feature_loss", std::string(to_string(c.feature_loss)));
    const auto f = parse_feature_loss(name);
    if (!f) invalid("unknown feature_loss '" + name + "'");
    c.feature_loss = *f;
    c.epsilon = j.value("epsilon", c.epsilon);
    c.sinkhorn_iters = j.value("sinkhorn_iters", c.sinkhorn_iters);
    c.beta = j.value("beta", c.beta);
    c.ipot_iters = j.value("ipot_iters", c.ipot_iters);
    c.kd_temperature = j.value("kd_temperature", c.kd_temperature);
    if (j.contains("stages")) {
      c.stage_mask.fill(false);
      for (std::size_t s : j.at("stages").get<std::vector<std::size_t>>()) {
        if (s < 1 || s > kNumStages) invalid("stage index out of range: " + std::to_string(s));
        c.stage_mask[s - 1] = true;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("bad loss config: ") + e.what());
  }
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 1) invalid("batch_size must be >= 1");
  if (!finite_nonneg(lr)) invalid("lr must be finite and >= 0");
  if (!(lr_decay_factor > 0.0) || !std::isfinite(lr_decay_factor)) invalid("lr_decay_factor must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) invalid("momentum must lie in [0, 1)");
  if (!finite_nonneg(weight_decay)) invalid("weight_decay must be finite and >= 0");
  if (embed_dim < 1) invalid("embed_dim must be >= 1");
  if (eval_batch < 1) invalid("eval_batch must be >= 1");
}

double TrainConfig::lr_at(std::size_t epoch) const {
  double rate = lr;
  for (std::size_t d : lr_decay_epochs) {
    if (d <= epoch) rate *= lr_decay_factor;
  }
  return rate;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"epochs", epochs},
          {"lr", lr},
          {"lr_decay_epochs", lr_decay_epochs},
          {"lr_decay_factor", lr_decay_factor},
          {"optimizer", optimizer == Optimizer::kMomentum ? "momentum" : "sgd"},
          {"momentum", momentum},
          {"weight_decay", weight_decay},
          {"seed", seed},
          {"embed_dim", embed_dim},
          {"eval_batch", eval_batch}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.lr = j.value("lr", c.lr);
    c.lr_decay_epochs = j.value("lr_decay_epochs", c.lr_decay_epochs);
    c.lr_decay_factor = j.value("lr_decay_factor", c.lr_decay_factor);
    const auto opt = j.value("optimizer", std::string("momentum"));
    if (opt == "momentum") {
      c.optimizer = Optimizer::kMomentum;
    } else if (opt == "sgd") {
      c.optimizer = Optimizer::kSgd;
    } else {
      invalid("unknown optimizer '" + opt + "'");
    }
    c.momentum = j.value("momentum", c.momentum);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.seed = j.value("seed", c.seed);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.eval_batch = j.value("eval_batch", c.eval_batch);
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("bad train config: ") + e.what());
  }
  return c;
}

CompositeLoss composite_loss(Tape& tape, const StageOutputs& student, const StageOutputs& teacher,
                             Var labels, const LossConfig& cfg, EmbeddingAdapter& adapter) {
  CompositeLoss out;
  const Var ce = cross_entropy_loss(student.logits, labels);
  out.values.ce = ce.item();
  out.total = ce;
  if (cfg.alpha > 0.0) {
    const OtParams params = cfg.ot_params();
    std::optional<Var> feature_sum;
    for (std::size_t l = 0; l < kNumStages; ++l) {
      if (!cfg.stage_mask[l]) continue;
      const auto [t, s] = adapter.align(tape, teacher.features[l], student.features[l], l + 1);
      const Var f = cfg.feature_loss == FeatureLoss::kFitnetsL2 ? fitnets_l2_loss(t, s)
                                                                  : ot_loss_node(t, s, params);
      out.values.feature[l] = f.item();
      feature_sum = feature_sum ? add(*feature_sum, f) : f;
    }
    out.total = add(out.total, scalar_mul(*feature_sum, cfg.alpha));
  }
  if (cfg.gamma > 0.0) {
    const Var kd = kd_loss(student.logits, teacher.logits, cfg.kd_temperature);
    out.values.kd = kd.item();
    out.total = add(out.total, scalar_mul(kd, cfg.gamma));
  }
  out.values.total = out.total.item();
  return out;
}

nlohmann::json RunReport::to_json(bool include_timing) const {
  nlohmann::json epochs_json = nlohmann::json::array();
  double total_seconds = 0.0;
  for (const auto& e : epochs) {
    nlohmann::json row = {{"epoch", e.epoch}, {"test_acc", e.test_acc}};
    row.update(values_json(e.mean));
    if (include_timing) row["seconds"] = e.seconds;
    total_seconds += e.seconds;
    epochs_json.push_back(std::move(row));
  }
  nlohmann::json j = {{"label", label},
                      {"seed", seed},
                      {"config", config},
                      {"data", data},
                      {"epochs", std::move(epochs_json)},
                      {"final_test_acc", final_test_acc},
                      {"final_train_acc", final_train_acc},
                      {"weight_checksum", weight_checksum}};
  if (include_timing) j["timing"] = {{"total_seconds", total_seconds}};
  return j;
}

RunReport RunReport::from_json(const nlohmann::json& j) {
  RunReport r;
  try {
    r.label = j.at("label").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config = j.value("config", nlohmann::json::object());
    r.data = j.value("data", nlohmann::json::object());
    for (const auto& row : j.at("epochs")) {
      EpochLog e;
      e.epoch = row.at("epoch").get<std::size_t>();
      e.mean = values_from_json(row);
      e.test_acc = row.at("test_acc").get<double>();
      e.seconds = row.value("seconds", 0.0);
      r.epochs.push_back(e);
    }
    r.final_test_acc = j.at("final_test_acc").get<double>();
    r.final_train_acc = j.value("final_train_acc", 0.0);
    r.weight_checksum = j.value("weight_checksum", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("bad run report: ") + e.what());
  }
  return r;
}

void RunReport::write_json(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << to_json().dump(2) << "\n";
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

void RunReport::write_epoch_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "epoch,ce,ot_s1,ot_s2,ot_s3,ot_s4,kd,total,test_acc,seconds\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << fmt17(e.mean.ce);
    for (double f : e.mean.feature) out << ',' << fmt17(f);
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.6f", e.seconds);
    out << ',' << fmt17(e.mean.kd) << ',' << fmt17(e.mean.total) << ',' << fmt17(e.test_acc) << ',' << secs
        << "\n";
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

RunReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  try {
    return RunReport::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

double evaluate(const StageModel& model, const Dataset& ds, std::size_t batch_size) {
  if (ds.size() == 0) return 0.0;
  batch_size = std::max<std::size_t>(batch_size, 1);
  std::size_t correct = 0;
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t begin = 0; begin < ds.size(); begin += batch_size) {
    const std::size_t end = std::min(ds.size(), begin + batch_size);
    const Matrix logits = model.predict_logits(gather_rows(ds.inputs, idx, begin, end));
    for (std::size_t r = 0; r < logits.rows(); ++r) {
      const auto row = logits.row(r);
      const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      if (best == ds.labels[begin + r]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

TrainResult train_teacher(const Dataset& train, const Dataset& test, const ArchSpec& spec,
                          const TrainConfig& cfg, const StepHook& hook) {
  LossConfig ce_only;
  ce_only.alpha = 0.0;
  ce_only.gamma = 0.0;
  return run_training(nullptr, spec, train, test, ce_only, cfg, hook);
}

TrainResult distill_student(const StageModel& teacher, const ArchSpec& student_spec, const Dataset& train,
                            const Dataset& test, const LossConfig& loss, const TrainConfig& cfg,
                            const StepHook& hook) {
  return run_training(&teacher, student_spec, train, test, loss, cfg, hook);
}

std::vector<CompareCell> standard_cells(double alpha, double gamma) {
  auto make = [](std::string name, double a, double g, FeatureLoss f) {
    LossConfig c;
    c.alpha = a;
    c.gamma = g;
    c.feature_loss = f;
    return CompareCell{std::move(name), c};
  };
  return {make("ce", 0.0, 0.0, FeatureLoss::kIpot),
          make("kd", 0.0, gamma, FeatureLoss::kIpot),
          make("ipot", alpha, 0.0, FeatureLoss::kIpot),
          make("ipot+kd", alpha, gamma, FeatureLoss::kIpot),
          make("remd", alpha, 0.0, FeatureLoss::kRemd),
          make("remd+kd", alpha, gamma, FeatureLoss::kRemd),
          make("fitnets", alpha, 0.0, FeatureLoss::kFitnetsL2)};
}

double sample_mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = sample_mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::string Comparison::to_csv() const {
  std::ostringstream out;
  out << "config,runs,mean_acc,std_acc,seeds,accuracies\n";
  for (const auto& r : rows) {
    out << r.name << ',' << r.accuracies.size() << ',' << fmt17(r.mean) << ',' << fmt17(r.stddev) << ',';
    for (std::size_t k = 0; k < r.seeds.size(); ++k) out << (k ? ";" : "") << r.seeds[k];
    out << ',';
    for (std::size_t k = 0; k < r.accuracies.size(); ++k) out << (k ? ";" : "") << fmt17(r.accuracies[k]);
    out << "\n";
  }
  return out.str();
}

std::string Comparison::to_text() const {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-*s  %4s  %16s\n", static_cast<int>(width), "config", "runs",
                "top-1 acc (%)");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-*s  %4zu  %7.2f +- %5.2f\n", static_cast<int>(width), r.name.c_str(),
                  r.accuracies.size(), 100.0 * r.mean, 100.0 * r.stddev);
    out << line;
  }
  return out.str();
}

Comparison compare_losses(const StageModel& teacher, const ArchSpec& student_spec, const Dataset& train,
                          const Dataset& test, const std::vector<CompareCell>& cells,
                          const std::vector<std::uint64_t>& seeds, const TrainConfig& base,
                          std::size_t threads) {
  if (seeds.size() < 2) invalid("compare needs at least 2 seeds");
  if (cells.empty()) invalid("compare needs at least one config");
  for (const auto& c : cells) c.loss.validate();

  const std::size_t jobs = cells.size() * seeds.size();
  std::vector<std::optional<RunReport>> results(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs; k = next++) {
      const auto& cell = cells[k / seeds.size()];
      TrainConfig cfg = base;
      cfg.seed = seeds[k % seeds.size()];
      try {
        auto r = distill_student(teacher, student_spec, train, test, cell.loss, cfg);
        r.report.label = cell.name;
        r.report.steps.clear();
        results[k] = std::move(r.report);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, jobs);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<RunReport> reports;
  reports.reserve(jobs);
  for (auto& r : results) reports.push_back(std::move(*r));
  return summarize_reports(std::move(reports));
}

Comparison summarize_reports(std::vector<RunReport> reports) {
  Comparison out;
  std::map<std::string, std::size_t> row_of;
  for (const auto& r : reports) {
    auto [it, inserted] = row_of.try_emplace(r.label, out.rows.size());
    if (inserted) out.rows.push_back(ComparisonRow{r.label, {}, {}, 0.0, 0.0});
    auto& row = out.rows[it->second];
    row.seeds.push_back(r.seed);
    row.accuracies.push_back(r.final_test_acc);
  }
  for (auto& row : out.rows) {
    row.mean = sample_mean(row.accuracies);
    row.stddev = sample_stddev(row.accuracies);
  }
  out.reports = std::move(reports);
  return out;
}

}  // namespace otkd
