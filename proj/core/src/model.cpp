#include "otkd/model.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "otkd/errors.hpp"
#include "otkd/rng.hpp"

namespace otkd {

namespace {

constexpr std::uint64_t kModelStream = 0x4d4f44454cULL;
constexpr std::uint64_t kAdapterStream = 0x4144415054ULL;

// gain 6 is He-uniform (a rectifier follows); gain 3 keeps variance for a
// purely linear map.
Dense make_dense(std::size_t in, std::size_t out, SplitMix64& rng, double gain = 6.0) {
  Dense d{Tensor(in, out, 0.0, true), Tensor(1, out, 0.0, true)};
  const double bound = std::sqrt(gain / static_cast<double>(in));
  for (double& w : d.weight.values) w = rng.uniform(-bound, bound);
  return d;
}

Var dense_on_tape(Tape& tape, Var x, Tensor& w, Tensor& b) {
  return add(matmul(x, tape.watch(w)), tape.watch(b));
}

Var dense_on_tape_const(Tape& tape, Var x, const Tensor& w, const Tensor& b) {
  return add(matmul(x, tape.constant(w)), tape.constant(b));
}

void dense_plain(const Matrix& x, const Dense& d, Matrix& out) {
  const std::size_t m = x.rows(), k = d.weight.rows(), n = d.weight.cols();
  out = Matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xip = x(i, p);
      for (std::size_t j = 0; j < n; ++j) out(i, j) += xip * d.weight.values[p * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out(i, j) += d.bias.values[j];
  }
}

void activate_inplace(Matrix& m, double slope) {
  for (double& x : m.data()) x = x > 0.0 ? x : slope * x;
}

Var activate(Var x, double slope) { return slope == 0.0 ? relu(x) : leaky_relu(x, slope); }

}  // namespace

void ArchSpec::validate() const {
  if (stage_widths.size() != kNumStages) {
    throw Error(ErrorCode::kInvalidSpec,
                "expected " + std::to_string(kNumStages) + " stages, got " + std::to_string(stage_widths.size()));
  }
  for (std::size_t w : stage_widths) {
    if (w == 0) throw Error(ErrorCode::kInvalidSpec, "stage widths must be positive");
  }
  if (input_dim == 0) throw Error(ErrorCode::kInvalidSpec, "input_dim must be positive");
  if (num_classes < 2) throw Error(ErrorCode::kInvalidSpec, "num_classes must be at least 2");
  if (layers_per_stage == 0) throw Error(ErrorCode::kInvalidSpec, "layers_per_stage must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw Error(ErrorCode::kInvalidSpec, "leaky_slope must lie in [0, 1)");
}

nlohmann::json ArchSpec::to_json() const {
  return {{"input_dim", input_dim},
          {"stage_widths", stage_widths},
          {"layers_per_stage", layers_per_stage},
          {"num_classes", num_classes},
          {"leaky_slope", leaky_slope}};
}

ArchSpec ArchSpec::from_json(const nlohmann::json& j) {
  ArchSpec s;
  try {
    s.input_dim = j.at("input_dim").get<std::size_t>();
    s.stage_widths = j.at("stage_widths").get<std::vector<std::size_t>>();
    s.layers_per_stage = j.at("layers_per_stage").get<std::size_t>();
    s.num_classes = j.at("num_classes").get<std::size_t>();
    s.leaky_slope = j.value("leaky_slope", ArchSpec{}.leaky_slope);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidSpec, std::string("bad architecture descriptor: ") + e.what());
  }
  return s;
}

StageModel build_model(const ArchSpec& spec, std::uint64_t seed) {
  spec.validate();
  StageModel m;
  m.spec_ = spec;
  m.seed_ = seed;
  SplitMix64 rng = SplitMix64::derive(seed, kModelStream);
  std::size_t in = spec.input_dim;
  for (std::size_t s = 0; s < kNumStages; ++s) {
    for (std::size_t l = 0; l < spec.layers_per_stage; ++l) {
      m.stages_[s].push_back(make_dense(in, spec.stage_widths[s], rng));
      in = spec.stage_widths[s];
    }
  }
  m.head_ = make_dense(in, spec.num_classes, rng);
  return m;
}

StageDims StageModel::stage_dims() const {
  StageDims d{};
  for (std::size_t s = 0; s < kNumStages; ++s) d[s] = spec_.stage_widths[s];
  return d;
}

std::size_t StageModel::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : parameters()) n += t->numel();
  return n;
}

std::vector<Tensor*> StageModel::parameters() {
  std::vector<Tensor*> out;
  for (auto& stage : stages_)
    for (auto& d : stage) {
      out.push_back(&d.weight);
      out.push_back(&d.bias);
    }
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

std::vector<const Tensor*> StageModel::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& stage : stages_)
    for (const auto& d : stage) {
      out.push_back(&d.weight);
      out.push_back(&d.bias);
    }
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

void StageModel::set_trainable(bool trainable) {
  for (Tensor* t : parameters()) {
    t->requires_grad = trainable;
    t->grad.clear();
  }
}

template <typename Self, typename Bind>
StageOutputs StageModel::run(Self& self, Tape& tape, Var inputs, Bind&& bind) {
  if (inputs.cols() != self.spec_.input_dim) {
    throw Error(ErrorCode::kShapeMismatch, "input has " + std::to_string(inputs.cols()) +
                                               " columns, model expects " +
                                               std::to_string(self.spec_.input_dim));
  }
  StageOutputs out;
  Var x = inputs;
  bool first = true;
  for (std::size_t s = 0; s < kNumStages; ++s) {
    for (auto& d : self.stages_[s]) {
      if (!first) x = activate(x, self.spec_.leaky_slope);
      first = false;
      x = bind(tape, x, d);
    }
    out.features[s] = x;
  }
  out.logits = bind(tape, activate(x, self.spec_.leaky_slope), self.head_);
  return out;
}

StageOutputs StageModel::forward(Tape& tape, Var inputs) {
  return run(*this, tape, inputs,
             [](Tape& t, Var x, Dense& d) { return dense_on_tape(t, x, d.weight, d.bias); });
}

StageOutputs StageModel::forward_frozen(Tape& tape, Var inputs) const {
  return run(*this, tape, inputs, [](Tape& t, Var x, const Dense& d) {
    return dense_on_tape_const(t, x, d.weight, d.bias);
  });
}

Var StageModel::apply_head(Tape& tape, Var stage4_features) const {
  return dense_on_tape_const(tape, activate(stage4_features, spec_.leaky_slope), head_.weight, head_.bias);
}

Matrix StageModel::predict_logits(const Matrix& inputs) const {
  if (inputs.cols() != spec_.input_dim) {
    throw Error(ErrorCode::kShapeMismatch, "input has " + std::to_string(inputs.cols()) +
                                               " columns, model expects " + std::to_string(spec_.input_dim));
  }
  Matrix x = inputs, y;
  bool first = true;
  for (const auto& stage : stages_)
    for (const Dense& d : stage) {
      if (!first) activate_inplace(x, spec_.leaky_slope);
      first = false;
      dense_plain(x, d, y);
      x = std::move(y);
    }
  activate_inplace(x, spec_.leaky_slope);
  dense_plain(x, head_, y);
  return y;
}

std::uint64_t StageModel::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Tensor* t : parameters()) {
    for (double v : t->values) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof v);
      for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

EmbeddingAdapter EmbeddingAdapter::build(const StageDims& teacher_dims, const StageDims& student_dims,
                                         std::size_t embed_dim, std::uint64_t seed) {
  if (embed_dim == 0) throw Error(ErrorCode::kInvalidSpec, "embed_dim must be positive");
  EmbeddingAdapter a;
  a.embed_dim_ = embed_dim;
  SplitMix64 rng = SplitMix64::derive(seed, kAdapterStream);
  auto make = [&rng](std::size_t in, std::size_t out, bool trainable) {
    Dense d = make_dense(in, out, rng, 3.0);
    d.weight.requires_grad = trainable;
    d.bias.requires_grad = trainable;
    return LinearMap{std::move(d.weight), std::move(d.bias)};
  };
  for (std::size_t s = 0; s + 1 < kNumStages; ++s) {
    if (teacher_dims[s] != student_dims[s]) a.teacher_maps_[s] = make(teacher_dims[s], student_dims[s], false);
  }
  const std::size_t last = kNumStages - 1;
  if (teacher_dims[last] != student_dims[last]) {
    a.teacher_maps_[last] = make(teacher_dims[last], embed_dim, false);
    a.student_map_ = make(student_dims[last], embed_dim, true);
  }
  return a;
}

std::vector<Tensor*> EmbeddingAdapter::trainable_parameters() {
  std::vector<Tensor*> out;
  if (student_map_) {
    out.push_back(&student_map_->weight);
    out.push_back(&student_map_->bias);
  }
  return out;
}

std::pair<Var, Var> EmbeddingAdapter::align(Tape& tape, Var teacher, Var student, std::size_t stage) {
  if (stage < 1 || stage > kNumStages) {
    throw Error(ErrorCode::kInvalidParams, "stage must be in 1..4", stage);
  }
  const std::size_t td = teacher.cols(), sd = student.cols();
  if (td == sd) return {teacher, student};
  auto& tmap = teacher_maps_[stage - 1];
  const auto missing = [&] {
    return Error(ErrorCode::kMissingAdapter,
                 "no adapter for teacher dim " + std::to_string(td) + " vs student dim " + std::to_string(sd),
                 stage);
  };
  if (!tmap || tmap->weight.rows() != td) throw missing();
  Var t = dense_on_tape(tape, teacher, tmap->weight, tmap->bias);
  if (stage < kNumStages) {
    if (tmap->weight.cols() != sd) throw missing();
    return {t, student};
  }
  if (!student_map_ || student_map_->weight.rows() != sd) throw missing();
  Var s = dense_on_tape(tape, student, student_map_->weight, student_map_->bias);
  return {t, s};
}

std::pair<Var, Var> align_features(Tape& tape, Var teacher, Var student, EmbeddingAdapter& adapter,
                                   std::size_t stage) {
  return adapter.align(tape, teacher, student, stage);
}

}  // namespace otkd
