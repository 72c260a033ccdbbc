#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "otkd/autodiff.hpp"

namespace otkd {

inline constexpr std::size_t kNumStages = 4;

using StageDims = std::array<std::size_t, kNumStages>;

// Architecture descriptor for a stage-structured MLP.
struct ArchSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> stage_widths;  // exactly kNumStages entries
  std::size_t layers_per_stage = 1;
  std::size_t num_classes = 0;
  // Negative-side slope of the hidden activation; 0 is plain ReLU.
  double leaky_slope = 0.1;

  void validate() const;  // InvalidSpec
  nlohmann::json to_json() const;
  static ArchSpec from_json(const nlohmann::json& j);
  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

// y = x W + b with W stored in x out.
struct Dense {
  Tensor weight;
  Tensor bias;
};

struct StageOutputs {
  Var logits;
  std::array<Var, kNumStages> features;
};

// Feedforward classifier in four stages of dense layers. A stage's output
// is the pre-activation of its last dense layer; the activation is applied on entry
// to every later layer and to the head, so the stage-4 output is the
// penultimate representation and logits = head(stage 4 output).
class StageModel {
 public:
  ArchSpec spec() const { return spec_; }
  std::uint64_t seed() const noexcept { return seed_; }
  StageDims stage_dims() const;
  std::size_t parameter_count() const;

  // Parameters in declared layer order: each stage's layers (weight, bias),
  // then the head (weight, bias).
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  void set_trainable(bool trainable);

  // Parameters bound to the tape; gradients land in their grad fields when
  // trainable.
  StageOutputs forward(Tape& tape, Var inputs);
  // Parameters enter as constants; no gradient path to this model exists.
  StageOutputs forward_frozen(Tape& tape, Var inputs) const;
  // head(act(features)), act being the hidden activation.
  Var apply_head(Tape& tape, Var stage4_features) const;

  Matrix predict_logits(const Matrix& inputs) const;

  // FNV-1a over the raw bytes of every parameter value.
  std::uint64_t checksum() const;

 private:
  friend StageModel build_model(const ArchSpec& spec, std::uint64_t seed);

  template <typename Self, typename Bind>
  static StageOutputs run(Self& self, Tape& tape, Var inputs, Bind&& bind);

  ArchSpec spec_;
  std::uint64_t seed_ = 0;
  std::array<std::vector<Dense>, kNumStages> stages_;
  Dense head_;
};

// Deterministic He-style uniform init, U(-sqrt(6/fan_in), sqrt(6/fan_in)),
// zero biases. Throws InvalidSpec.
StageModel build_model(const ArchSpec& spec, std::uint64_t seed);

struct LinearMap {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out
};

// Linear maps that bring teacher and student stage features to a shared
// dimensionality. Stages 1-3 map teacher -> student dim; stage 4 maps both
// sides to embed_dim. Maps exist only where dims differ. Teacher-side maps
// are frozen random projections; the stage-4 student map is trainable. Maps
// are initialized U(-sqrt(3/fan_in), sqrt(3/fan_in)) with zero bias.
class EmbeddingAdapter {
 public:
  static EmbeddingAdapter build(const StageDims& teacher_dims, const StageDims& student_dims,
                                std::size_t embed_dim, std::uint64_t seed);

  std::size_t embed_dim() const noexcept { return embed_dim_; }
  bool has_teacher_map(std::size_t stage) const { return teacher_maps_.at(stage - 1).has_value(); }
  bool has_student_map() const noexcept { return student_map_.has_value(); }
  std::vector<Tensor*> trainable_parameters();

  std::pair<Var, Var> align(Tape& tape, Var teacher, Var student, std::size_t stage);

 private:
  std::size_t embed_dim_ = 0;
  std::array<std::optional<LinearMap>, kNumStages> teacher_maps_;
  std::optional<LinearMap> student_map_;
};

// Returns (teacher, student) features with equal dimensionality for stage
// 1..4. Identity when dims already match; MissingAdapter(stage) when they
// differ and the adapter lacks the map.
std::pair<Var, Var> align_features(Tape& tape, Var teacher, Var student,
                                   EmbeddingAdapter& adapter, std::size_t stage);

}  // namespace otkd
