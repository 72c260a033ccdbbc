#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "otkd/distill.hpp"
#include "otkd/model.hpp"

namespace otkd {

// Contents of a run config file. A model input_dim or num_classes of 0
// means "take it from the dataset".
struct RunConfig {
  std::string label = "run";
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  ArchSpec model{0, {16, 16, 8, 8}, 1, 0, ArchSpec{}.leaky_slope};
  LossConfig loss;
  TrainConfig train;

  nlohmann::json to_json() const;
};

// Flat TOML subset: `[section]` headers, `key = value` lines and `#`
// comments. Values are numbers, "strings" or [arrays] of
// nonnegative integers. Recognized keys:
//   [run]   label
//   [data]  test_fraction split_seed
//   [model] stage_widths layers_per_stage input_dim num_classes leaky_slope
//   [loss]  alpha gamma feature_loss epsilon sinkhorn_iters beta ipot_iters
//           stages kd_temperature
//   [train] batch_size epochs lr lr_decay_epochs lr_decay_factor optimizer
//           momentum weight_decay seed embed_dim eval_batch
// Unknown sections or keys, duplicates and type errors raise InvalidConfig
// carrying the 1-based line number.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace otkd
