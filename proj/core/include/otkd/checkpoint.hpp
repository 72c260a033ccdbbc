#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "otkd/model.hpp"

namespace otkd {

inline constexpr std::uint16_t kCheckpointVersion = 1;

// Layout, little-endian:
//   "OTDM" | u16 version | u32 n | n bytes of JSON descriptor |
//   f64 weights in StageModel::parameters() order
// The descriptor holds {"arch", "seed", "parameter_count", "metadata"}. A
// pretty-printed copy is written to <path>.json for humans; loading reads
// only the binary file.
void save_checkpoint(const StageModel& model, const std::filesystem::path& path,
                     const nlohmann::json& metadata = nlohmann::json::object());

// Throws IoError when the file cannot be read and FormatVersionMismatch for
// a wrong magic/version, a malformed descriptor, or a payload whose length
// is not exactly the declared weight count.
StageModel load_checkpoint(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

}  // namespace otkd
