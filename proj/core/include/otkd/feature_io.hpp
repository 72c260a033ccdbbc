#pragma once

#include <filesystem>

#include "otkd/ot_core.hpp"

namespace otkd {

// CSV: first line "dim=<d>", then one comma-separated row per example.
FeatureBatch read_features_csv(const std::filesystem::path& path);
void write_features_csv(const std::filesystem::path& path, const FeatureBatch& batch);

// Binary: [u32 b][u32 d][f64 x b*d], all little-endian, row-major.
FeatureBatch read_features_binary(const std::filesystem::path& path);
void write_features_binary(const std::filesystem::path& path, const FeatureBatch& batch);

// Sniffs the "dim=" prefix to pick the CSV reader, else binary.
FeatureBatch read_features(const std::filesystem::path& path);

}  // namespace otkd
