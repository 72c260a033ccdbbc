#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "otkd/matrix.hpp"

namespace otkd {

struct Dataset {
  Matrix inputs;                    // n x d
  std::vector<std::size_t> labels;  // n entries in [0, num_classes)
  std::size_t num_classes = 0;
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return inputs.cols(); }
  // Rows `indices` in the given order; provenance is copied.
  Dataset subset(const std::vector<std::size_t>& indices) const;
  std::vector<std::size_t> class_counts() const;
};

struct MixtureParams {
  std::size_t num_classes = 5;
  std::size_t per_class = 200;
  std::size_t dim = 16;
  double spread = 1.0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

// K isotropic Gaussian clusters. Means are seed-derived random directions
// scaled to radius 3; each example is mean + spread * N(0, I). Rows are
// grouped by class. Throws InvalidParams.
Dataset gen_gaussian_mixture(const MixtureParams& params);

// CSV with header `label,f1,...,fd`. Labels must be nonnegative integers;
// K is inferred as max label + 1. ParseError / InconsistentWidth carry the
// 1-based line number. A `<path>.json` sidecar, when present, is loaded as
// provenance.
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& ds, const std::filesystem::path& path);

// Stratified split. Each class with n_c examples contributes
// clamp(round(fraction * n_c), 1, n_c - 1) test examples chosen by a
// seeded shuffle; both halves keep ascending original order.
std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction, std::uint64_t seed);

// n x K indicator matrix.
Matrix one_hot(const std::vector<std::size_t>& labels, std::size_t num_classes);

}  // namespace otkd
