#include "otkd/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>

#include "otkd/errors.hpp"
#include "otkd/rng.hpp"

namespace otkd {

namespace {

constexpr std::uint64_t kMeansStream = 0x4d45414e53;
constexpr std::uint64_t kNoiseStream = 0x4e4f495345;
constexpr std::uint64_t kSplitStream = 0x53504c4954;
constexpr double kMeanRadius = 3.0;

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.inputs = Matrix(indices.size(), dim());
  out.labels.reserve(indices.size());
  out.num_classes = num_classes;
  out.provenance = provenance;
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = inputs.row(indices[r]);
    std::copy(src.begin(), src.end(), out.inputs.row(r).begin());
    out.labels.push_back(labels[indices[r]]);
  }
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t y : labels) ++counts[y];
  return counts;
}

nlohmann::json MixtureParams::to_json() const {
  return {{"generator", "gaussian_mixture"},
          {"num_classes", num_classes},
          {"per_class", per_class},
          {"dim", dim},
          {"spread", spread},
          {"mean_radius", kMeanRadius},
          {"seed", seed}};
}

Dataset gen_gaussian_mixture(const MixtureParams& p) {
  if (p.num_classes < 2) throw Error(ErrorCode::kInvalidParams, "need at least 2 classes");
  if (p.per_class < 1) throw Error(ErrorCode::kInvalidParams, "per_class must be >= 1");
  if (p.dim < 2) throw Error(ErrorCode::kInvalidParams, "dim must be >= 2");
  if (!(p.spread > 0.0) || !std::isfinite(p.spread)) {
    throw Error(ErrorCode::kInvalidParams, "spread must be positive and finite");
  }

  auto mean_rng = SplitMix64::derive(p.seed, kMeansStream);
  Matrix means(p.num_classes, p.dim);
  for (std::size_t k = 0; k < p.num_classes; ++k) {
    auto row = means.row(k);
    double norm = 0.0;
    // A Gaussian draw has zero norm with probability zero, but redraw anyway.
    while (norm < 1e-6) {
      norm = 0.0;
      for (double& x : row) {
        x = mean_rng.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
    }
    for (double& x : row) x *= kMeanRadius / norm;
  }

  auto noise_rng = SplitMix64::derive(p.seed, kNoiseStream);
  Dataset ds;
  ds.num_classes = p.num_classes;
  ds.inputs = Matrix(p.num_classes * p.per_class, p.dim);
  ds.labels.reserve(p.num_classes * p.per_class);
  for (std::size_t k = 0; k < p.num_classes; ++k) {
    for (std::size_t n = 0; n < p.per_class; ++n) {
      const std::size_t r = ds.labels.size();
      for (std::size_t j = 0; j < p.dim; ++j) ds.inputs(r, j) = means(k, j) + p.spread * noise_rng.normal();
      ds.labels.push_back(k);
    }
  }
  ds.provenance = p.to_json();
  return ds;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, "empty file", 1);
  const auto header = split_fields(trim(line));
  if (header.size() < 2 || trim(header[0]) != "label") {
    throw Error(ErrorCode::kParseError, "header must be label,f1,...,fd", 1);
  }
  const std::size_t d = header.size() - 1;

  std::vector<double> values;
  std::vector<std::size_t> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto fields = split_fields(text);
    if (fields.size() != d + 1) {
      throw Error(ErrorCode::kInconsistentWidth,
                  "expected " + std::to_string(d + 1) + " fields, found " + std::to_string(fields.size()),
                  line_no);
    }
    const auto label_text = trim(fields[0]);
    std::size_t label = 0;
    const auto [lp, lec] = std::from_chars(label_text.data(), label_text.data() + label_text.size(), label);
    if (lec != std::errc{} || lp != label_text.data() + label_text.size() || label_text.empty()) {
      throw Error(ErrorCode::kParseError, "label must be a nonnegative integer: '" + std::string(label_text) + "'",
                  line_no);
    }
    labels.push_back(label);
    for (std::size_t j = 1; j <= d; ++j) {
      const auto f = trim(fields[j]);
      double x = 0.0;
      const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
      if (ec != std::errc{} || p != f.data() + f.size() || f.empty() || !std::isfinite(x)) {
        throw Error(ErrorCode::kParseError, "bad number '" + std::string(f) + "'", line_no);
      }
      values.push_back(x);
    }
  }
  if (labels.empty()) throw Error(ErrorCode::kParseError, "no data rows", line_no);

  Dataset ds;
  ds.inputs = Matrix(labels.size(), d, std::move(values));
  ds.num_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  ds.labels = std::move(labels);
  ds.provenance = {{"source", path.string()}};
  const std::filesystem::path sidecar = path.string() + ".json";
  if (std::filesystem::exists(sidecar)) {
    std::ifstream side(sidecar);
    try {
      ds.provenance = nlohmann::json::parse(side);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, "bad provenance sidecar: " + std::string(e.what()));
    }
  }
  return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "label";
  for (std::size_t j = 1; j <= ds.dim(); ++j) out << ",f" << j;
  out << "\n";
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.labels[i];
    for (double x : ds.inputs.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", x);
      out << ',' << buf;
    }
    out << "\n";
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
  std::ofstream side(path.string() + ".json", std::ios::trunc);
  side << ds.provenance.dump(2) << "\n";
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidFraction, "test fraction must lie in (0, 1)");
  }
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

  auto rng = SplitMix64::derive(seed, kSplitStream);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (std::size_t k = 0; k < ds.num_classes; ++k) {
    auto& members = by_class[k];
    if (members.empty()) continue;
    if (members.size() < 2) {
      throw Error(ErrorCode::kClassTooSmall,
                  "class " + std::to_string(k) + " has a single example; cannot split", k);
    }
    const auto n = static_cast<double>(members.size());
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * n));
    n_test = std::clamp<std::size_t>(n_test, 1, members.size() - 1);
    rng.shuffle(std::span<std::size_t>(members));
    test_idx.insert(test_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
    train_idx.insert(train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  Dataset train = ds.subset(train_idx);
  Dataset test = ds.subset(test_idx);
  const nlohmann::json split_info = {{"test_fraction", test_fraction}, {"seed", seed}};
  train.provenance = {{"parent", ds.provenance}, {"split", split_info}, {"part", "train"}};
  test.provenance = {{"parent", ds.provenance}, {"split", split_info}, {"part", "test"}};
  return {std::move(train), std::move(test)};
}

Matrix one_hot(const std::vector<std::size_t>& labels, std::size_t num_classes) {
  Matrix out(labels.size(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw Error(ErrorCode::kInvalidParams, "label out of range", i);
    }
    out(i, labels[i]) = 1.0;
  }
  return out;
}

}  // namespace otkd
