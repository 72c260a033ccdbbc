#include "otkd/run_config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "otkd/errors.hpp"

namespace otkd {

namespace {

enum class Kind { kNumber, kUnsigned, kString, kUnsignedList };

const std::map<std::string, Kind, std::less<>>& schema() {
  static const std::map<std::string, Kind, std::less<>> keys = {
      {"run.label", Kind::kString},
      {"data.test_fraction", Kind::kNumber},
      {"data.split_seed", Kind::kUnsigned},
      {"model.stage_widths", Kind::kUnsignedList},
      {"model.layers_per_stage", Kind::kUnsigned},
      {"model.input_dim", Kind::kUnsigned},
      {"model.num_classes", Kind::kUnsigned},
      {"model.leaky_slope", Kind::kNumber},
      {"loss.alpha", Kind::kNumber},
      {"loss.gamma", Kind::kNumber},
      {"loss.feature_loss", Kind::kString},
      {"loss.epsilon", Kind::kNumber},
      {"loss.sinkhorn_iters", Kind::kUnsigned},
      {"loss.beta", Kind::kNumber},
      {"loss.ipot_iters", Kind::kUnsigned},
      {"loss.stages", Kind::kUnsignedList},
      {"loss.kd_temperature", Kind::kNumber},
      {"train.batch_size", Kind::kUnsigned},
      {"train.epochs", Kind::kUnsigned},
      {"train.lr", Kind::kNumber},
      {"train.lr_decay_epochs", Kind::kUnsignedList},
      {"train.lr_decay_factor", Kind::kNumber},
      {"train.optimizer", Kind::kString},
      {"train.momentum", Kind::kNumber},
      {"train.weight_decay", Kind::kNumber},
      {"train.seed", Kind::kUnsigned},
      {"train.embed_dim", Kind::kUnsigned},
      {"train.eval_batch", Kind::kUnsigned},
  };
  return keys;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Strips a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

std::uint64_t parse_unsigned(std::string_view text, std::size_t line) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || p != text.data() + text.size()) {
    throw Error(ErrorCode::kInvalidConfig, "expected a nonnegative integer, got '" + std::string(text) + "'", line);
  }
  return v;
}

nlohmann::json parse_value(std::string_view key, std::string_view text, Kind kind, std::size_t line) {
  switch (kind) {
    case Kind::kString:
      if (text.size() < 2 || text.front() != '"' || text.back() != '"') {
        throw Error(ErrorCode::kInvalidConfig, std::string(key) + " expects a quoted string", line);
      }
      return std::string(text.substr(1, text.size() - 2));
    case Kind::kUnsigned:
      return parse_unsigned(text, line);
    case Kind::kNumber: {
      double v = 0.0;
      const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (text.empty() || ec != std::errc{} || p != text.data() + text.size()) {
        throw Error(ErrorCode::kInvalidConfig, std::string(key) + " expects a number", line);
      }
      return v;
    }
    case Kind::kUnsignedList: {
      if (text.size() < 2 || text.front() != '[' || text.back() != ']') {
        throw Error(ErrorCode::kInvalidConfig, std::string(key) + " expects [a, b, ...]", line);
      }
      auto body = trim(text.substr(1, text.size() - 2));
      nlohmann::json arr = nlohmann::json::array();
      while (!body.empty()) {
        const auto comma = body.find(',');
        arr.push_back(parse_unsigned(body.substr(0, comma), line));
        if (comma == std::string_view::npos) break;
        body = body.substr(comma + 1);
      }
      return arr;
    }
  }
  return nullptr;
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  return {{"label", label},
          {"data", {{"test_fraction", test_fraction}, {"split_seed", split_seed}}},
          {"model", model.to_json()},
          {"loss", loss.to_json()},
          {"train", train.to_json()}};
}

RunConfig parse_run_config(std::string_view text) {
  std::map<std::string, nlohmann::json> sections = {
      {"run", nlohmann::json::object()},  {"data", nlohmann::json::object()},
      {"model", nlohmann::json::object()}, {"loss", nlohmann::json::object()},
      {"train", nlohmann::json::object()}};
  std::string section;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw Error(ErrorCode::kInvalidConfig, "malformed section header", line);
      section = std::string(trim(s.substr(1, s.size() - 2)));
      if (!sections.contains(section)) {
        throw Error(ErrorCode::kInvalidConfig, "unknown section [" + section + "]", line);
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::kInvalidConfig, "expected key = value", line);
    const std::string key(trim(s.substr(0, eq)));
    const std::string full = section.empty() ? key : section + "." + key;
    const auto it = schema().find(full);
    if (it == schema().end()) throw Error(ErrorCode::kInvalidConfig, "unknown key '" + full + "'", line);
    if (!seen.insert(full).second) throw Error(ErrorCode::kInvalidConfig, "duplicate key '" + full + "'", line);
    // Top-level dotted keys (loss.alpha = ...) are accepted too.
    const auto dot = full.find('.');
    auto value = parse_value(full, trim(s.substr(eq + 1)), it->second, line);
    if (full == "loss.feature_loss" && !parse_feature_loss(value.get<std::string>())) {
      throw Error(ErrorCode::kInvalidConfig, "unknown feature_loss '" + value.get<std::string>() + "'", line);
    }
    if (full == "train.optimizer" && value != "momentum" && value != "sgd") {
      throw Error(ErrorCode::kInvalidConfig, "optimizer must be \"momentum\" or \"sgd\"", line);
    }
    sections[full.substr(0, dot)][full.substr(dot + 1)] = std::move(value);
  }

  RunConfig cfg;
  const auto& run = sections["run"];
  cfg.label = run.value("label", cfg.label);
  const auto& data = sections["data"];
  cfg.test_fraction = data.value("test_fraction", cfg.test_fraction);
  cfg.split_seed = data.value("split_seed", cfg.split_seed);
  const auto& model = sections["model"];
  cfg.model.stage_widths = model.value("stage_widths", cfg.model.stage_widths);
  cfg.model.layers_per_stage = model.value("layers_per_stage", cfg.model.layers_per_stage);
  cfg.model.input_dim = model.value("input_dim", cfg.model.input_dim);
  cfg.model.num_classes = model.value("num_classes", cfg.model.num_classes);
  cfg.model.leaky_slope = model.value("leaky_slope", cfg.model.leaky_slope);
  cfg.loss = LossConfig::from_json(sections["loss"]);
  cfg.train = TrainConfig::from_json(sections["train"]);
  cfg.loss.validate();
  cfg.train.validate();
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "data.test_fraction must lie in (0, 1)");
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace otkd
