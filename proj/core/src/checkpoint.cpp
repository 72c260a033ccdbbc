#include "otkd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "otkd/errors.hpp"

namespace otkd {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoints are written in host order, which must be little-endian");

constexpr char kMagic[4] = {'O', 'T', 'D', 'M'};

[[noreturn]] void bad_format(const std::string& what) {
  throw Error(ErrorCode::kFormatVersionMismatch, what);
}

}  // namespace

void save_checkpoint(const StageModel& model, const std::filesystem::path& path,
                     const nlohmann::json& metadata) {
  const nlohmann::json descriptor = {{"arch", model.spec().to_json()},
                                     {"seed", model.seed()},
                                     {"parameter_count", model.parameter_count()},
                                     {"metadata", metadata}};
  const std::string text = descriptor.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint16_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  const auto length = static_cast<std::uint32_t>(text.size());
  out.write(reinterpret_cast<const char*>(&length), sizeof length);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Tensor* t : model.parameters()) {
    out.write(reinterpret_cast<const char*>(t->values.data()),
              static_cast<std::streamsize>(t->values.size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());

  std::ofstream side(path.string() + ".json");
  if (!side) throw Error(ErrorCode::kIoError, "cannot write sidecar for " + path.string());
  side << descriptor.dump(2) << "\n";
}

StageModel load_checkpoint(const std::filesystem::path& path, nlohmann::json* metadata) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIoError, "read failed for " + path.string());

  constexpr std::size_t kHeader = sizeof kMagic + sizeof(std::uint16_t) + sizeof(std::uint32_t);
  if (bytes.size() < kHeader) bad_format("file too short for a checkpoint header");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) bad_format("bad magic bytes");
  std::uint16_t version = 0;
  std::memcpy(&version, bytes.data() + 4, sizeof version);
  if (version != kCheckpointVersion) {
    bad_format("checkpoint version " + std::to_string(version) + ", expected " +
               std::to_string(kCheckpointVersion));
  }
  std::uint32_t length = 0;
  std::memcpy(&length, bytes.data() + 6, sizeof length);
  if (bytes.size() - kHeader < length) bad_format("truncated descriptor");

  nlohmann::json descriptor;
  try {
    descriptor = nlohmann::json::parse(bytes.begin() + kHeader, bytes.begin() + kHeader + length);
  } catch (const nlohmann::json::exception& e) {
    bad_format(std::string("malformed descriptor: ") + e.what());
  }
  ArchSpec spec;
  std::uint64_t seed = 0;
  std::size_t declared = 0;
  try {
    spec = ArchSpec::from_json(descriptor.at("arch"));
    seed = descriptor.at("seed").get<std::uint64_t>();
    declared = descriptor.at("parameter_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    bad_format(std::string("incomplete descriptor: ") + e.what());
  } catch (const Error& e) {
    bad_format(e.what());
  }

  StageModel model = build_model(spec, seed);
  if (model.parameter_count() != declared) bad_format("parameter count disagrees with architecture");
  const std::size_t payload = bytes.size() - kHeader - length;
  if (payload != declared * sizeof(double)) {
    bad_format("weight payload is " + std::to_string(payload) + " bytes, expected " +
               std::to_string(declared * sizeof(double)));
  }
  const char* cursor = bytes.data() + kHeader + length;
  for (Tensor* t : model.parameters()) {
    std::memcpy(t->values.data(), cursor, t->values.size() * sizeof(double));
    cursor += t->values.size() * sizeof(double);
  }
  if (metadata != nullptr) *metadata = descriptor.value("metadata", nlohmann::json::object());
  return model;
}

}  // namespace otkd
