#include "otkd/feature_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "otkd/errors.hpp"

namespace otkd {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary feature files assume a little-endian host");

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& token, std::size_t line) {
  const std::string t = trim(token);
  if (t.empty()) throw Error(ErrorCode::kParseError, "empty field", line);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(t, &used);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParseError, "not a number: '" + t + "'", line);
  }
  if (used != t.size()) throw Error(ErrorCode::kParseError, "trailing characters in '" + t + "'", line);
  return value;
}

}  // namespace

FeatureBatch read_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, "missing dim header", 1);
  line = trim(line);
  if (line.rfind("dim=", 0) != 0) throw Error(ErrorCode::kParseError, "expected 'dim=<d>' header", 1);
  std::size_t dim = 0;
  try {
    dim = static_cast<std::size_t>(std::stoul(line.substr(4)));
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParseError, "bad dim value", 1);
  }
  if (dim == 0) throw Error(ErrorCode::kParseError, "dim must be positive", 1);

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::size_t count = 0;
    while (std::getline(ss, field, ',')) {
      values.push_back(parse_double(field, line_no));
      ++count;
    }
    if (count != dim) {
      throw Error(ErrorCode::kInconsistentWidth,
                  "expected " + std::to_string(dim) + " values, got " + std::to_string(count),
                  line_no);
    }
    ++rows;
  }
  if (rows == 0) throw Error(ErrorCode::kParseError, "no feature rows", line_no);
  return FeatureBatch(Matrix(rows, dim, std::move(values)));
}

void write_features_csv(const std::filesystem::path& path, const FeatureBatch& batch) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "dim=" << batch.dim() << "\n";
  char buf[32];
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    const auto row = batch.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", row[k]);
      out << (k ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

FeatureBatch read_features_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::uint32_t header[2] = {0, 0};
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in) throw Error(ErrorCode::kParseError, "truncated binary header in " + path.string());
  const std::size_t b = header[0];
  const std::size_t d = header[1];
  if (b == 0 || d == 0) throw Error(ErrorCode::kParseError, "binary header has zero b or d");
  // Checked before allocating so a text file misread as binary fails cleanly.
  const auto bytes = std::filesystem::file_size(path);
  if (bytes != sizeof header + b * d * sizeof(double)) {
    throw Error(ErrorCode::kParseError,
                "binary header claims " + std::to_string(b) + "x" + std::to_string(d) +
                    " but file has " + std::to_string(bytes) + " bytes: " + path.string() +
                    " (CSV feature files start with a 'dim=<d>' line)");
  }
  std::vector<double> values(b * d);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) throw Error(ErrorCode::kParseError, "truncated binary payload in " + path.string());
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::kParseError, "trailing bytes in " + path.string());
  }
  return FeatureBatch(Matrix(b, d, std::move(values)));
}

void write_features_binary(const std::filesystem::path& path, const FeatureBatch& batch) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  const std::uint32_t header[2] = {static_cast<std::uint32_t>(batch.batch_size()),
                                   static_cast<std::uint32_t>(batch.dim())};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  const auto data = batch.data().data();
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

FeatureBatch read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  char prefix[4] = {0, 0, 0, 0};
  in.read(prefix, 4);
  const bool is_csv = in.gcount() == 4 && std::memcmp(prefix, "dim=", 4) == 0;
  in.close();
  return is_csv ? read_features_csv(path) : read_features_binary(path);
}

}  // namespace otkd
