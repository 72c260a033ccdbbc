#include "otkd/errors.hpp"

namespace otkd {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kZeroNormRow: return "ZeroNormRow";
    case ErrorCode::kNonSquare: return "NonSquare";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kNumericalUnderflow: return "NumericalUnderflow";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kMissingAdapter: return "MissingAdapter";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kFormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::kDivergenceDetected: return "DivergenceDetected";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInconsistentWidth: return "InconsistentWidth";
    case ErrorCode::kInvalidFraction: return "InvalidFraction";
    case ErrorCode::kClassTooSmall: return "ClassTooSmall";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

static std::string format_message(ErrorCode code, const std::string& message,
                                  std::optional<std::size_t> index) {
  std::string out = to_string(code);
  if (index) {
    const char* what = "index";
    switch (code) {
      case ErrorCode::kParseError:
      case ErrorCode::kInconsistentWidth:
      case ErrorCode::kInvalidConfig: what = "line"; break;
      case ErrorCode::kZeroNormRow: what = "row"; break;
      case ErrorCode::kMissingAdapter: what = "stage"; break;
      case ErrorCode::kClassTooSmall: what = "class"; break;
      default: break;
    }
    out += " (" + std::string(what) + " " + std::to_string(*index) + ")";
  }
  out += ": ";
  out += message;
  return out;
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> index)
    : std::runtime_error(format_message(code, message, index)),
      code_(code),
      index_(index) {}

}  // namespace otkd
