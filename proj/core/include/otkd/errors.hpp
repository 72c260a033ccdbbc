#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace otkd {

enum class ErrorCode {
  kDimensionMismatch,
  kZeroNormRow,
  kNonSquare,
  kNonFinite,
  kNumericalUnderflow,
  kShapeMismatch,
  kInvalidSpec,
  kMissingAdapter,
  kIoError,
  kFormatVersionMismatch,
  kDivergenceDetected,
  kInvalidParams,
  kParseError,
  kInconsistentWidth,
  kInvalidFraction,
  kClassTooSmall,
  kInvalidConfig,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure in the library is reported through this type. The optional
// index carries the offending row (ZeroNormRow), the 1-based line number
// (ParseError, InconsistentWidth) or the stage (MissingAdapter).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> index = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
};

}  // namespace otkd
