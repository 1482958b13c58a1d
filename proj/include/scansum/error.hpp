#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scansum {

enum class ErrorCode {
  // validation
  MalformedManifest,
  SizeMismatch,
  UnknownChannel,
  DimensionMismatch,
  EmptyPrototypes,
  NoKeyframes,
  EmptySet,
  IndexOutOfRange,
  EmptyCorpus,
  MissingMeasurement,
  OutOfValidRange,
  InconsistentInputs,
  InfeasibleSpec,
  InsufficientData,
  InvalidArgument,
  // i/o
  MissingFile,
  UnsupportedFormat,
  IoError,
  // numeric / degenerate input
  NonFiniteValue,
  ZeroNormRow,
  ZeroNormInput,
  EmptyMask,
  DegenerateInput,
  NoEllipseSolution,
  InsufficientTicks,
};

enum class ErrorCategory { Validation = 1, Io = 2, Numeric = 3 };

std::string_view to_string(ErrorCode code);
ErrorCategory category_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace scansum
