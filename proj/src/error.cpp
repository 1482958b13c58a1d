#include "scansum/error.hpp"

namespace scansum {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::UnknownChannel: return "UnknownChannel";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyPrototypes: return "EmptyPrototypes";
    case ErrorCode::NoKeyframes: return "NoKeyframes";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::MissingMeasurement: return "MissingMeasurement";
    case ErrorCode::OutOfValidRange: return "OutOfValidRange";
    case ErrorCode::InconsistentInputs: return "InconsistentInputs";
    case ErrorCode::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ZeroNormRow: return "ZeroNormRow";
    case ErrorCode::ZeroNormInput: return "ZeroNormInput";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::NoEllipseSolution: return "NoEllipseSolution";
    case ErrorCode::InsufficientTicks: return "InsufficientTicks";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile:
    case ErrorCode::UnsupportedFormat:
    case ErrorCode::IoError:
      return ErrorCategory::Io;
    case ErrorCode::NonFiniteValue:
    case ErrorCode::ZeroNormRow:
    case ErrorCode::ZeroNormInput:
    case ErrorCode::EmptyMask:
    case ErrorCode::DegenerateInput:
    case ErrorCode::NoEllipseSolution:
    case ErrorCode::InsufficientTicks:
      return ErrorCategory::Numeric;
    default:
      return ErrorCategory::Validation;
  }
}

}  // namespace scansum
