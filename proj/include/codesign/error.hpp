#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace codesign {

enum class ErrorCode {
  ParseError,
  UnknownId,
  CycleDetected,
  DisconnectedPart,
  MultipleParents,
  NonPositiveDimension,
  BadUnitVector,
  InvalidAttribute,
  LayoutMismatch,
  ConfigEmpty,
  EmptyFeasibleInterval,
  ShapeMismatch,
  TapeConsumed,
  LengthMismatch,
  NonFiniteLoss,
  NumericalDivergence,
  PopulationTooSmall,
  CheckpointFormat,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::DisconnectedPart: return "DisconnectedPart";
    case ErrorCode::MultipleParents: return "MultipleParents";
    case ErrorCode::NonPositiveDimension: return "NonPositiveDimension";
    case ErrorCode::BadUnitVector: return "BadUnitVector";
    case ErrorCode::InvalidAttribute: return "InvalidAttribute";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::ConfigEmpty: return "ConfigEmpty";
    case ErrorCode::EmptyFeasibleInterval: return "EmptyFeasibleInterval";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TapeConsumed: return "TapeConsumed";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NumericalDivergence: return "NumericalDivergence";
    case ErrorCode::PopulationTooSmall: return "PopulationTooSmall";
    case ErrorCode::CheckpointFormat: return "CheckpointFormat";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

// Every failure in the library is reported through this exception; the code
// lets callers (and the CLI's exit-status mapping) branch without string
// matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace codesign
