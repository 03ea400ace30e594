#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace retihemo {

enum class ErrorCode {
  EmptyInput,
  InvalidCenterline,
  NoArterialTree,
  RootMismatch,
  InvalidRadius,
  NoOutlets,
  SolveFailure,
  IncompleteSolution,
  InsufficientData,
  InvalidRegularization,
  FoldError,
  UndefinedCorrelation,
  EmptyGroup,
  DepthTooLarge,
  InvalidField,
  InvalidArgument,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-checkable error category.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidCenterline: return "InvalidCenterline";
    case ErrorCode::NoArterialTree: return "NoArterialTree";
    case ErrorCode::RootMismatch: return "RootMismatch";
    case ErrorCode::InvalidRadius: return "InvalidRadius";
    case ErrorCode::NoOutlets: return "NoOutlets";
    case ErrorCode::SolveFailure: return "SolveFailure";
    case ErrorCode::IncompleteSolution: return "IncompleteSolution";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InvalidRegularization: return "InvalidRegularization";
    case ErrorCode::FoldError: return "FoldError";
    case ErrorCode::UndefinedCorrelation: return "UndefinedCorrelation";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::DepthTooLarge: return "DepthTooLarge";
    case ErrorCode::InvalidField: return "InvalidField";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace retihemo
