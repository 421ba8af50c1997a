#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dphase {

enum class ErrorCode {
  GridMismatch,
  InvalidGrid,
  InvalidField,
  InvalidParams,
  MalformedHeader,
  CountMismatch,
  NonFiniteValue,
  SingularJacobian,
  NonConvergence,
  LinearSolveFailure,
  InfeasibleObstacle,
  DegenerateGradient,
  NoTouchFound,
  InvalidExponent,
  ExponentBoundViolated,
  ConstantCoefficientRequired,
  PreconditionViolated,
  ParseError,
  ValidationError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::InvalidField: return "InvalidField";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::LinearSolveFailure: return "LinearSolveFailure";
    case ErrorCode::InfeasibleObstacle: return "InfeasibleObstacle";
    case ErrorCode::DegenerateGradient: return "DegenerateGradient";
    case ErrorCode::NoTouchFound: return "NoTouchFound";
    case ErrorCode::InvalidExponent: return "InvalidExponent";
    case ErrorCode::ExponentBoundViolated: return "ExponentBoundViolated";
    case ErrorCode::ConstantCoefficientRequired: return "ConstantCoefficientRequired";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Base exception for every failure raised by the library. The code is the
/// machine-readable part; what() carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dphase
