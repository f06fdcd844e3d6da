#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace aqi {

/// Machine-readable failure categories shared by the library, the CLI and the
/// HTTP service. The string form is what goes on the wire.
enum class ErrorCode {
  ValidationFailed,
  ZeroResearchTime,
  ZeroPostPhDTime,
  EmptyClass,
  EmptyInput,
  InvalidPermutation,
  InfeasibleConstraints,
  BadArchitecture,
  BadSpec,
  CapsMismatch,
  UnknownCohort,
  UnknownModel,
  UnknownRun,
  CohortBusy,
  ParseError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::ZeroResearchTime: return "ZeroResearchTime";
    case ErrorCode::ZeroPostPhDTime: return "ZeroPostPhDTime";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidPermutation: return "InvalidPermutation";
    case ErrorCode::InfeasibleConstraints: return "InfeasibleConstraints";
    case ErrorCode::BadArchitecture: return "BadArchitecture";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::CapsMismatch: return "CapsMismatch";
    case ErrorCode::UnknownCohort: return "UnknownCohort";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::UnknownRun: return "UnknownRun";
    case ErrorCode::CohortBusy: return "CohortBusy";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string field = {})
      : std::runtime_error(message), code_(code), field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  /// Dotted path of the offending input field, empty when not field-specific.
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

}  // namespace aqi
