#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rttc {

enum class ErrorCode {
  ZeroVector,
  DimMismatch,
  MalformedRecord,
  BindFailure,
  EmptyLog,
  BackendUnavailable,
  NonFiniteReward,
  EmptyText,
  EmptySampleSet,
  EmptyRetrieval,
  EmptyStream,
  EmptyInput,
  InvalidFractions,
  InvalidArgument,
  UnknownStage,
  ConfigError,
  IoError,
  ParseError,
};

std::string_view to_string(ErrorCode code);

// Inverse of to_string; unknown names map to ParseError.
ErrorCode error_code_from_string(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace rttc
