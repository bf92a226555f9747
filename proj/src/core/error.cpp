#include "rttc/error.hpp"

#include <array>
#include <utility>

namespace rttc {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 18> kNames{{
    {ErrorCode::ZeroVector, "ZeroVector"},
    {ErrorCode::DimMismatch, "DimMismatch"},
    {ErrorCode::MalformedRecord, "MalformedRecord"},
    {ErrorCode::BindFailure, "BindFailure"},
    {ErrorCode::EmptyLog, "EmptyLog"},
    {ErrorCode::BackendUnavailable, "BackendUnavailable"},
    {ErrorCode::NonFiniteReward, "NonFiniteReward"},
    {ErrorCode::EmptyText, "EmptyText"},
    {ErrorCode::EmptySampleSet, "EmptySampleSet"},
    {ErrorCode::EmptyRetrieval, "EmptyRetrieval"},
    {ErrorCode::EmptyStream, "EmptyStream"},
    {ErrorCode::EmptyInput, "EmptyInput"},
    {ErrorCode::InvalidFractions, "InvalidFractions"},
    {ErrorCode::InvalidArgument, "InvalidArgument"},
    {ErrorCode::UnknownStage, "UnknownStage"},
    {ErrorCode::ConfigError, "ConfigError"},
    {ErrorCode::IoError, "IoError"},
    {ErrorCode::ParseError, "ParseError"},
}};

}  // namespace

std::string_view to_string(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

ErrorCode error_code_from_string(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return ErrorCode::ParseError;
}

}  // namespace rttc
