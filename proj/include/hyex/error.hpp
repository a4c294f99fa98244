#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hyex {

enum class ErrorCode {
  InvalidArgument,
  ParseError,
  FileMissing,
  DuplicateId,
  EmptyText,
  DuplicatePair,
  UnknownExercise,
  // embed
  ProviderUnavailable,
  DimensionMismatch,
  EmptyBatch,
  NoTokens,
  SpecMismatch,
  NonFinite,
  // generate
  GenerationParseError,
  NoRuleMatched,
  // align
  ZeroNorm,
  InsufficientPairs,
  DivergedLoss,
  DimMismatch,
  // index
  ZeroNormVector,
  ZeroNormQuery,
  EmptyIndex,
  // retrieve / evalx
  EmptyList,
  DegenerateLabels,
  EmptyPairs,
  EmptyRanking,
  RankingTooShort,
  DegenerateData,
  // tatoeba
  EmptyBenchmark,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library. `code()` is stable and is what the
/// CLI maps onto exit codes; `what()` is "<Code>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

  /// True for failures of remote services (exit code 4 in the CLI).
  bool is_provider_error() const noexcept;

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace hyex
