#include "hyex/error.hpp"

namespace hyex {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::FileMissing: return "FileMissing";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::DuplicatePair: return "DuplicatePair";
    case ErrorCode::UnknownExercise: return "UnknownExercise";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::NoTokens: return "NoTokens";
    case ErrorCode::SpecMismatch: return "SpecMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::GenerationParseError: return "GenerationParseError";
    case ErrorCode::NoRuleMatched: return "NoRuleMatched";
    case ErrorCode::ZeroNorm: return "ZeroNorm";
    case ErrorCode::InsufficientPairs: return "InsufficientPairs";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ZeroNormVector: return "ZeroNormVector";
    case ErrorCode::ZeroNormQuery: return "ZeroNormQuery";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::EmptyPairs: return "EmptyPairs";
    case ErrorCode::EmptyRanking: return "EmptyRanking";
    case ErrorCode::RankingTooShort: return "RankingTooShort";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::EmptyBenchmark: return "EmptyBenchmark";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

bool Error::is_provider_error() const noexcept {
  return code_ == ErrorCode::ProviderUnavailable || code_ == ErrorCode::DimensionMismatch ||
         code_ == ErrorCode::GenerationParseError;
}

}  // namespace hyex
