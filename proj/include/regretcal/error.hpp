#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace regretcal {

enum class ErrorCode {
  // dataset
  MalformedRow,
  ScoreOutOfRange,
  LabelNotBinary,
  InconsistentFeatureDim,
  MissingColumn,
  FileNotFound,
  EmptyDataset,
  TooFewSamples,
  InvalidSplit,
  // decision
  DegenerateUtility,
  ThresholdOutOfRange,
  ThresholdAtBoundary,
  // binning / recalibration
  EmptyInput,
  NonPositiveBins,
  LengthMismatch,
  SingleClass,
  NoFeatures,
  IncompatibleMap,
  // grouping
  FoldOverlap,
  EmptyRegion,
  // regret
  BinningMismatch,
  // synthetic
  InadmissibleSpec,
  UnsupportedThreshold,
  TooManyLevels,
  InvalidOracle,
  // configuration
  InvalidConfig,
  // numerical failure
  NonFinite,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::LabelNotBinary: return "LabelNotBinary";
    case ErrorCode::InconsistentFeatureDim: return "InconsistentFeatureDim";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::InvalidSplit: return "InvalidSplit";
    case ErrorCode::DegenerateUtility: return "DegenerateUtility";
    case ErrorCode::ThresholdOutOfRange: return "ThresholdOutOfRange";
    case ErrorCode::ThresholdAtBoundary: return "ThresholdAtBoundary";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonPositiveBins: return "NonPositiveBins";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NoFeatures: return "NoFeatures";
    case ErrorCode::IncompatibleMap: return "IncompatibleMap";
    case ErrorCode::FoldOverlap: return "FoldOverlap";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::BinningMismatch: return "BinningMismatch";
    case ErrorCode::InadmissibleSpec: return "InadmissibleSpec";
    case ErrorCode::UnsupportedThreshold: return "UnsupportedThreshold";
    case ErrorCode::TooManyLevels: return "TooManyLevels";
    case ErrorCode::InvalidOracle: return "InvalidOracle";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NonFinite: return "NonFinite";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable code and, for file parsing errors,
/// the 1-based line number of the offending row (the header is line 1).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(format(code, message, line)), code_(code), line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  static std::string format(ErrorCode code, const std::string& message, std::optional<std::size_t> line) {
    std::string out(to_string(code));
    if (line) out += "(" + std::to_string(*line) + ")";
    if (!message.empty()) out += ": " + message;
    return out;
  }

  ErrorCode code_;
  std::optional<std::size_t> line_;
};

}  // namespace regretcal
