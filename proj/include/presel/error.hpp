#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace presel {

enum class ErrorKind {
  DuplicateId,
  MalformedRecord,
  EmptyDataset,
  RowCountMismatch,
  NonFiniteFeature,
  ZeroNormFeature,
  MalformedFeatureFile,
  EmptyResponse,
  InvalidLogprob,
  DegenerateDenominator,
  InvalidScore,
  InfeasibleBudget,
  TooManyClusters,
  InvalidClusterCount,
  RefAlreadyAssigned,
  SynthSpecError,
  InvalidConfig,
  StageMismatch,
  UnknownSample,
  IoError,
};

inline constexpr std::string_view kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::RowCountMismatch: return "RowCountMismatch";
    case ErrorKind::NonFiniteFeature: return "NonFiniteFeature";
    case ErrorKind::ZeroNormFeature: return "ZeroNormFeature";
    case ErrorKind::MalformedFeatureFile: return "MalformedFeatureFile";
    case ErrorKind::EmptyResponse: return "EmptyResponse";
    case ErrorKind::InvalidLogprob: return "InvalidLogprob";
    case ErrorKind::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorKind::InvalidScore: return "InvalidScore";
    case ErrorKind::InfeasibleBudget: return "InfeasibleBudget";
    case ErrorKind::TooManyClusters: return "TooManyClusters";
    case ErrorKind::InvalidClusterCount: return "InvalidClusterCount";
    case ErrorKind::RefAlreadyAssigned: return "RefAlreadyAssigned";
    case ErrorKind::SynthSpecError: return "SynthSpecError";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::StageMismatch: return "StageMismatch";
    case ErrorKind::UnknownSample: return "UnknownSample";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

// Every failure raised by the library carries a kind so callers (and the CLI's
// machine-readable error line) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(kind_name(kind)) + ": " + message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  [[nodiscard]] std::string_view name() const noexcept { return kind_name(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace presel
