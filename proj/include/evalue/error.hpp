#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evalue {

enum class ErrorCode {
  kInvalidArgument,
  kNonFinite,
  kNotSymmetric,
  kNotCentered,
  kNoConvergence,
  kZeroVector,
  kSingularCovariance,
  kDimensionMismatch,
  kDegenerateBase,
  kEmptyValidation,
  kTooLarge,
  kZeroRow,
  kBadMagic,
  kUnsupportedVersion,
  kTruncatedFile,
  kLabelOutOfRange,
  kRaggedRows,
  kParse,
  kIo,
  kInfeasibleShift,
  kStepExceedsPool,
  kInsufficientSource,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kNotSymmetric: return "NotSymmetric";
    case ErrorCode::kNotCentered: return "NotCentered";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kSingularCovariance: return "SingularCovariance";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDegenerateBase: return "DegenerateBase";
    case ErrorCode::kEmptyValidation: return "EmptyValidation";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kZeroRow: return "ZeroRow";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kRaggedRows: return "RaggedRows";
    case ErrorCode::kParse: return "Parse";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kInfeasibleShift: return "InfeasibleShift";
    case ErrorCode::kStepExceedsPool: return "StepExceedsPool";
    case ErrorCode::kInsufficientSource: return "InsufficientSource";
  }
  return "Unknown";
}

// All library failures are reported through this exception type. The code is
// stable and meant to be switched on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised when lambda_min is too small for the discrepancy bound to be defined.
// Carries the offending eigenvalue and the ridge that would repair it.
class SingularCovarianceError : public Error {
 public:
  SingularCovarianceError(double lambda_min, double suggested_ridge,
                          const std::string& context)
      : Error(ErrorCode::kSingularCovariance,
              context + " (lambda_min=" + std::to_string(lambda_min) +
                  "; enable the ridge option to add " +
                  std::to_string(suggested_ridge) + "*I)"),
        lambda_min_(lambda_min),
        suggested_ridge_(suggested_ridge) {}

  double lambda_min() const noexcept { return lambda_min_; }
  double suggested_ridge() const noexcept { return suggested_ridge_; }

 private:
  double lambda_min_;
  double suggested_ridge_;
};

}  // namespace evalue
