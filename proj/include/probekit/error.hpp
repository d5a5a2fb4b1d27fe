#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace probekit {

enum class ErrorCode {
  // matrixio
  MissingFile,
  MalformedHeader,
  NonFiniteValue,
  LengthMismatch,
  IoFailure,
  SchemaViolation,
  RowCountMismatch,
  DanglingPath,
  // compfeat
  UnknownElement,
  EmptyFormula,
  MalformedToken,
  // residual
  TooFewRows,
  OverlappingFolds,
  DegenerateCovariance,
  DimensionMismatch,
  DimsTooLarge,
  LayoutMismatch,
  MissingOrder,
  // probes
  ZeroVarianceTarget,
  SingleClassFold,
  InvalidConfig,
  // evalstats
  ZeroVarianceFold,
  ZeroResidualVariance,
  NoIsomerGroups,
  DegenerateNull,
  ConstantInput,
  AllZeroDifferences,
  ZeroMatrix,
  // synthgen
  InvalidShares,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::RowCountMismatch: return "RowCountMismatch";
    case ErrorCode::DanglingPath: return "DanglingPath";
    case ErrorCode::UnknownElement: return "UnknownElement";
    case ErrorCode::EmptyFormula: return "EmptyFormula";
    case ErrorCode::MalformedToken: return "MalformedToken";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::OverlappingFolds: return "OverlappingFolds";
    case ErrorCode::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DimsTooLarge: return "DimsTooLarge";
    case ErrorCode::LayoutMismatch: return "LayoutMismatch";
    case ErrorCode::MissingOrder: return "MissingOrder";
    case ErrorCode::ZeroVarianceTarget: return "ZeroVarianceTarget";
    case ErrorCode::SingleClassFold: return "SingleClassFold";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ZeroVarianceFold: return "ZeroVarianceFold";
    case ErrorCode::ZeroResidualVariance: return "ZeroResidualVariance";
    case ErrorCode::NoIsomerGroups: return "NoIsomerGroups";
    case ErrorCode::DegenerateNull: return "DegenerateNull";
    case ErrorCode::ConstantInput: return "ConstantInput";
    case ErrorCode::AllZeroDifferences: return "AllZeroDifferences";
    case ErrorCode::ZeroMatrix: return "ZeroMatrix";
    case ErrorCode::InvalidShares: return "InvalidShares";
  }
  return "Unknown";
}

/// Validation errors are the ones a caller can fix by changing inputs; the CLI
/// maps them to exit status 2, everything else to 3.
constexpr bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile:
    case ErrorCode::MalformedHeader:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::LengthMismatch:
    case ErrorCode::SchemaViolation:
    case ErrorCode::RowCountMismatch:
    case ErrorCode::DanglingPath:
    case ErrorCode::UnknownElement:
    case ErrorCode::EmptyFormula:
    case ErrorCode::MalformedToken:
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidShares:
    case ErrorCode::LayoutMismatch:
    case ErrorCode::MissingOrder:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::DimsTooLarge:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// NonFiniteValue carries the offending cell.
class NonFiniteError : public Error {
 public:
  NonFiniteError(std::size_t row, std::size_t col)
      : Error(ErrorCode::NonFiniteValue,
              "(" + std::to_string(row) + ", " + std::to_string(col) + ")"),
        row_(row),
        col_(col) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

}  // namespace probekit
