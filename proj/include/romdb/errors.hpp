#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace romdb {

/// Failure taxonomy shared by the library, the CLI and the HTTP service.
/// Every thrown romdb::Error carries exactly one of these kinds.
enum class ErrorKind {
  InvalidInput,
  NotSpd,
  SingularMatrix,
  LogUndefined,
  InvalidBasis,
  MeshMismatch,
  ManifoldViolation,
  Extrapolation,
  DegenerateFactor,
  OutOfDomain,
  InsufficientCoverage,
  Resonance,
  SingularPencil,
  NoCrossing,
  RankDeficiency,
  InvalidSpec,
  InvalidDomain,
  LoadError,
  ChecksumFailure,
  VersionMismatch,
  Usage,
};

[[nodiscard]] const char* to_string(ErrorKind kind) noexcept;

/// True for kinds that describe a malformed request rather than a numerical failure.
[[nodiscard]] bool is_usage_kind(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string field = {},
        std::optional<double> detail = std::nullopt);

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  /// Dotted path of the offending field, when the error refers to one.
  [[nodiscard]] const std::string& field() const noexcept { return field_; }
  /// Numeric context: failing pivot (1-based) for NotSpd, condition estimate for SingularMatrix.
  [[nodiscard]] std::optional<double> detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string field_;
  std::optional<double> detail_;
};

/// Non-fatal notes collected while an operation runs (fallbacks, ambiguities).
struct Diagnostics {
  std::vector<std::string> warnings;

  void warn(std::string message) { warnings.push_back(std::move(message)); }
  [[nodiscard]] bool empty() const noexcept { return warnings.empty(); }
};

}  // namespace romdb
