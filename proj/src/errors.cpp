#include "romdb/errors.hpp"

namespace romdb {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::NotSpd: return "not-spd";
    case ErrorKind::SingularMatrix: return "singular-matrix";
    case ErrorKind::LogUndefined: return "log-undefined";
    case ErrorKind::InvalidBasis: return "invalid-basis";
    case ErrorKind::MeshMismatch: return "mesh-mismatch";
    case ErrorKind::ManifoldViolation: return "manifold-violation";
    case ErrorKind::Extrapolation: return "extrapolation";
    case ErrorKind::DegenerateFactor: return "degenerate-factor";
    case ErrorKind::OutOfDomain: return "out-of-domain";
    case ErrorKind::InsufficientCoverage: return "insufficient-coverage";
    case ErrorKind::Resonance: return "resonance";
    case ErrorKind::SingularPencil: return "singular-pencil";
    case ErrorKind::NoCrossing: return "no-crossing";
    case ErrorKind::RankDeficiency: return "rank-deficiency";
    case ErrorKind::InvalidSpec: return "invalid-spec";
    case ErrorKind::InvalidDomain: return "invalid-domain";
    case ErrorKind::LoadError: return "load-error";
    case ErrorKind::ChecksumFailure: return "checksum-failure";
    case ErrorKind::VersionMismatch: return "version-mismatch";
    case ErrorKind::Usage: return "usage";
  }
  return "unknown";
}

bool is_usage_kind(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::InvalidSpec:
    case ErrorKind::OutOfDomain:
    case ErrorKind::InvalidDomain:
    case ErrorKind::Extrapolation:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorKind kind, const std::string& message, std::string field,
             std::optional<double> detail)
    : std::runtime_error(message), kind_(kind), field_(std::move(field)), detail_(detail) {}

}  // namespace romdb
