#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "romdb/plan.hpp"
#include "romdb/romtypes.hpp"

namespace romdb {

enum class ConsistencyMode { None, Procrustes, FixedPointG, FixedPointPG };

[[nodiscard]] const char* to_string(ConsistencyMode mode) noexcept;
[[nodiscard]] ConsistencyMode consistency_mode_from_string(const std::string& s);

struct ConsistencyInfo {
  ConsistencyMode mode = ConsistencyMode::None;
  std::optional<std::size_t> reference_index;

  [[nodiscard]] bool enforced() const noexcept { return mode != ConsistencyMode::None; }

  friend bool operator==(const ConsistencyInfo&, const ConsistencyInfo&) = default;
};

/// Ordered set of (mu_i, ROM_i) plus the metadata needed to query it online.
struct RomDatabase {
  static constexpr int kFormatVersion = 1;

  RomOrder order = RomOrder::First;
  Eigen::Index k = 0;
  Eigen::Index n_inputs = 0;
  Eigen::Index n_outputs = 0;
  ScalarField field = ScalarField::Real;
  std::vector<RomRecord> records;
  ParameterDomain domain;
  /// Record indices per sub-domain, aligned with subdomain_boxes().
  std::vector<std::vector<std::size_t>> partition;
  OperatorSlotPlan plan;
  SchemeSpec scheme;
  ConsistencyInfo consistency;
  int format_version = kFormatVersion;
  /// Reduced-order bases used to build each record. Kept in memory only (never
  /// persisted); needed by Procrustes alignment.
  std::vector<std::optional<RobPair>> bases;

  /// Starts a database from its first record; shapes are taken from that ROM.
  static RomDatabase create(ParameterDomain domain, std::vector<RomRecord> records);

  [[nodiscard]] std::size_t size() const noexcept { return records.size(); }
  [[nodiscard]] std::size_t n_mu() const noexcept { return domain.dim(); }
  [[nodiscard]] std::vector<Box> subdomain_boxes() const;
  [[nodiscard]] std::vector<ParameterPoint> points() const;

  /// Index of the record closest to the domain centroid.
  [[nodiscard]] std::size_t centroid_record() const;

  /// N_DB (N_mu + 2k^2 + k(N_i + N_o) + N_i N_o) for first order, 3k^2 for
  /// second order; operator entries doubled for complex databases.
  [[nodiscard]] std::size_t expected_entry_count() const;
  /// Scalars actually held by the records (parameter coordinates plus operator planes).
  [[nodiscard]] std::size_t stored_entry_count() const;

  /// Checks shapes, record homogeneity, domain, partition, plan and scheme.
  void validate() const;

  friend bool operator==(const RomDatabase& a, const RomDatabase& b);
};

}  // namespace romdb
