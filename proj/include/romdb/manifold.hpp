#pragma once

// Interpolation of reduced operators on matrix manifolds: map every entry to a
// tangent space (or a factor space), combine with scheme weights, map back.

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "romdb/database.hpp"
#include "romdb/plan.hpp"

namespace romdb {

/// Interpolation weights of `points` at `target`. Lattice kinds require a full
/// tensor grid; rbf requires at least N_mu + 1 points. `bounds` is the region
/// inside which no extrapolation is reported (defaults to the points' bounding box).
[[nodiscard]] Vec scheme_weights(const std::vector<ParameterPoint>& points, const ParameterPoint& target,
                                 const SchemeSpec& scheme, const std::optional<Box>& bounds = std::nullopt,
                                 Diagnostics* diag = nullptr);

/// Cardinal weights of the natural cubic spline through sorted nodes `x` at t.
[[nodiscard]] Vec natural_spline_weights(const std::vector<double>& x, double t);
/// Cardinal weights of piecewise-linear interpolation through sorted nodes `x` at t.
[[nodiscard]] Vec linear_weights(const std::vector<double>& x, double t);

/// Combines `entries` with `weights` on the given manifold. `reference` indexes
/// the tangent-space base point within `entries`. Membership failures raise
/// ManifoldViolation naming the entry.
[[nodiscard]] Mat interpolate_weighted(const std::vector<Mat>& entries, const Vec& weights,
                                       const ManifoldSpec& manifold, std::size_t reference,
                                       Diagnostics* diag = nullptr);

/// Full four-step interpolation of one real operator plane at `target`.
[[nodiscard]] Mat interpolate_slot(const std::vector<Mat>& entries, const std::vector<ParameterPoint>& points,
                                   const ParameterPoint& target, const ManifoldSpec& manifold,
                                   const SchemeSpec& scheme, Diagnostics* diag = nullptr);

/// SPD interpolation through lower Cholesky factors: S* = sum w_i S_i, result S* S*^T.
[[nodiscard]] Mat cholesky_interpolate(const std::vector<Mat>& entries, const std::vector<ParameterPoint>& points,
                                       const ParameterPoint& target, const SchemeSpec& scheme);
[[nodiscard]] Mat cholesky_interpolate_weighted(const std::vector<Mat>& entries, const Vec& weights);

struct ManifoldChoice {
  std::size_t index = 0;  // into the candidate list
  ManifoldSpec choice;
  std::vector<double> indicators;  // +inf for candidates failing membership
};

/// Leave-one-out nonlinearity indicator per candidate; the smallest wins, ties go to Full.
[[nodiscard]] ManifoldChoice manifold_choice_heuristic(const std::vector<Mat>& entries,
                                                       const std::vector<ParameterPoint>& points,
                                                       const std::vector<ManifoldSpec>& candidates,
                                                       const SchemeSpec& scheme);

/// Runs the heuristic for every slot plane of a database and returns the chosen plan.
[[nodiscard]] OperatorSlotPlan choose_plan(const RomDatabase& db, const std::vector<ManifoldSpec>& candidates,
                                           std::vector<ManifoldChoice>* details = nullptr);

struct InterpolationOptions {
  /// Permits querying a database whose consistency was never enforced.
  bool allow_inconsistent = false;
  /// Overrides the database's plan / scheme when set.
  std::optional<OperatorSlotPlan> plan;
  std::optional<SchemeSpec> scheme;
};

/// ROM at `target` from the sub-database that covers it.
[[nodiscard]] Rom interpolate_rom(const RomDatabase& db, const ParameterPoint& target,
                                  const InterpolationOptions& opts = {}, Diagnostics* diag = nullptr);

}  // namespace romdb
