#pragma once

// Interpolation plan types: which matrix manifold each operator slot lives on
// and which scheme produces the interpolation weights.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "romdb/romtypes.hpp"

namespace romdb {

enum class ManifoldKind { SPD, Symmetric, Nonsingular, Full };
enum class MapMethod { Tangent, Cholesky, Flat };

[[nodiscard]] const char* to_string(ManifoldKind kind) noexcept;
[[nodiscard]] const char* to_string(MapMethod method) noexcept;
[[nodiscard]] ManifoldKind manifold_kind_from_string(const std::string& s);
[[nodiscard]] MapMethod map_method_from_string(const std::string& s);

struct ManifoldSpec {
  ManifoldKind kind = ManifoldKind::Full;
  MapMethod method = MapMethod::Flat;
  /// Tangent-space base point. Absent means the stencil point nearest the target.
  std::optional<std::size_t> reference_index;

  static ManifoldSpec full() { return {ManifoldKind::Full, MapMethod::Flat, std::nullopt}; }
  static ManifoldSpec symmetric() { return {ManifoldKind::Symmetric, MapMethod::Flat, std::nullopt}; }
  static ManifoldSpec spd_tangent() { return {ManifoldKind::SPD, MapMethod::Tangent, std::nullopt}; }
  static ManifoldSpec spd_cholesky() { return {ManifoldKind::SPD, MapMethod::Cholesky, std::nullopt}; }
  static ManifoldSpec nonsingular() {
    return {ManifoldKind::Nonsingular, MapMethod::Tangent, std::nullopt};
  }

  /// Throws InvalidSpec for kind/method combinations that make no sense.
  void validate() const;

  friend bool operator==(const ManifoldSpec&, const ManifoldSpec&) = default;
};

enum class SchemeKind { LatticeMultilinear, TensorCubicSpline, MixedPerAxis, Rbf };
enum class AxisRule { Linear, CubicSpline };
enum class RbfKernel { ThinPlate, Gaussian };

[[nodiscard]] const char* to_string(SchemeKind kind) noexcept;
[[nodiscard]] const char* to_string(AxisRule rule) noexcept;
[[nodiscard]] const char* to_string(RbfKernel kernel) noexcept;
[[nodiscard]] SchemeKind scheme_kind_from_string(const std::string& s);
[[nodiscard]] AxisRule axis_rule_from_string(const std::string& s);
[[nodiscard]] RbfKernel rbf_kernel_from_string(const std::string& s);

struct SchemeSpec {
  SchemeKind kind = SchemeKind::LatticeMultilinear;
  std::vector<AxisRule> axes;  // MixedPerAxis only
  RbfKernel kernel = RbfKernel::ThinPlate;
  double gaussian_width = 1.0;  // in normalized coordinates
  bool allow_extrapolation = false;

  [[nodiscard]] bool is_lattice() const noexcept { return kind != SchemeKind::Rbf; }
  /// Rule used along `axis` for the lattice kinds.
  [[nodiscard]] AxisRule rule_for_axis(std::size_t axis) const;
  void validate(std::size_t n_mu) const;

  friend bool operator==(const SchemeSpec&, const SchemeSpec&) = default;
};

/// Real and imaginary planes of a slot are planned separately.
enum class Part { Re, Im };

[[nodiscard]] const char* to_string(Part part) noexcept;

struct SlotPlanEntry {
  Slot slot = Slot::E;
  Part part = Part::Re;
  ManifoldSpec manifold;

  friend bool operator==(const SlotPlanEntry&, const SlotPlanEntry&) = default;
};

struct OperatorSlotPlan {
  RomOrder order = RomOrder::First;
  ScalarField field = ScalarField::Real;
  std::vector<SlotPlanEntry> entries;

  /// Every slot (and plane) on the Full manifold.
  static OperatorSlotPlan all_full(RomOrder order, ScalarField field);

  [[nodiscard]] const ManifoldSpec& get(Slot slot, Part part = Part::Re) const;
  void set(Slot slot, Part part, ManifoldSpec spec);
  /// Exactly one entry per slot/plane of the ROM kind, each with a valid manifold spec.
  void validate() const;

  friend bool operator==(const OperatorSlotPlan&, const OperatorSlotPlan&) = default;
};

}  // namespace romdb
