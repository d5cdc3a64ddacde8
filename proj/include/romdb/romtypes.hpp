#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "romdb/matcore.hpp"

namespace romdb {

/// A point mu in the parameter domain.
class ParameterPoint {
 public:
  ParameterPoint() = default;
  explicit ParameterPoint(std::vector<double> coords);
  ParameterPoint(std::initializer_list<double> coords);

  [[nodiscard]] std::size_t dim() const noexcept { return coords_.size(); }
  [[nodiscard]] const std::vector<double>& coords() const noexcept { return coords_; }
  [[nodiscard]] double operator[](std::size_t i) const { return coords_[i]; }

  friend bool operator==(const ParameterPoint&, const ParameterPoint&) = default;

 private:
  std::vector<double> coords_;
};

[[nodiscard]] double distance(const ParameterPoint& a, const ParameterPoint& b);

/// Closed axis-aligned box.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  [[nodiscard]] std::size_t dim() const noexcept { return lower.size(); }
  [[nodiscard]] bool contains(const ParameterPoint& p, double rel_tol = 1e-12) const;
  [[nodiscard]] ParameterPoint center() const;

  friend bool operator==(const Box&, const Box&) = default;
};

/// Box domain with an optional partition into non-overlapping sub-boxes.
/// An empty subdomain list means a single sub-domain equal to the whole box.
/// Tensor lattice of points (axis 0 varying slowest).
[[nodiscard]] std::vector<ParameterPoint> lattice_points(const std::vector<std::vector<double>>& axes);

struct ParameterDomain {
  Box box;
  std::vector<Box> subdomains;

  static ParameterDomain from_bounds(std::vector<double> lower, std::vector<double> upper);

  [[nodiscard]] std::size_t dim() const noexcept { return box.dim(); }
  [[nodiscard]] ParameterPoint centroid() const { return box.center(); }
  /// Throws InvalidDomain when bounds are inconsistent or sub-boxes overlap / leave gaps.
  void validate() const;

  friend bool operator==(const ParameterDomain&, const ParameterDomain&) = default;
};

enum class RomOrder { First, Second };

/// Operator slots of both ROM kinds. First order uses E, A, B, G, H;
/// second order uses M, C, K, B, G, H.
enum class Slot { E, A, M, C, K, B, G, H };

[[nodiscard]] const char* to_string(RomOrder order) noexcept;
[[nodiscard]] const char* to_string(Slot slot) noexcept;
[[nodiscard]] std::optional<Slot> slot_from_string(const std::string& name);
[[nodiscard]] std::span<const Slot> slots_of(RomOrder order) noexcept;
[[nodiscard]] std::span<const Slot> square_slots_of(RomOrder order) noexcept;
[[nodiscard]] bool is_square_slot(Slot slot) noexcept;

/// Reduced operators of a first- or second-order LTI system (tagged union over the order).
class Rom {
 public:
  static Rom first_order(DenseMatrix E, DenseMatrix A, DenseMatrix B, DenseMatrix G,
                         DenseMatrix H);
  static Rom second_order(DenseMatrix M, DenseMatrix C, DenseMatrix K, DenseMatrix B,
                          DenseMatrix G, DenseMatrix H);
  /// Builds from operators listed in slots_of(order) order.
  static Rom from_slots(RomOrder order, std::vector<DenseMatrix> slots);

  [[nodiscard]] RomOrder order() const noexcept { return order_; }
  [[nodiscard]] Eigen::Index k() const noexcept { return slots_.front().rows(); }
  [[nodiscard]] Eigen::Index n_inputs() const noexcept;
  [[nodiscard]] Eigen::Index n_outputs() const noexcept;
  [[nodiscard]] ScalarField field() const noexcept { return field_; }

  [[nodiscard]] const DenseMatrix& slot(Slot s) const;
  [[nodiscard]] const std::vector<DenseMatrix>& slots() const noexcept { return slots_; }
  [[nodiscard]] bool has_slot(Slot s) const noexcept;

  /// True when both ROMs share order, k, N_i, N_o and scalar field.
  [[nodiscard]] bool same_shape(const Rom& other) const noexcept;

  friend bool operator==(const Rom&, const Rom&) = default;

 private:
  Rom(RomOrder order, std::vector<DenseMatrix> slots);

  RomOrder order_ = RomOrder::First;
  ScalarField field_ = ScalarField::Real;
  std::vector<DenseMatrix> slots_;
};

/// Orthogonal congruence pair: square operators map to Z^T X Q, B to Z^T B, G to G Q.
struct TransformPair {
  Mat Q;
  Mat Z;

  static TransformPair identity(Eigen::Index k);
  /// Throws InvalidInput unless Q^T Q = I and Z^T Z = I to tol (Frobenius).
  void validate(double tol = 1e-10) const;
  [[nodiscard]] TransformPair inverse() const { return {Q.transpose(), Z.transpose()}; }

  friend bool operator==(const TransformPair&, const TransformPair&) = default;
};

/// Right/left reduced-order bases, orthonormal in the metric (identity when absent).
struct RobPair {
  DenseMatrix V;
  DenseMatrix W;
  std::optional<Mat> metric;

  [[nodiscard]] Eigen::Index n() const noexcept { return V.rows(); }
  [[nodiscard]] Eigen::Index k() const noexcept { return V.cols(); }
  /// Throws InvalidBasis unless V^H metric V = I and W^H metric W = I to tol.
  void validate(double tol = 1e-8) const;
};

/// Per-slot normalizing weights of the distance functional.
struct DistanceWeights {
  RomOrder order = RomOrder::First;
  std::vector<double> values;  // in slots_of(order) order
  std::vector<bool> excluded;  // reference operator had zero norm

  [[nodiscard]] double operator[](Slot s) const;
  [[nodiscard]] static DistanceWeights uniform(RomOrder order, double w = 1.0);
  void validate() const;
};

struct RomRecord {
  ParameterPoint point;
  Rom rom;
  std::optional<std::size_t> hdm_dof_count;
  std::optional<TransformPair> transform_applied;

  friend bool operator==(const RomRecord&, const RomRecord&) = default;
};

[[nodiscard]] Rom apply_transform(const Rom& rom, const TransformPair& t);

/// w_s = 1 / ||X_s^ref||_F^2, zero (and flagged) for zero reference operators.
[[nodiscard]] DistanceWeights normalization_weights(const Rom& ref, Diagnostics* diag = nullptr);

/// Sum over slots of w_s ||a_s - b_s||_F^2 (real and imaginary parts summed).
[[nodiscard]] double rom_distance(const Rom& a, const Rom& b, const DistanceWeights& w);

/// rom_distance(apply_transform(other, t), ref, w).
[[nodiscard]] double equivalence_class_distance(const Rom& ref, const Rom& other,
                                                const TransformPair& t,
                                                const DistanceWeights& w);

}  // namespace romdb
