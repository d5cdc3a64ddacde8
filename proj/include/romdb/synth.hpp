#pragma once

// Desk-scale synthetic high-dimensional models and reduced-order basis builders.

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/SparseCore>

#include "romdb/database.hpp"

namespace romdb {

using SpMat = Eigen::SparseMatrix<cplx>;

/// First-order (E, A, B, G, H) or second-order (M, C, K, B, G, H) LTI system.
struct HdmSystem {
  RomOrder order = RomOrder::Second;
  SpMat E, A;     // first order
  SpMat M, C, K;  // second order
  CMat B, G, H;
  ParameterPoint point;

  [[nodiscard]] Eigen::Index n() const noexcept { return B.rows(); }
  [[nodiscard]] Eigen::Index n_inputs() const noexcept { return B.cols(); }
  [[nodiscard]] Eigen::Index n_outputs() const noexcept { return G.rows(); }
  /// True when every operator has identically zero imaginary part.
  [[nodiscard]] bool is_real() const;
  /// Copy with all imaginary parts dropped.
  [[nodiscard]] HdmSystem real_part() const;
  void validate() const;
};

/// c0 + sum_a c[a] p_a
struct AffineLaw {
  double c0 = 1.0;
  std::vector<double> c;

  [[nodiscard]] double operator()(const ParameterPoint& p) const;
};

/// Degrees-of-freedom count as a function of the parameter point: an explicit
/// table entry when the point matches one, otherwise round(base * law(p)).
struct DofLaw {
  double base = 40.0;
  AffineLaw law;
  std::vector<std::pair<std::vector<double>, std::size_t>> table;

  [[nodiscard]] std::size_t operator()(const ParameterPoint& p) const;
};

struct MassBump {
  double amplitude = 0.5;  // relative to the uniform line density
  double width = 0.1;      // Gaussian width as a fraction of the chain length
  AffineLaw position;      // centre as a fraction of the chain length
};

/// Fixed-free mass-spring chain on [0, 1]. With continuum scaling the nodal mass
/// is rho/N and the spring constant EA*N, so chains with different N model the
/// same rod.
struct ChainSpec {
  DofLaw dofs;
  bool continuum_scaling = true;
  double density = 1.0;
  double stiffness = 1.0;
  AffineLaw density_law;
  AffineLaw stiffness_law;
  double rayleigh_mass = 0.0;
  double rayleigh_stiffness = 0.0;
  double loss_factor = 0.0;  // Im K = eta K
  double mass_loss = 0.0;    // Im M = delta M
  std::vector<double> input_locations{1.0};
  std::vector<double> output_locations{1.0};
  std::optional<MassBump> bump;
};

[[nodiscard]] HdmSystem make_msd_chain(const ParameterPoint& p, const ChainSpec& spec);

/// Coupled damped oscillators in first-order form, E x' = A x + B u, with
/// A = -D(p) + J(p): D symmetric positive definite, J skew. Eigenvalues of (A, E)
/// therefore lie in the open left half plane. `gain` adds the closed-loop term q B G.
struct FirstOrderSpec {
  std::size_t oscillators = 6;
  std::uint64_t seed = 7;
  double base_frequency = 1.0;
  double frequency_spacing = 0.6;
  double damping = 0.05;
  double coupling = 0.05;
  double mass_perturbation = 0.1;
  AffineLaw frequency_law;
  AffineLaw damping_law;
  double gain = 0.0;
  std::size_t n_inputs = 1;
  std::size_t n_outputs = 1;
};

[[nodiscard]] HdmSystem make_first_order(const ParameterPoint& p, const FirstOrderSpec& spec);

/// Two oscillators (frequencies 1 and 3) whose damping margins a1 = 1 + s and
/// a2 = 2 - s trade places at s = 0.5; B = G = I. Under the closed-loop shift
/// A + q B G mode i crosses the imaginary axis at q = a_i(s).
[[nodiscard]] Rom two_mode_family(double s);

/// k lowest mass-orthonormal eigenvectors of (Re K, Re M); V = W.
[[nodiscard]] RobPair modal_rob(const HdmSystem& h, Eigen::Index k);

/// Frequency-response snapshots on 2k equispaced frequencies in [w_min, w_max].
[[nodiscard]] CMat frequency_snapshots(const HdmSystem& h, Eigen::Index k, double w_min, double w_max);

/// Leading k metric-weighted left singular directions of the snapshots (real
/// and imaginary parts as separate columns). RankDeficiency reports the achievable k.
[[nodiscard]] RobPair pod_rob(const HdmSystem& h, const CMat& snapshots, Eigen::Index k,
                              const std::optional<Mat>& metric = std::nullopt);

struct DgpOptions {
  std::vector<double> wavenumbers;
  int derivatives = 1;  // includes the 0-th derivative
};

/// Orthonormal basis spanning the wavenumber derivatives of the solution of
/// (K + j kappa C - kappa^2 M) w = B at each interpolation wavenumber.
[[nodiscard]] RobPair dgp_rob(const HdmSystem& h, const DgpOptions& opts);

/// Reduced operators W^H X V, W^H B, G V, H. Real output when everything is real.
[[nodiscard]] Rom project(const HdmSystem& h, const RobPair& basis);

/// Outputs y(w) = G x(w) + H u for each grid value; columns follow the grid.
[[nodiscard]] CMat hdm_frequency_response(const HdmSystem& h, const std::vector<double>& grid, const CVec& u);

enum class RobMethod { Modal, Pod, Dgp };

struct FamilySpec {
  std::variant<ChainSpec, FirstOrderSpec> system;
  RobMethod method = RobMethod::Modal;
  Eigen::Index k = 4;
  DgpOptions dgp;
  /// Build the basis from the real part of the system (real bases for damped systems).
  bool real_basis = false;
  double pod_min = 0.1;
  double pod_max = 5.0;
};

[[nodiscard]] HdmSystem make_system(const ParameterPoint& p, const FamilySpec& spec);
[[nodiscard]] RobPair make_basis(const HdmSystem& h, const FamilySpec& spec);
[[nodiscard]] RomRecord build_record(const ParameterPoint& p, const FamilySpec& spec, RobPair* basis_out = nullptr);

/// One record per point; consistency tag none; bases kept in memory.
[[nodiscard]] RomDatabase build_database(const FamilySpec& spec, const ParameterDomain& domain,
                                         const std::vector<ParameterPoint>& points);

}  // namespace romdb
