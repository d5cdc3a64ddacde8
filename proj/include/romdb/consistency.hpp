#pragma once

// Coordinate-consistency enforcement between the ROMs of a database.
//
// Common meshes: principal angles and Procrustes alignment of the bases.
// Arbitrary meshes: fixed-point maximization of the correlation functionals
//   J_G(Q)    = sum_X w_X <Q^T X Q, X0> + <F, Q>,          F = beta B B0^T + gamma G^T G0
//   J_PG(Q,Z) = sum_X w_X <Z^T X Q, X0> + <F_B, Z> + <F_G, Q>
// where X runs over the square operators of the aligned ROM and X0 over the
// reference. Maximizing J is the same as minimizing the weighted distance
// D = const - 2 J. Complex operators contribute their real and imaginary planes
// as separate real terms with the same weight.

#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "romdb/database.hpp"
#include "romdb/romtypes.hpp"

namespace romdb {

struct SubspaceAngleResult {
  Vec angles;              // ascending, in [0, pi/2]
  Mat left_directions;     // columns x_l: coefficients in the first basis
  Mat right_directions;    // columns y_l: coefficients in the second basis
  Vec singular_values;     // sigma_l = cos(theta_l), descending
};

/// Principal angles between span(Vi) and span(Vj) in the metric inner product.
[[nodiscard]] SubspaceAngleResult subspace_angles(const Mat& Vi, const Mat& Vj,
                                                  const std::optional<Mat>& metric = std::nullopt);

/// Orthogonal Q minimizing ||Vi Q - Vref||_metric. Warns on near rank deficiency.
[[nodiscard]] Mat procrustes_transform(const Mat& Vi, const Mat& Vref,
                                       const std::optional<Mat>& metric = std::nullopt,
                                       Diagnostics* diag = nullptr);

/// Real representation [Re V; Im V] of a (possibly complex) basis. Real
/// orthogonal alignment of complex bases reduces to alignment of these.
[[nodiscard]] Mat realify(const DenseMatrix& basis);
[[nodiscard]] std::optional<Mat> realify_metric(const std::optional<Mat>& metric, bool complex_basis);

/// min over records of the number of angles strictly below theta_max.
[[nodiscard]] std::size_t truncation_length(const std::vector<SubspaceAngleResult>& results,
                                            double theta_max = std::numbers::pi / 4);

/// Congruence with the first L columns of the given direction matrices
/// (right for Q, left for Z), giving a ROM of dimension L.
[[nodiscard]] Rom truncate_rom(const Rom& rom, const Mat& right_dirs, const Mat& left_dirs,
                               std::size_t L);
/// Uses the left directions of an angle result for both sides.
[[nodiscard]] Rom truncate_rom(const Rom& rom, const SubspaceAngleResult& alignment, std::size_t L);

[[nodiscard]] double smin_galerkin(const Rom& other, const Rom& ref, const DistanceWeights& w);
[[nodiscard]] double smin_petrov_galerkin(const Rom& other, const Rom& ref, const DistanceWeights& w);

[[nodiscard]] double galerkin_objective(const Mat& Q, const Rom& other, const Rom& ref,
                                        const DistanceWeights& w);
[[nodiscard]] double petrov_galerkin_objective(const Mat& Q, const Mat& Z, const Rom& other,
                                               const Rom& ref, const DistanceWeights& w);

/// ||Asym(Q^T R(Q))||_F / max(1, ||R(Q)||_F), R the Galerkin gradient.
[[nodiscard]] double criticality_residual_galerkin(const Mat& Q, const Rom& other, const Rom& ref,
                                                   const DistanceWeights& w);
/// Max of the Q- and Z-residuals of the Petrov-Galerkin stationarity conditions.
[[nodiscard]] double criticality_residual_petrov_galerkin(const Mat& Q, const Mat& Z,
                                                          const Rom& other, const Rom& ref,
                                                          const DistanceWeights& w);

/// WarmStart: best of identity and 8 seeded random starts by initial objective.
/// MomentProcrustes: Procrustes fit of transform-covariant moment matrices
/// (products of the square operators applied to B and G^T); a full run from it
/// and a full run from identity are compared and the better final objective wins.
enum class InitKind { Identity, RandomOrthogonal, WarmStart, MomentProcrustes, Given };

/// "identity", "random", "warm-start" or "moment-procrustes"; InvalidInput otherwise.
[[nodiscard]] InitKind init_kind_from_string(const std::string& name);

struct FixedPointOptions {
  double s_margin = 1.5;
  int max_iters = 10000;
  double objective_tol = 1e-12;
  int stagnation_window = 3;
  double step_tol = 1e-13;
  /// Stagnation only counts as convergence once the criticality residual is this small.
  double criticality_tol = 1e-10;
  InitKind init = InitKind::Identity;
  std::uint64_t seed = 0;
  std::optional<TransformPair> initial;  // InitKind::Given
  /// Additional full runs from seeded random starts; the best final objective wins.
  int restarts = 0;

  void validate() const;
};

struct FixedPointReport {
  TransformPair transform;
  int iterations = 0;
  std::vector<double> objective_trace;
  /// Smallest singular value of the iterated map at each step (s-positivity surrogate).
  std::vector<double> min_map_singular_value;
  double criticality_residual = 0.0;
  bool converged = false;
  double s = 0.0;
  double s_min = 0.0;
};

[[nodiscard]] FixedPointReport fixed_point_galerkin(const Rom& other, const Rom& ref,
                                                    const DistanceWeights& w,
                                                    const FixedPointOptions& opts = {});
[[nodiscard]] FixedPointReport fixed_point_petrov_galerkin(const Rom& other, const Rom& ref,
                                                           const DistanceWeights& w,
                                                           const FixedPointOptions& opts = {});

/// Moment Procrustes estimate of the (Q, Z) aligning `other` to `ref`. Exact
/// when `other` is a transform of `ref` and the moments span R^k.
[[nodiscard]] TransformPair moment_procrustes(const Rom& other, const Rom& ref, bool galerkin);

/// Haar-distributed random orthogonal matrix.
[[nodiscard]] Mat random_orthogonal(Eigen::Index k, std::mt19937_64& rng);

struct ConsistencyOptions {
  ConsistencyMode mode = ConsistencyMode::FixedPointPG;
  std::optional<std::size_t> reference_index;  // default: record nearest the centroid
  FixedPointOptions fixed_point;
  /// Procrustes mode only: drop directions whose angle reaches theta_max.
  bool truncate = false;
  double theta_max = std::numbers::pi / 4;
};

struct RecordAlignment {
  std::size_t index = 0;
  TransformPair transform;
  std::optional<FixedPointReport> report;  // fixed-point modes
  std::optional<SubspaceAngleResult> angles;  // Procrustes mode
  double distance_before = 0.0;
  double distance_after = 0.0;
  Diagnostics diagnostics;
};

struct ConsistencyResult {
  RomDatabase database;
  std::vector<RecordAlignment> records;
  std::size_t reference_index = 0;
  std::optional<std::size_t> truncation_length;
};

/// Aligns every record to the reference record and returns the transformed database.
[[nodiscard]] ConsistencyResult enforce_database_consistency(const RomDatabase& db,
                                                             const ConsistencyOptions& opts);

/// max over record pairs of rom_distance, weighted by the reference record.
[[nodiscard]] double max_pairwise_distance(const RomDatabase& db, std::size_t reference_index);

}  // namespace romdb
