#pragma once

// Online computations on (interpolated) ROMs: responses, eigen-analysis and
// stability sweeps, the dB output transform, the reduced inverse problem and the
// adaptive hypercube sampler.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "romdb/consistency.hpp"
#include "romdb/manifold.hpp"

namespace romdb {

/// Throws InvalidInput unless the grid is non-empty, finite and strictly ascending.
void validate_grid(const std::vector<double>& grid, const char* field = "grid");

struct FrequencyResponse {
  std::vector<double> grid;
  CMat outputs;             // N_o x grid size; NaN columns where invalid
  std::vector<bool> valid;  // false where the shifted operator was singular
};

/// First order: (j w E - A) q = B u; second order: (K + j w C - w^2 M) q = B u; y = G q + H u.
[[nodiscard]] FrequencyResponse frequency_response(const Rom& rom, const std::vector<double>& grid, const CVec& u);

/// 10 log10(2 pi |y|^2), modulus floored at 1e-300.
[[nodiscard]] double db_value(cplx y);
[[nodiscard]] Vec db_transform(const CVec& y);

struct EigenAnalysis {
  CVec values;
  CMat vectors;        // right eigenvectors of the pencil (first order) or companion form
  Vec damping_ratios;  // -Re(l) / |l|
  Vec frequencies;     // |Im(l)|
};

/// Eigenvalues of (A, E), or of the companion linearization of (M, C, K).
[[nodiscard]] EigenAnalysis eigen_analysis(const Rom& rom);

/// Closed-loop ROM: first order A + q B G, second order K - q B G. Needs N_i = N_o.
[[nodiscard]] Rom closed_loop(const Rom& rom, double q);

using RomFamily = std::function<Rom(double)>;

struct CriticalOptions {
  double q_lo = 0.0;
  double q_hi = 1.0;
  double tol = 1e-8;
  int scan_steps = 64;  // tracking steps across [q_lo, q_hi]
};

struct CriticalResult {
  double q_crit = 0.0;
  /// Mode label fixed at q_lo: eigenvalues with Im >= 0 ordered by ascending modulus
  /// (conjugates share their partner's label).
  std::size_t mode_index = 0;
  cplx eigenvalue{};
  bool ambiguous = false;
  int bisections = 0;
};

/// First crossing of the imaginary axis along q by bracketing then bisection.
[[nodiscard]] CriticalResult critical_parameter(const RomFamily& family, const CriticalOptions& opts,
                                                Diagnostics* diag = nullptr);

struct TimeOptions {
  double dt = 0.01;
  std::optional<Vec> q0;  // initial state (displacement for second order)
  std::optional<Vec> v0;  // initial velocity (second order)
};

/// u: N_i x (steps + 1) samples at t = 0, dt, 2 dt, ...; returns N_o x (steps + 1).
/// Trapezoidal rule (first order) or average-acceleration Newmark (second order). Real ROMs only.
[[nodiscard]] Mat time_response(const Rom& rom, const Mat& u, const TimeOptions& opts);

struct AnnealingOptions {
  std::uint64_t seed = 1;
  double cooling = 0.95;
  int proposals_per_level = 50;
  int levels = 60;
  double step_fraction = 0.1;  // proposal standard deviation per axis width
};

struct PatternSearchOptions {
  double initial_step_fraction = 0.05;
  double min_step_fraction = 1e-6;
  int max_evaluations = 2000;
};

struct InverseProblemSpec {
  std::vector<double> wavenumbers;
  std::vector<Vec> measured;  // dB data per wavenumber, length N_o each
  std::vector<double> alpha;  // positive weights per wavenumber (default 1)
  double beta = 0.0;          // Tikhonov weight
  CVec input;                 // forcing (default: ones)
  Box domain;
  AnnealingOptions annealing;
  PatternSearchOptions pattern;
  InterpolationOptions interpolation;

  void validate(Eigen::Index n_outputs) const;
};

struct InverseResult {
  ParameterPoint mu;
  double objective = 0.0;
  std::vector<double> trace;  // best objective after each annealing level and the polish
  std::size_t calls = 0;
  std::size_t rejected = 0;   // probes whose interpolation failed
  Diagnostics diagnostics;
};

/// dB outputs of `rom` at each wavenumber.
[[nodiscard]] std::vector<Vec> db_outputs(const Rom& rom, const std::vector<double>& wavenumbers, const CVec& input);

/// Misfit objective at mu (without evaluating through a database).
[[nodiscard]] double inverse_objective(const std::vector<Vec>& predicted, const ParameterPoint& mu,
                                       const InverseProblemSpec& spec);

[[nodiscard]] InverseResult solve_inverse(const RomDatabase& db, const InverseProblemSpec& spec);

/// max_c |found_c - truth_c| / (upper_c - lower_c)
[[nodiscard]] double recovery_error(const ParameterPoint& found, const ParameterPoint& truth, const Box& domain);

enum class SamplerMetric { OutputError, InverseRecoveryError };

struct SamplerConfig {
  double tolerance = 0.05;
  int max_refinements = 4;
  std::vector<std::size_t> initial_lattice;  // nodes per axis, >= 2
  SamplerMetric metric = SamplerMetric::InverseRecoveryError;

  void validate(std::size_t n_mu) const;
};

struct SamplerProblem {
  Box domain;
  /// Builds the ROM record at a point.
  std::function<RomRecord(const ParameterPoint&)> build;
  /// Measured dB data per wavenumber at a point (the truth oracle).
  std::function<std::vector<Vec>(const ParameterPoint&)> truth;
  /// Wavenumbers, weights, optimizer settings; `measured` is filled per cell.
  InverseProblemSpec inverse;
  /// Prepares a freshly assembled database for queries (alignment, plan).
  std::function<RomDatabase(RomDatabase)> finalize;
};

struct CellError {
  Box cell;
  ParameterPoint center;
  double error = 0.0;
};

struct SamplerIteration {
  int iteration = 0;
  std::size_t database_size = 0;
  std::vector<CellError> cells;
  std::size_t splits = 0;
};

struct SamplerResult {
  RomDatabase database;
  std::vector<SamplerIteration> log;
  std::vector<CellError> failing;  // cells above tolerance when refinements ran out
  bool converged = false;
};

/// Error at one cell centre under the configured metric.
[[nodiscard]] double sampler_error(const RomDatabase& db, const SamplerProblem& problem, SamplerMetric metric,
                                   const ParameterPoint& center);

[[nodiscard]] SamplerResult adaptive_sample(const SamplerProblem& problem, const SamplerConfig& config);

struct StabilitySample {
  double x = 0.0;
  ParameterPoint point;
  bool ok = false;
  CriticalResult result;
  std::string error;  // taxonomy name when !ok
  std::string message;
};

/// q_crit of the closed-loop interpolated ROM at `samples` points along `axis`
/// through `base` (other coordinates fixed).
[[nodiscard]] std::vector<StabilitySample> stability_curve(const RomDatabase& db, const ParameterPoint& base,
                                                           std::size_t axis, std::size_t samples,
                                                           const CriticalOptions& copts,
                                                           const InterpolationOptions& iopts = {});

/// Rows: mu_0..mu_{n-1}, x, output, re, im, db.
[[nodiscard]] std::string response_csv(const ParameterPoint& point, const FrequencyResponse& r);
[[nodiscard]] std::string response_csv_header(std::size_t n_mu);
/// Rows: mu_0..mu_{n-1}, x, q_crit, mode, ambiguous, status.
[[nodiscard]] std::string stability_csv(const std::vector<StabilitySample>& curve, std::size_t n_mu);

}  // namespace romdb
