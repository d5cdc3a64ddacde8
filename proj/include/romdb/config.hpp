#pragma once

// Declarative JSON configuration shared by the `build`, `sample` and `inverse`
// CLI subcommands. The schema is documented in docs/config.md.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "romdb/analyze.hpp"
#include "romdb/synth.hpp"

namespace romdb {

struct AlignConfig {
  ConsistencyOptions options;
};

struct PlanConfig {
  std::optional<nlohmann::json> explicit_plan;  // decoded once the database kind is known
  std::vector<ManifoldSpec> auto_candidates;    // non-empty: choose per slot by the heuristic
};

struct BuildConfig {
  ParameterDomain domain;
  std::vector<ParameterPoint> points;
  FamilySpec family;
  std::optional<SchemeSpec> scheme;
  std::optional<AlignConfig> align;
  PlanConfig plan;
  std::vector<std::vector<double>> partition;  // interior boundaries per axis; empty: none
};

/// All decoders raise InvalidSpec naming the dotted path of the offending field.
[[nodiscard]] FamilySpec decode_family(const nlohmann::json& family, const nlohmann::json& basis,
                                       const std::string& path);
[[nodiscard]] ConsistencyOptions decode_align(const nlohmann::json& j, const std::string& path);
[[nodiscard]] BuildConfig decode_build_config(const nlohmann::json& j);
[[nodiscard]] AnnealingOptions decode_annealing(const nlohmann::json& j, const std::string& path);
[[nodiscard]] PatternSearchOptions decode_pattern(const nlohmann::json& j, const std::string& path);
/// Inverse problem file: wavenumbers, measured dB vectors, alpha, beta, input, domain,
/// annealing, pattern. The domain defaults to `fallback`.
[[nodiscard]] InverseProblemSpec decode_inverse(const nlohmann::json& j, const Box& fallback);
[[nodiscard]] CVec decode_cvec(const nlohmann::json& j, const std::string& path);

/// Builds, aligns, partitions and plans a database as configured.
[[nodiscard]] RomDatabase run_build(const BuildConfig& cfg);

/// Aligns, plans and partitions an already assembled database per the build config
/// (used by `build` and by the adaptive sampler's finalize step).
[[nodiscard]] RomDatabase finalize_database(RomDatabase db, const BuildConfig& cfg, bool apply_partition);

struct SampleConfig {
  BuildConfig build;
  SamplerConfig sampler;
  InverseProblemSpec inverse;  // measured left empty
  std::vector<std::vector<double>> validation_axes;  // optional post-hoc validation lattice
};

[[nodiscard]] SampleConfig decode_sample_config(const nlohmann::json& j);

/// Sampler problem whose truth oracle is the high-dimensional model's dB outputs.
[[nodiscard]] SamplerProblem make_sampler_problem(const SampleConfig& cfg);

/// Reads and parses a JSON file; LoadError on I/O failure, InvalidSpec on syntax errors.
[[nodiscard]] nlohmann::json read_json_file(const std::string& path);

}  // namespace romdb
