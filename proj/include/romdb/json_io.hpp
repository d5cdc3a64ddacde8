#pragma once

// JSON encodings shared by the file header, the CLI and the HTTP service.
// Decoders throw romdb::Error with the dotted path of the offending field.

#include <string>

#include <json.hpp>

#include "romdb/database.hpp"

namespace romdb::json {

using nlohmann::json;

/// Returns j[key], throwing InvalidInput naming `path.key` when it is missing.
const json& require(const json& j, const std::string& key, const std::string& path);

[[nodiscard]] double as_double(const json& j, const std::string& path);
[[nodiscard]] std::size_t as_count(const json& j, const std::string& path);
[[nodiscard]] std::vector<double> as_doubles(const json& j, const std::string& path);

[[nodiscard]] json encode(const Box& b);
[[nodiscard]] Box decode_box(const json& j, const std::string& path);
[[nodiscard]] json encode(const ParameterDomain& d);
[[nodiscard]] ParameterDomain decode_domain(const json& j, const std::string& path);
[[nodiscard]] json encode(const ManifoldSpec& m);
[[nodiscard]] ManifoldSpec decode_manifold(const json& j, const std::string& path);
[[nodiscard]] json encode(const OperatorSlotPlan& p);
[[nodiscard]] OperatorSlotPlan decode_plan(const json& j, RomOrder order, ScalarField field,
                                           const std::string& path);
[[nodiscard]] json encode(const SchemeSpec& s);
[[nodiscard]] SchemeSpec decode_scheme(const json& j, const std::string& path);
[[nodiscard]] json encode(const ConsistencyInfo& c);
[[nodiscard]] ConsistencyInfo decode_consistency(const json& j, const std::string& path);

/// Row-major nested arrays.
[[nodiscard]] json encode(const Mat& m);
[[nodiscard]] Mat decode_mat(const json& j, const std::string& path);
/// {"rows", "cols", "re", "im"?}; "im" present only for complex matrices.
[[nodiscard]] json encode(const DenseMatrix& m);
[[nodiscard]] json encode(const Rom& rom);

/// Database metadata without the operator payload.
[[nodiscard]] json encode_meta(const RomDatabase& db);

}  // namespace romdb::json
