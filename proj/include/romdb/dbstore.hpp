#pragma once

// Database container: "ROMDB001", u32 LE header length, JSON header, payload of
// little-endian float64 (per record: coordinates, then every slot row-major,
// Re plane then Im plane), u32 LE CRC-32 of the payload.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "romdb/database.hpp"

namespace romdb {

[[nodiscard]] std::string serialize(const RomDatabase& db);
[[nodiscard]] RomDatabase deserialize(std::string_view bytes);

void save(const RomDatabase& db, const std::filesystem::path& path);
[[nodiscard]] RomDatabase load(const std::filesystem::path& path);

/// Parsed JSON header of a container, without decoding the payload.
[[nodiscard]] std::string read_header_text(std::string_view bytes);

/// Smallest number of records a sub-database needs for the scheme.
[[nodiscard]] std::size_t minimum_stencil(const SchemeSpec& scheme, std::size_t n_mu);

/// Splits the domain box at the given interior boundaries (one list per axis).
/// Records on internal boundaries go to every adjacent sub-database.
[[nodiscard]] RomDatabase partition(const RomDatabase& db,
                                    const std::vector<std::vector<double>>& boundaries);

/// Smallest sub-domain containing target, lowest index on ties; OutOfDomain outside the box.
[[nodiscard]] std::size_t locate_subdatabase(const RomDatabase& db, const ParameterPoint& target);

/// Copy of db restricted to one sub-database (records re-indexed, single sub-domain).
[[nodiscard]] RomDatabase subdatabase(const RomDatabase& db, std::size_t index);

}  // namespace romdb
