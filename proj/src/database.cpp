#include "romdb/database.hpp"

#include <limits>
#include <sstream>

namespace romdb {

const char* to_string(ConsistencyMode mode) noexcept {
  switch (mode) {
    case ConsistencyMode::None: return "none";
    case ConsistencyMode::Procrustes: return "procrustes";
    case ConsistencyMode::FixedPointG: return "fixed-point-g";
    case ConsistencyMode::FixedPointPG: return "fixed-point-pg";
  }
  return "?";
}

ConsistencyMode consistency_mode_from_string(const std::string& s) {
  for (auto m : {ConsistencyMode::None, ConsistencyMode::Procrustes, ConsistencyMode::FixedPointG,
                 ConsistencyMode::FixedPointPG}) {
    if (s == to_string(m)) return m;
  }
  throw Error(ErrorKind::InvalidSpec, "unknown consistency mode '" + s + "'");
}

RomDatabase RomDatabase::create(ParameterDomain domain, std::vector<RomRecord> records) {
  if (records.empty()) throw Error(ErrorKind::InvalidInput, "database needs at least one record");
  RomDatabase db;
  const Rom& first = records.front().rom;
  db.order = first.order();
  db.k = first.k();
  db.n_inputs = first.n_inputs();
  db.n_outputs = first.n_outputs();
  db.field = first.field();
  db.domain = std::move(domain);
  db.records = std::move(records);
  db.partition = {{}};
  for (std::size_t i = 0; i < db.records.size(); ++i) db.partition[0].push_back(i);
  db.plan = OperatorSlotPlan::all_full(db.order, db.field);
  db.scheme = SchemeSpec{};
  db.validate();
  return db;
}

std::vector<Box> RomDatabase::subdomain_boxes() const {
  if (domain.subdomains.empty()) return {domain.box};
  return domain.subdomains;
}

std::vector<ParameterPoint> RomDatabase::points() const {
  std::vector<ParameterPoint> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.point);
  return out;
}

std::size_t RomDatabase::centroid_record() const {
  const ParameterPoint c = domain.centroid();
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double d = distance(records[i].point, c);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::size_t RomDatabase::expected_entry_count() const {
  const auto kk = static_cast<std::size_t>(k);
  const auto ni = static_cast<std::size_t>(n_inputs);
  const auto no = static_cast<std::size_t>(n_outputs);
  const std::size_t square = (order == RomOrder::First ? 2 : 3) * kk * kk;
  std::size_t matrix = square + kk * (ni + no) + ni * no;
  if (field == ScalarField::Complex) matrix *= 2;
  return records.size() * (n_mu() + matrix);
}

std::size_t RomDatabase::stored_entry_count() const {
  std::size_t n = 0;
  for (const auto& r : records) {
    n += r.point.dim();
    for (const auto& m : r.rom.slots()) {
      const auto sz = static_cast<std::size_t>(m.rows() * m.cols());
      n += m.is_complex() ? 2 * sz : sz;
    }
  }
  return n;
}

void RomDatabase::validate() const {
  domain.validate();
  if (format_version != kFormatVersion) {
    throw Error(ErrorKind::VersionMismatch, "unsupported format version " + std::to_string(format_version),
                "format_version");
  }
  if (records.empty()) throw Error(ErrorKind::InvalidInput, "database has no records", "records");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string where = "records[" + std::to_string(i) + "]";
    if (r.rom.order() != order) {
      throw Error(ErrorKind::InvalidInput, where + ": mixed ROM orders are not allowed", where + ".kind");
    }
    if (r.rom.k() != k || r.rom.n_inputs() != n_inputs || r.rom.n_outputs() != n_outputs ||
        r.rom.field() != field) {
      throw Error(ErrorKind::InvalidInput, where + ": ROM shape differs from the database", where + ".rom");
    }
    if (r.point.dim() != n_mu()) {
      throw Error(ErrorKind::InvalidInput, where + ": parameter dimension mismatch", where + ".coords");
    }
    if (!domain.box.contains(r.point)) {
      throw Error(ErrorKind::OutOfDomain, where + ": point lies outside the domain", where + ".coords");
    }
    if (r.transform_applied) {
      if (r.transform_applied->Q.rows() != k) {
        throw Error(ErrorKind::InvalidInput, where + ": transform size differs from k", where + ".transform");
      }
    }
  }
  const auto boxes = subdomain_boxes();
  if (partition.size() != boxes.size()) {
    throw Error(ErrorKind::InvalidInput, "partition does not match the sub-domain list", "partition");
  }
  std::vector<int> seen(records.size(), 0);
  for (std::size_t s = 0; s < partition.size(); ++s) {
    for (std::size_t idx : partition[s]) {
      if (idx >= records.size()) {
        throw Error(ErrorKind::InvalidInput, "partition references a missing record", "partition");
      }
      if (!boxes[s].contains(records[idx].point)) {
        std::ostringstream os;
        os << "record " << idx << " is assigned to sub-domain " << s << " but lies outside it";
        throw Error(ErrorKind::InvalidInput, os.str(), "partition");
      }
      seen[idx] = 1;
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!seen[i]) {
      throw Error(ErrorKind::InvalidInput, "record " + std::to_string(i) + " is in no sub-database",
                  "partition");
    }
  }
  if (plan.order != order || plan.field != field) {
    throw Error(ErrorKind::InvalidSpec, "plan does not match the database kind", "plan");
  }
  plan.validate();
  scheme.validate(n_mu());
  if (consistency.reference_index && *consistency.reference_index >= records.size()) {
    throw Error(ErrorKind::InvalidInput, "consistency reference index out of range",
                "consistency.reference_index");
  }
  if (!bases.empty() && bases.size() != records.size()) {
    throw Error(ErrorKind::InvalidInput, "basis list does not match the record list", "bases");
  }
}

bool operator==(const RomDatabase& a, const RomDatabase& b) {
  return a.order == b.order && a.k == b.k && a.n_inputs == b.n_inputs && a.n_outputs == b.n_outputs &&
         a.field == b.field && a.records == b.records && a.domain == b.domain &&
         a.partition == b.partition && a.plan == b.plan && a.scheme == b.scheme &&
         a.consistency == b.consistency && a.format_version == b.format_version;
}

}  // namespace romdb
