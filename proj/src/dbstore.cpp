#include "romdb/dbstore.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>

#include <zlib.h>

#include "romdb/json_io.hpp"

namespace romdb {

namespace {

constexpr std::string_view kMagic = "ROMDB001";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::string_view in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
  }
  return v;
}

void put_f64(std::string& out, double d) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

double get_f64(std::string_view in, std::size_t pos) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

std::uint32_t crc32_of(std::string_view data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large payloads in chunks.
  std::size_t pos = 0;
  while (pos < data.size()) {
    const std::size_t n = std::min<std::size_t>(data.size() - pos, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data() + pos), static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

void put_plane(std::string& out, const Mat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
  }
}

[[noreturn]] void load_error(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::LoadError, "load: " + field + ": " + what, field);
}

// Header decoding failures surface as load errors that keep the field path.
template <typename F>
auto header_field(const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(ErrorKind::LoadError, std::string("load: ") + e.what(),
                e.field().empty() ? field : e.field());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::LoadError, std::string("load: ") + field + ": " + e.what(), field);
  }
}

std::vector<Box> grid_boxes(const Box& box, const std::vector<std::vector<double>>& cuts) {
  const std::size_t d = box.dim();
  std::vector<std::vector<double>> edges(d);
  for (std::size_t a = 0; a < d; ++a) {
    edges[a].push_back(box.lower[a]);
    for (double c : cuts[a]) edges[a].push_back(c);
    edges[a].push_back(box.upper[a]);
  }
  std::vector<std::size_t> counts(d);
  std::size_t total = 1;
  for (std::size_t a = 0; a < d; ++a) {
    counts[a] = edges[a].size() - 1;
    total *= counts[a];
  }
  std::vector<Box> out;
  out.reserve(total);
  // Axis 0 varies slowest.
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    Box b{std::vector<double>(d), std::vector<double>(d)};
    for (std::size_t a = d; a-- > 0;) {
      const std::size_t ia = rem % counts[a];
      rem /= counts[a];
      b.lower[a] = edges[a][ia];
      b.upper[a] = edges[a][ia + 1];
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

std::string serialize(const RomDatabase& db) {
  db.validate();
  const std::size_t expected = db.expected_entry_count();
  const std::size_t stored = db.stored_entry_count();
  if (expected != stored) {
    std::ostringstream os;
    os << "entry-count check failed: formula gives " << expected << ", records hold " << stored;
    throw Error(ErrorKind::InvalidInput, os.str(), "records");
  }

  std::string payload;
  payload.reserve(expected * 8);
  for (const auto& r : db.records) {
    for (double c : r.point.coords()) put_f64(payload, c);
    for (const auto& m : r.rom.slots()) {
      put_plane(payload, m.re());
      if (m.is_complex()) put_plane(payload, m.im());
    }
  }

  json::json header = json::encode_meta(db);
  json::json recs = json::json::array();
  for (const auto& r : db.records) {
    json::json item{{"coords", r.point.coords()}};
    item["hdm_dof_count"] = r.hdm_dof_count ? json::json(*r.hdm_dof_count) : json::json(nullptr);
    if (r.transform_applied) {
      item["transform"] = {{"Q", json::encode(r.transform_applied->Q)},
                           {"Z", json::encode(r.transform_applied->Z)}};
    } else {
      item["transform"] = nullptr;
    }
    recs.push_back(std::move(item));
  }
  header.erase("points");
  header["records"] = recs;
  header["payload"] = {{"scalars", expected}, {"bytes", payload.size()}, {"encoding", "float64-le"}};
  const std::string text = header.dump(1);

  std::string out;
  out.reserve(kMagic.size() + 8 + text.size() + payload.size());
  out.append(kMagic);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.append(text);
  out.append(payload);
  put_u32(out, crc32_of(payload));
  return out;
}

std::string read_header_text(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 4 || bytes.substr(0, kMagic.size()) != kMagic) {
    if (bytes.size() >= 5 && bytes.substr(0, 5) == "ROMDB") {
      throw Error(ErrorKind::VersionMismatch, "load: unsupported container version", "magic");
    }
    load_error("magic", "not a ROM database container");
  }
  const std::uint32_t len = get_u32(bytes, kMagic.size());
  if (bytes.size() < kMagic.size() + 4 + len) load_error("header", "truncated header");
  return std::string(bytes.substr(kMagic.size() + 4, len));
}

RomDatabase deserialize(std::string_view bytes) {
  const std::string text = read_header_text(bytes);
  const std::size_t payload_pos = kMagic.size() + 4 + text.size();
  json::json h;
  try {
    h = json::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    load_error("header", std::string("malformed JSON: ") + e.what());
  }

  RomDatabase db;
  db.format_version = header_field("format_version", [&] {
    return static_cast<int>(json::as_count(json::require(h, "format_version", ""), "format_version"));
  });
  if (db.format_version != RomDatabase::kFormatVersion) {
    throw Error(ErrorKind::VersionMismatch,
                "load: unsupported format_version " + std::to_string(db.format_version), "format_version");
  }
  header_field("kind", [&] {
    const std::string kind = json::require(h, "kind", "").get<std::string>();
    if (kind == to_string(RomOrder::First)) {
      db.order = RomOrder::First;
    } else if (kind == to_string(RomOrder::Second)) {
      db.order = RomOrder::Second;
    } else {
      load_error("kind", "unknown ROM kind '" + kind + "'");
    }
    return 0;
  });
  header_field("scalar_field", [&] {
    const std::string f = json::require(h, "scalar_field", "").get<std::string>();
    if (f == "real") {
      db.field = ScalarField::Real;
    } else if (f == "complex") {
      db.field = ScalarField::Complex;
    } else {
      load_error("scalar_field", "unknown scalar field '" + f + "'");
    }
    return 0;
  });
  db.k = header_field("k", [&] { return static_cast<Eigen::Index>(json::as_count(json::require(h, "k", ""), "k")); });
  db.n_inputs = header_field("n_inputs", [&] {
    return static_cast<Eigen::Index>(json::as_count(json::require(h, "n_inputs", ""), "n_inputs"));
  });
  db.n_outputs = header_field("n_outputs", [&] {
    return static_cast<Eigen::Index>(json::as_count(json::require(h, "n_outputs", ""), "n_outputs"));
  });
  const std::size_t n_mu = header_field("n_mu", [&] { return json::as_count(json::require(h, "n_mu", ""), "n_mu"); });
  const std::size_t n_records =
      header_field("n_records", [&] { return json::as_count(json::require(h, "n_records", ""), "n_records"); });
  if (db.k < 1) load_error("k", "must be at least 1");
  db.domain = header_field("domain", [&] { return json::decode_domain(json::require(h, "domain", ""), "domain"); });
  if (db.domain.dim() != n_mu) load_error("domain", "dimension differs from n_mu");
  db.partition = header_field("partition", [&] {
    return json::require(h, "partition", "").get<std::vector<std::vector<std::size_t>>>();
  });
  db.plan = header_field("plan", [&] { return json::decode_plan(json::require(h, "plan", ""), db.order, db.field, "plan"); });
  db.scheme = header_field("scheme", [&] { return json::decode_scheme(json::require(h, "scheme", ""), "scheme"); });
  db.consistency = header_field("consistency", [&] {
    return json::decode_consistency(json::require(h, "consistency", ""), "consistency");
  });

  const json::json& recs = header_field("records", [&]() -> const json::json& { return json::require(h, "records", ""); });
  if (!recs.is_array() || recs.size() != n_records) load_error("records", "record count differs from n_records");

  // Payload layout follows from the dimensions alone.
  const auto kk = db.k;
  const auto ni = db.n_inputs;
  const auto no = db.n_outputs;
  const auto slots = slots_of(db.order);
  auto slot_shape = [&](Slot s) -> std::pair<Eigen::Index, Eigen::Index> {
    if (s == Slot::B) return {kk, ni};
    if (s == Slot::G) return {no, kk};
    if (s == Slot::H) return {no, ni};
    return {kk, kk};
  };
  std::size_t per_record = n_mu;
  for (Slot s : slots) {
    const auto [r, c] = slot_shape(s);
    per_record += static_cast<std::size_t>(r * c) * (db.field == ScalarField::Complex ? 2 : 1);
  }
  const std::size_t scalars = per_record * n_records;
  if (bytes.size() != payload_pos + scalars * 8 + 4) {
    std::ostringstream os;
    os << "payload size mismatch: expected " << scalars * 8 << " bytes";
    load_error("payload", os.str());
  }
  const std::string_view payload = bytes.substr(payload_pos, scalars * 8);
  const std::uint32_t crc = get_u32(bytes, payload_pos + scalars * 8);
  if (crc != crc32_of(payload)) {
    throw Error(ErrorKind::ChecksumFailure, "load: payload checksum does not match", "payload");
  }

  std::size_t pos = 0;
  auto next = [&] {
    const double v = get_f64(payload, pos);
    pos += 8;
    return v;
  };
  auto read_plane = [&](Eigen::Index r, Eigen::Index c) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = next();
    }
    return m;
  };
  for (std::size_t i = 0; i < n_records; ++i) {
    const std::string rp = "records[" + std::to_string(i) + "]";
    std::vector<double> coords(n_mu);
    for (auto& c : coords) c = next();
    std::vector<DenseMatrix> mats;
    for (Slot s : slots) {
      const auto [r, c] = slot_shape(s);
      Mat re = read_plane(r, c);
      if (db.field == ScalarField::Complex) {
        Mat im = read_plane(r, c);
        mats.emplace_back(std::move(re), std::move(im));
      } else {
        mats.emplace_back(std::move(re));
      }
    }
    RomRecord rec{ParameterPoint(std::move(coords)), Rom::from_slots(db.order, std::move(mats)), std::nullopt,
                  std::nullopt};
    const json::json& hr = recs[i];
    header_field(rp, [&] {
      const auto hc = json::as_doubles(json::require(hr, "coords", rp), rp + ".coords");
      if (hc.size() != n_mu) load_error(rp + ".coords", "coordinate count differs from n_mu");
      for (std::size_t a = 0; a < n_mu; ++a) {
        if (hc[a] != rec.point[a]) load_error(rp + ".coords", "header coordinates disagree with payload");
      }
      if (hr.contains("hdm_dof_count") && !hr["hdm_dof_count"].is_null()) {
        rec.hdm_dof_count = json::as_count(hr["hdm_dof_count"], rp + ".hdm_dof_count");
      }
      if (hr.contains("transform") && !hr["transform"].is_null()) {
        const json::json& t = hr["transform"];
        rec.transform_applied = TransformPair{json::decode_mat(json::require(t, "Q", rp + ".transform"), rp + ".transform.Q"),
                                              json::decode_mat(json::require(t, "Z", rp + ".transform"), rp + ".transform.Z")};
      }
      return 0;
    });
    db.records.push_back(std::move(rec));
  }
  header_field("records", [&] {
    db.validate();
    return 0;
  });
  return db;
}

void save(const RomDatabase& db, const std::filesystem::path& path) {
  const std::string bytes = serialize(db);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::LoadError, "cannot open '" + path.string() + "' for writing", "path");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::LoadError, "failed writing '" + path.string() + "'", "path");
}

RomDatabase load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::LoadError, "cannot open '" + path.string() + "'", "path");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::size_t minimum_stencil(const SchemeSpec& scheme, std::size_t n_mu) {
  if (scheme.is_lattice()) return std::size_t{1} << n_mu;
  return n_mu + 1;
}

RomDatabase partition(const RomDatabase& db, const std::vector<std::vector<double>>& boundaries) {
  const std::size_t d = db.n_mu();
  if (boundaries.size() != d) {
    throw Error(ErrorKind::InvalidDomain, "partition needs one boundary list per axis", "boundaries");
  }
  std::vector<std::vector<double>> cuts = boundaries;
  for (std::size_t a = 0; a < d; ++a) {
    std::sort(cuts[a].begin(), cuts[a].end());
    for (std::size_t i = 0; i < cuts[a].size(); ++i) {
      const double c = cuts[a][i];
      if (!(c > db.domain.box.lower[a] && c < db.domain.box.upper[a])) {
        std::ostringstream os;
        os << "boundary " << c << " on axis " << a << " is not strictly inside the domain";
        throw Error(ErrorKind::InvalidDomain, os.str(), "boundaries[" + std::to_string(a) + "]");
      }
      if (i > 0 && c == cuts[a][i - 1]) {
        throw Error(ErrorKind::InvalidDomain, "repeated boundary on axis " + std::to_string(a),
                    "boundaries[" + std::to_string(a) + "]");
      }
    }
  }
  RomDatabase out = db;
  const bool trivial = std::all_of(cuts.begin(), cuts.end(), [](const auto& c) { return c.empty(); });
  out.domain.subdomains = trivial ? std::vector<Box>{} : grid_boxes(db.domain.box, cuts);
  const auto boxes = out.subdomain_boxes();
  out.partition.assign(boxes.size(), {});
  const std::size_t need = minimum_stencil(db.scheme, d);
  for (std::size_t s = 0; s < boxes.size(); ++s) {
    for (std::size_t i = 0; i < db.size(); ++i) {
      if (boxes[s].contains(db.records[i].point)) out.partition[s].push_back(i);
    }
    if (out.partition[s].size() < need) {
      std::ostringstream os;
      os << "sub-domain " << s << " holds " << out.partition[s].size() << " records; the scheme needs at least "
         << need;
      throw Error(ErrorKind::InsufficientCoverage, os.str(), "partition[" + std::to_string(s) + "]");
    }
  }
  out.validate();
  return out;
}

std::size_t locate_subdatabase(const RomDatabase& db, const ParameterPoint& target) {
  if (target.dim() != db.n_mu()) {
    throw Error(ErrorKind::InvalidInput, "target dimension differs from the database", "target.coords");
  }
  if (!db.domain.box.contains(target)) {
    throw Error(ErrorKind::OutOfDomain, "target lies outside the parameter domain", "target.coords");
  }
  // Refined grids leave nodes on the edges of coarser cells; the finest containing cell owns them.
  const auto boxes = db.subdomain_boxes();
  std::optional<std::size_t> best;
  double best_volume = 0.0;
  for (std::size_t s = 0; s < boxes.size(); ++s) {
    if (!boxes[s].contains(target)) continue;
    double v = 1.0;
    for (std::size_t a = 0; a < boxes[s].lower.size(); ++a) v *= boxes[s].upper[a] - boxes[s].lower[a];
    if (!best || v < best_volume) {
      best = s;
      best_volume = v;
    }
  }
  if (!best) throw Error(ErrorKind::OutOfDomain, "target is not covered by any sub-domain", "target.coords");
  return *best;
}

RomDatabase subdatabase(const RomDatabase& db, std::size_t index) {
  const auto boxes = db.subdomain_boxes();
  if (index >= boxes.size()) throw Error(ErrorKind::InvalidInput, "sub-database index out of range");
  RomDatabase out = db;
  out.records.clear();
  out.bases.clear();
  out.domain = ParameterDomain{boxes[index], {}};
  std::optional<std::size_t> ref;
  for (std::size_t idx : db.partition[index]) {
    if (db.consistency.reference_index && *db.consistency.reference_index == idx) ref = out.records.size();
    out.records.push_back(db.records[idx]);
    if (!db.bases.empty()) out.bases.push_back(db.bases[idx]);
  }
  out.partition = {{}};
  for (std::size_t i = 0; i < out.records.size(); ++i) out.partition[0].push_back(i);
  out.consistency.reference_index = ref;
  return out;
}

}  // namespace romdb
