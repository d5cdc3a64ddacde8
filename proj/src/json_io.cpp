#include "romdb/json_io.hpp"

#include <cmath>

namespace romdb::json {

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string idx(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::InvalidInput, path + ": " + what, path);
}

template <typename F>
auto with_path(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.field().empty()) throw;
    throw Error(e.kind(), path + ": " + e.what(), path, e.detail());
  }
}

}  // namespace

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) bad(path.empty() ? key : path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) bad(join(path, key), "missing field");
  return *it;
}

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(path, "expected a finite number");
  return v;
}

std::size_t as_count(const json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) bad(path, "expected a non-negative integer");
  if (j.is_number_integer() && j.get<long long>() < 0) bad(path, "expected a non-negative integer");
  return j.get<std::size_t>();
}

std::vector<double> as_doubles(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_double(j[i], idx(path, i)));
  return out;
}

json encode(const Box& b) { return {{"lower", b.lower}, {"upper", b.upper}}; }

Box decode_box(const json& j, const std::string& path) {
  return Box{as_doubles(require(j, "lower", path), join(path, "lower")),
             as_doubles(require(j, "upper", path), join(path, "upper"))};
}

json encode(const ParameterDomain& d) {
  json subs = json::array();
  for (const auto& b : d.subdomains) subs.push_back(encode(b));
  return {{"lower", d.box.lower}, {"upper", d.box.upper}, {"subdomains", subs}};
}

ParameterDomain decode_domain(const json& j, const std::string& path) {
  ParameterDomain d;
  d.box = decode_box(j, path);
  if (j.contains("subdomains")) {
    const json& s = j["subdomains"];
    if (!s.is_array()) bad(join(path, "subdomains"), "expected an array");
    for (std::size_t i = 0; i < s.size(); ++i) d.subdomains.push_back(decode_box(s[i], idx(join(path, "subdomains"), i)));
  }
  with_path(path, [&] { d.validate(); return 0; });
  return d;
}

json encode(const ManifoldSpec& m) {
  json out{{"manifold", to_string(m.kind)}, {"method", to_string(m.method)}};
  out["reference_index"] = m.reference_index ? json(*m.reference_index) : json(nullptr);
  return out;
}

ManifoldSpec decode_manifold(const json& j, const std::string& path) {
  ManifoldSpec m;
  const json& kind = require(j, "manifold", path);
  if (!kind.is_string()) bad(join(path, "manifold"), "expected a string");
  m.kind = with_path(join(path, "manifold"), [&] { return manifold_kind_from_string(kind.get<std::string>()); });
  if (j.contains("method")) {
    if (!j["method"].is_string()) bad(join(path, "method"), "expected a string");
    m.method = with_path(join(path, "method"), [&] { return map_method_from_string(j["method"].get<std::string>()); });
  } else {
    m.method = (m.kind == ManifoldKind::SPD || m.kind == ManifoldKind::Nonsingular) ? MapMethod::Tangent
                                                                                    : MapMethod::Flat;
  }
  if (j.contains("reference_index") && !j["reference_index"].is_null()) {
    m.reference_index = as_count(j["reference_index"], join(path, "reference_index"));
  }
  with_path(path, [&] { m.validate(); return 0; });
  return m;
}

json encode(const OperatorSlotPlan& p) {
  json out = json::array();
  for (const auto& e : p.entries) {
    json item = encode(e.manifold);
    item["slot"] = to_string(e.slot);
    item["part"] = to_string(e.part);
    out.push_back(item);
  }
  return out;
}

OperatorSlotPlan decode_plan(const json& j, RomOrder order, ScalarField field, const std::string& path) {
  OperatorSlotPlan p = OperatorSlotPlan::all_full(order, field);
  if (!j.is_array()) bad(path, "expected an array of slot entries");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string ip = idx(path, i);
    const json& s = require(j[i], "slot", ip);
    if (!s.is_string()) bad(join(ip, "slot"), "expected a string");
    const auto slot = slot_from_string(s.get<std::string>());
    if (!slot) bad(join(ip, "slot"), "unknown slot '" + s.get<std::string>() + "'");
    Part part = Part::Re;
    if (j[i].contains("part")) {
      const std::string ps = j[i]["part"].get<std::string>();
      if (ps == "im") {
        part = Part::Im;
      } else if (ps != "re") {
        bad(join(ip, "part"), "expected 're' or 'im'");
      }
    }
    const ManifoldSpec m = decode_manifold(j[i], ip);
    // A real-field entry without a part applies to the single plane; on complex
    // fields an entry without a part applies to both planes.
    if (!j[i].contains("part") && field == ScalarField::Complex) {
      p.set(*slot, Part::Re, m);
      p.set(*slot, Part::Im, m);
    } else {
      p.set(*slot, part, m);
    }
  }
  with_path(path, [&] { p.validate(); return 0; });
  return p;
}

json encode(const SchemeSpec& s) {
  json axes = json::array();
  for (auto a : s.axes) axes.push_back(to_string(a));
  return {{"kind", to_string(s.kind)},
          {"axes", axes},
          {"kernel", to_string(s.kernel)},
          {"gaussian_width", s.gaussian_width},
          {"allow_extrapolation", s.allow_extrapolation}};
}

SchemeSpec decode_scheme(const json& j, const std::string& path) {
  SchemeSpec s;
  const json& kind = require(j, "kind", path);
  if (!kind.is_string()) bad(join(path, "kind"), "expected a string");
  s.kind = with_path(join(path, "kind"), [&] { return scheme_kind_from_string(kind.get<std::string>()); });
  if (j.contains("axes")) {
    const json& a = j["axes"];
    if (!a.is_array()) bad(join(path, "axes"), "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      s.axes.push_back(with_path(idx(join(path, "axes"), i), [&] { return axis_rule_from_string(a[i].get<std::string>()); }));
    }
  }
  if (j.contains("kernel")) {
    s.kernel = with_path(join(path, "kernel"), [&] { return rbf_kernel_from_string(j["kernel"].get<std::string>()); });
  }
  if (j.contains("gaussian_width")) s.gaussian_width = as_double(j["gaussian_width"], join(path, "gaussian_width"));
  if (j.contains("allow_extrapolation")) {
    if (!j["allow_extrapolation"].is_boolean()) bad(join(path, "allow_extrapolation"), "expected a boolean");
    s.allow_extrapolation = j["allow_extrapolation"].get<bool>();
  }
  return s;
}

json encode(const ConsistencyInfo& c) {
  json out{{"mode", to_string(c.mode)}};
  out["reference_index"] = c.reference_index ? json(*c.reference_index) : json(nullptr);
  return out;
}

ConsistencyInfo decode_consistency(const json& j, const std::string& path) {
  ConsistencyInfo c;
  const json& mode = require(j, "mode", path);
  if (!mode.is_string()) bad(join(path, "mode"), "expected a string");
  c.mode = with_path(join(path, "mode"), [&] { return consistency_mode_from_string(mode.get<std::string>()); });
  if (j.contains("reference_index") && !j["reference_index"].is_null()) {
    c.reference_index = as_count(j["reference_index"], join(path, "reference_index"));
  }
  return c;
}

json encode(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat decode_mat(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = 0;
  if (rows > 0) {
    if (!j[0].is_array()) bad(idx(path, 0), "expected an array");
    cols = static_cast<Eigen::Index>(j[0].size());
  }
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    const std::string rp = idx(path, static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) bad(rp, "ragged matrix row");
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = as_double(row[static_cast<std::size_t>(c)], idx(rp, static_cast<std::size_t>(c)));
    }
  }
  return m;
}

json encode(const DenseMatrix& m) {
  json out{{"rows", m.rows()}, {"cols", m.cols()}, {"re", encode(m.re())}};
  if (m.is_complex()) out["im"] = encode(m.im());
  return out;
}

json encode(const Rom& rom) {
  json slots = json::object();
  for (std::size_t i = 0; i < rom.slots().size(); ++i) {
    slots[to_string(slots_of(rom.order())[i])] = encode(rom.slots()[i]);
  }
  return {{"kind", to_string(rom.order())},
          {"k", rom.k()},
          {"n_inputs", rom.n_inputs()},
          {"n_outputs", rom.n_outputs()},
          {"scalar_field", to_string(rom.field())},
          {"operators", slots}};
}

json encode_meta(const RomDatabase& db) {
  json points = json::array();
  for (const auto& r : db.records) points.push_back(r.point.coords());
  return {{"format_version", db.format_version},
          {"kind", to_string(db.order)},
          {"k", db.k},
          {"n_inputs", db.n_inputs},
          {"n_outputs", db.n_outputs},
          {"n_mu", db.n_mu()},
          {"n_records", db.size()},
          {"scalar_field", to_string(db.field)},
          {"domain", encode(db.domain)},
          {"partition", db.partition},
          {"plan", encode(db.plan)},
          {"scheme", encode(db.scheme)},
          {"consistency", encode(db.consistency)},
          {"points", points}};
}

}  // namespace romdb::json
