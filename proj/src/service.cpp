#include "romdb/service.hpp"

#include <algorithm>

#include "romdb/analyze.hpp"
#include "romdb/config.hpp"
#include "romdb/json_io.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that breaks Eigen sparse headers.
#include <httplib.h>

namespace romdb {
namespace {

using Json = nlohmann::json;
namespace jio = romdb::json;

Json complex_json(cplx v) { return {{"re", v.real()}, {"im", v.imag()}}; }

/// Malformed requests are validation failures whatever the decoder called them.
template <typename F>
auto request_field(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidInput || e.kind() == ErrorKind::InvalidSpec)
      throw Error(ErrorKind::InvalidInput, e.what(), e.field(), e.detail());
    throw;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("malformed request: ") + e.what());
  }
}

ParameterPoint decode_target(const RomDatabase& db, const Json& req) {
  const auto coords = request_field([&] {
    const Json& t = jio::require(req, "target", "");
    return jio::as_doubles(jio::require(t, "coords", "target"), "target.coords");
  });
  if (coords.size() != db.n_mu())
    throw Error(ErrorKind::InvalidInput,
                "target.coords: expected " + std::to_string(db.n_mu()) + " coordinates, got " +
                    std::to_string(coords.size()),
                "target.coords");
  ParameterPoint p(coords);
  if (!db.domain.box.contains(p))
    throw Error(ErrorKind::OutOfDomain, "target lies outside the database domain", "target.coords");
  return p;
}

double opt_num(const Json& req, const std::string& key, double fallback) {
  if (!req.contains(key)) return fallback;
  return request_field([&] { return jio::as_double(req[key], key); });
}

CriticalOptions decode_critical(const Json& req) {
  CriticalOptions c;
  const auto range = request_field([&] { return jio::as_doubles(jio::require(req, "q_range", ""), "q_range"); });
  if (range.size() != 2 || !(range[1] > range[0]))
    throw Error(ErrorKind::InvalidInput, "q_range: expected [lo, hi] with lo < hi", "q_range");
  c.q_lo = range[0];
  c.q_hi = range[1];
  c.tol = opt_num(req, "tol", c.tol);
  if (!(c.tol > 0.0)) throw Error(ErrorKind::InvalidInput, "tol: must be positive", "tol");
  if (req.contains("scan_steps"))
    c.scan_steps = static_cast<int>(request_field([&] { return jio::as_count(req["scan_steps"], "scan_steps"); }));
  if (c.scan_steps < 1) throw Error(ErrorKind::InvalidInput, "scan_steps: must be >= 1", "scan_steps");
  return c;
}

Json critical_json(const CriticalResult& r) {
  return {{"q_crit", r.q_crit},
          {"mode", r.mode_index},
          {"eigenvalue", complex_json(r.eigenvalue)},
          {"ambiguous", r.ambiguous}};
}

}  // namespace

void DatabaseSet::add(const std::string& id, RomDatabase db) {
  if (id.empty() || id.find('/') != std::string::npos)
    throw Error(ErrorKind::InvalidInput, "database id must be non-empty and contain no '/'", "id");
  if (dbs_.count(id)) throw Error(ErrorKind::InvalidInput, "duplicate database id '" + id + "'", "id");
  dbs_.emplace(id, std::move(db));
}

const RomDatabase* DatabaseSet::find(const std::string& id) const {
  auto it = dbs_.find(id);
  return it == dbs_.end() ? nullptr : &it->second;
}

int http_status(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput:
    case ErrorKind::InvalidSpec:
    case ErrorKind::Usage:
      return 400;
    case ErrorKind::OutOfDomain:
    case ErrorKind::InvalidDomain:
    case ErrorKind::Extrapolation:
      return 422;
    default:
      return 500;
  }
}

Json error_body(const Error& e) {
  Json out{{"error", to_string(e.kind())}, {"message", e.what()}};
  out["field"] = e.field().empty() ? Json(nullptr) : Json(e.field());
  return out;
}

Json run_query(const RomDatabase& db, const Json& req) {
  if (!req.is_object()) throw Error(ErrorKind::InvalidInput, "request body must be a JSON object");
  const std::string op = request_field([&] {
    const Json& o = jio::require(req, "operation", "");
    if (!o.is_string()) throw Error(ErrorKind::InvalidInput, "operation: expected a string", "operation");
    return o.get<std::string>();
  });
  static const char* const kOps[] = {"rom", "frequency_response", "eigen", "critical_parameter", "stability_curve"};
  if (std::find(std::begin(kOps), std::end(kOps), op) == std::end(kOps))
    throw Error(ErrorKind::InvalidInput, "operation: unknown operation '" + op + "'", "operation");

  const ParameterPoint target = decode_target(db, req);
  InterpolationOptions iopts;
  if (req.contains("options")) {
    const Json& o = req["options"];
    if (!o.is_object()) throw Error(ErrorKind::InvalidInput, "options: expected an object", "options");
    if (o.contains("allow_inconsistent")) {
      if (!o["allow_inconsistent"].is_boolean())
        throw Error(ErrorKind::InvalidInput, "options.allow_inconsistent: expected a boolean", "options.allow_inconsistent");
      iopts.allow_inconsistent = o["allow_inconsistent"].get<bool>();
    }
  }

  // Validate operation parameters before any numerical work.
  std::vector<double> grid;
  CVec input;
  CriticalOptions copts;
  std::size_t axis = 0, samples = 0;
  if (op == "frequency_response") {
    grid = request_field([&] { return jio::as_doubles(jio::require(req, "grid", ""), "grid"); });
    request_field([&] { validate_grid(grid, "grid"); return 0; });
    input = req.contains("input") ? request_field([&] { return decode_cvec(req["input"], "input"); })
                                  : CVec(CVec::Ones(db.n_inputs));
    if (input.size() != db.n_inputs)
      throw Error(ErrorKind::InvalidInput, "input: expected " + std::to_string(db.n_inputs) + " entries", "input");
  } else if (op == "critical_parameter" || op == "stability_curve") {
    copts = decode_critical(req);
    if (db.n_inputs != db.n_outputs)
      throw Error(ErrorKind::InvalidInput, "closed-loop analysis needs as many inputs as outputs", "operation");
    if (op == "stability_curve") {
      axis = request_field([&] { return jio::as_count(jio::require(req, "axis", ""), "axis"); });
      samples = request_field([&] { return jio::as_count(jio::require(req, "samples", ""), "samples"); });
      if (axis >= db.n_mu()) throw Error(ErrorKind::InvalidInput, "axis: out of range", "axis");
      if (samples < 2) throw Error(ErrorKind::InvalidInput, "samples: need at least 2", "samples");
    }
  }

  Json out;
  out["operation"] = op;
  out["target"] = {{"coords", target.coords()}};
  out["consistency"] = jio::encode(db.consistency);
  if (op == "stability_curve") {
    const auto curve = stability_curve(db, target, axis, samples, copts, iopts);
    Json pts = Json::array();
    for (const auto& s : curve) {
      Json p{{"x", s.x}, {"coords", s.point.coords()}};
      if (s.ok) {
        p["values"] = Json::array({s.result.q_crit});
        p["mode"] = s.result.mode_index;
        p["ambiguous"] = s.result.ambiguous;
        p["status"] = "ok";
      } else {
        p["values"] = Json::array();
        p["status"] = s.error;
        p["message"] = s.message;
      }
      pts.push_back(std::move(p));
    }
    out["curve"] = std::move(pts);
    out["axis"] = axis;
    return out;
  }

  Diagnostics diag;
  const Rom rom = interpolate_rom(db, target, iopts, &diag);
  out["warnings"] = diag.warnings;
  if (op == "rom") {
    out["rom"] = jio::encode(rom);
  } else if (op == "frequency_response") {
    const FrequencyResponse r = frequency_response(rom, grid, input);
    Json curves = Json::array();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      Json vals = Json::array();
      for (Eigen::Index o = 0; o < r.outputs.rows(); ++o) {
        const cplx y = r.outputs(o, static_cast<Eigen::Index>(i));
        if (r.valid[i])
          vals.push_back({{"re", y.real()}, {"im", y.imag()}, {"db", db_value(y)}});
        else
          vals.push_back(nullptr);
      }
      curves.push_back({{"x", grid[i]}, {"values", std::move(vals)}, {"valid", static_cast<bool>(r.valid[i])}});
    }
    out["curves"] = std::move(curves);
  } else if (op == "eigen") {
    const EigenAnalysis e = eigen_analysis(rom);
    Json vals = Json::array();
    for (Eigen::Index i = 0; i < e.values.size(); ++i)
      vals.push_back({{"re", e.values(i).real()},
                      {"im", e.values(i).imag()},
                      {"damping_ratio", e.damping_ratios(i)},
                      {"frequency", e.frequencies(i)}});
    out["eigenvalues"] = std::move(vals);
  } else {
    Diagnostics cdiag;
    const CriticalResult r = critical_parameter([&](double q) { return closed_loop(rom, q); }, copts, &cdiag);
    out["critical"] = critical_json(r);
    for (const auto& w : cdiag.warnings) out["warnings"].push_back(w);
  }
  return out;
}

HttpResponse handle_request(const DatabaseSet& set, const std::string& method, const std::string& path,
                            const std::string& body) {
  auto reply = [](int status, const Json& j) { return HttpResponse{status, j.dump()}; };
  auto not_found = [&](const std::string& what) {
    return reply(404, Json{{"error", "not-found"}, {"message", what}, {"field", nullptr}});
  };
  std::vector<std::string> parts;
  for (std::size_t pos = 0; pos < path.size();) {
    const auto next = path.find('/', pos);
    const auto end = next == std::string::npos ? path.size() : next;
    if (end > pos) parts.push_back(path.substr(pos, end - pos));
    pos = end + 1;
  }
  if (parts.empty() || parts[0] != "databases") return not_found("unknown route " + path);

  if (parts.size() == 1) {
    if (method != "GET") return reply(405, Json{{"error", "usage"}, {"message", "use GET"}, {"field", nullptr}});
    Json list = Json::array();
    for (const auto& [id, db] : set.all()) {
      list.push_back({{"id", id},
                      {"n_db", db.size()},
                      {"n_mu", db.n_mu()},
                      {"kind", to_string(db.order)},
                      {"k", db.k},
                      {"scalar_field", to_string(db.field)},
                      {"domain", jio::encode(db.domain)},
                      {"consistency", jio::encode(db.consistency)}});
    }
    return reply(200, Json{{"databases", std::move(list)}});
  }
  const RomDatabase* db = set.find(parts[1]);
  if (!db) return not_found("unknown database '" + parts[1] + "'");
  if (parts.size() == 3 && parts[2] == "meta") {
    if (method != "GET") return reply(405, Json{{"error", "usage"}, {"message", "use GET"}, {"field", nullptr}});
    Json meta = jio::encode_meta(*db);
    meta["id"] = parts[1];
    return reply(200, meta);
  }
  if (parts.size() == 3 && parts[2] == "query") {
    if (method != "POST") return reply(405, Json{{"error", "usage"}, {"message", "use POST"}, {"field", nullptr}});
    try {
      Json req;
      try {
        req = Json::parse(body);
      } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::InvalidInput, std::string("malformed JSON body: ") + e.what());
      }
      Json out = run_query(*db, req);
      out["database"] = parts[1];
      return reply(200, out);
    } catch (const Error& e) {
      return reply(http_status(e.kind()), error_body(e));
    }
  }
  return not_found("unknown route " + path);
}

void serve(const DatabaseSet& set, const std::string& host, int port, const std::function<void(int)>& on_ready) {
  httplib::Server svr;
  auto handler = [&set](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = handle_request(set, req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  svr.Get(R"(/.*)", handler);
  svr.Post(R"(/.*)", handler);
  svr.Put(R"(/.*)", handler);
  svr.Patch(R"(/.*)", handler);
  svr.Delete(R"(/.*)", handler);
  int bound = port;
  if (port == 0) {
    bound = svr.bind_to_any_port(host);
  } else if (!svr.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(ErrorKind::LoadError, "cannot bind " + host + ":" + std::to_string(port), "bind");
  if (on_ready) on_ready(bound);
  svr.listen_after_bind();
}

}  // namespace romdb
