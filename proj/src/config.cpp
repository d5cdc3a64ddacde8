#include "romdb/config.hpp"

#include <fstream>
#include <sstream>

#include "romdb/dbstore.hpp"
#include "romdb/json_io.hpp"

namespace romdb {
namespace {

using Json = nlohmann::json;
namespace jio = romdb::json;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string idx(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::InvalidSpec, path + ": " + what, path);
}

/// Config errors are usage errors: decoding failures are re-tagged InvalidSpec.
template <typename F>
auto spec(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidInput) throw Error(ErrorKind::InvalidSpec, e.what(), e.field(), e.detail());
    throw;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::InvalidSpec, std::string("malformed configuration: ") + e.what());
  }
}

double num(const Json& j, const std::string& key, const std::string& path, double fallback) {
  if (!j.contains(key)) return fallback;
  return jio::as_double(j[key], join(path, key));
}

std::size_t count(const Json& j, const std::string& key, const std::string& path, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  return jio::as_count(j[key], join(path, key));
}

bool flag(const Json& j, const std::string& key, const std::string& path, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) bad(join(path, key), "expected a boolean");
  return j[key].get<bool>();
}

std::string str(const Json& j, const std::string& key, const std::string& path) {
  const Json& v = jio::require(j, key, path);
  if (!v.is_string()) bad(join(path, key), "expected a string");
  return v.get<std::string>();
}

AffineLaw decode_law(const Json& j, const std::string& path) {
  AffineLaw law;
  if (!j.is_object()) bad(path, "expected an object {c0, c}");
  law.c0 = num(j, "c0", path, 1.0);
  if (j.contains("c")) law.c = jio::as_doubles(j["c"], join(path, "c"));
  return law;
}

DofLaw decode_dofs(const Json& j, const std::string& path) {
  DofLaw d;
  if (j.is_number()) {
    d.base = jio::as_double(j, path);
    return d;
  }
  if (!j.is_object()) bad(path, "expected a number or an object");
  d.base = num(j, "base", path, d.base);
  if (j.contains("law")) d.law = decode_law(j["law"], join(path, "law"));
  if (j.contains("table")) {
    const Json& t = j["table"];
    if (!t.is_array()) bad(join(path, "table"), "expected an array");
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::string ip = idx(join(path, "table"), i);
      d.table.emplace_back(jio::as_doubles(jio::require(t[i], "coords", ip), join(ip, "coords")),
                           jio::as_count(jio::require(t[i], "n", ip), join(ip, "n")));
    }
  }
  return d;
}

ChainSpec decode_chain(const Json& j, const std::string& path) {
  ChainSpec c;
  if (j.contains("dofs")) c.dofs = decode_dofs(j["dofs"], join(path, "dofs"));
  c.continuum_scaling = flag(j, "continuum_scaling", path, c.continuum_scaling);
  c.density = num(j, "density", path, c.density);
  c.stiffness = num(j, "stiffness", path, c.stiffness);
  if (j.contains("density_law")) c.density_law = decode_law(j["density_law"], join(path, "density_law"));
  if (j.contains("stiffness_law")) c.stiffness_law = decode_law(j["stiffness_law"], join(path, "stiffness_law"));
  if (j.contains("rayleigh")) {
    const auto r = jio::as_doubles(j["rayleigh"], join(path, "rayleigh"));
    if (r.size() != 2) bad(join(path, "rayleigh"), "expected [mass, stiffness] coefficients");
    c.rayleigh_mass = r[0];
    c.rayleigh_stiffness = r[1];
  }
  c.loss_factor = num(j, "loss_factor", path, c.loss_factor);
  c.mass_loss = num(j, "mass_loss", path, c.mass_loss);
  if (j.contains("inputs")) c.input_locations = jio::as_doubles(j["inputs"], join(path, "inputs"));
  if (j.contains("outputs")) c.output_locations = jio::as_doubles(j["outputs"], join(path, "outputs"));
  if (j.contains("bump")) {
    const std::string bp = join(path, "bump");
    MassBump b;
    b.amplitude = num(j["bump"], "amplitude", bp, b.amplitude);
    b.width = num(j["bump"], "width", bp, b.width);
    b.position = decode_law(jio::require(j["bump"], "position", bp), join(bp, "position"));
    if (!(b.width > 0.0)) bad(join(bp, "width"), "must be positive");
    c.bump = b;
  }
  return c;
}

FirstOrderSpec decode_first_order(const Json& j, const std::string& path) {
  FirstOrderSpec f;
  f.oscillators = count(j, "oscillators", path, f.oscillators);
  f.seed = count(j, "seed", path, f.seed);
  f.base_frequency = num(j, "base_frequency", path, f.base_frequency);
  f.frequency_spacing = num(j, "frequency_spacing", path, f.frequency_spacing);
  f.damping = num(j, "damping", path, f.damping);
  f.coupling = num(j, "coupling", path, f.coupling);
  f.mass_perturbation = num(j, "mass_perturbation", path, f.mass_perturbation);
  if (j.contains("frequency_law")) f.frequency_law = decode_law(j["frequency_law"], join(path, "frequency_law"));
  if (j.contains("damping_law")) f.damping_law = decode_law(j["damping_law"], join(path, "damping_law"));
  f.gain = num(j, "gain", path, f.gain);
  f.n_inputs = count(j, "inputs", path, f.n_inputs);
  f.n_outputs = count(j, "outputs", path, f.n_outputs);
  return f;
}

std::vector<ParameterPoint> decode_points(const Json& j, std::size_t n_mu) {
  std::vector<ParameterPoint> pts;
  if (j.contains("points")) {
    const Json& p = j["points"];
    if (!p.is_array()) bad("points", "expected an array of coordinate arrays");
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto c = jio::as_doubles(p[i], idx("points", i));
      if (c.size() != n_mu) bad(idx("points", i), "coordinate count differs from the domain dimension");
      pts.emplace_back(std::move(c));
    }
  }
  if (j.contains("lattice")) {
    const Json& l = j["lattice"];
    if (!l.is_array() || l.size() != n_mu) bad("lattice", "expected one value list per axis");
    std::vector<std::vector<double>> axes;
    for (std::size_t a = 0; a < l.size(); ++a) axes.push_back(jio::as_doubles(l[a], idx("lattice", a)));
    for (auto& p : lattice_points(axes)) pts.push_back(std::move(p));
  }
  if (pts.empty()) bad("points", "configuration needs 'points' or 'lattice'");
  return pts;
}

}  // namespace

CVec decode_cvec(const Json& j, const std::string& path) {
  return spec([&] {
    if (!j.is_array()) bad(path, "expected an array");
    CVec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string ip = idx(path, i);
      if (j[i].is_number()) {
        v(static_cast<Eigen::Index>(i)) = jio::as_double(j[i], ip);
      } else {
        v(static_cast<Eigen::Index>(i)) = cplx(num(j[i], "re", ip, 0.0), num(j[i], "im", ip, 0.0));
      }
    }
    return v;
  });
}

FamilySpec decode_family(const Json& family, const Json& basis, const std::string& path) {
  return spec([&] {
    FamilySpec f;
    const std::string kind = str(family, "kind", path);
    if (kind == "chain") {
      f.system = decode_chain(family, path);
    } else if (kind == "first_order") {
      f.system = decode_first_order(family, path);
    } else {
      bad(join(path, "kind"), "expected 'chain' or 'first_order'");
    }
    const std::string bp = "basis";
    const std::string method = str(basis, "method", bp);
    if (method == "modal") {
      f.method = RobMethod::Modal;
    } else if (method == "pod") {
      f.method = RobMethod::Pod;
    } else if (method == "dgp") {
      f.method = RobMethod::Dgp;
    } else {
      bad(join(bp, "method"), "expected 'modal', 'pod' or 'dgp'");
    }
    f.k = static_cast<Eigen::Index>(count(basis, "k", bp, 4));
    if (basis.contains("wavenumbers")) f.dgp.wavenumbers = jio::as_doubles(basis["wavenumbers"], join(bp, "wavenumbers"));
    f.dgp.derivatives = static_cast<int>(count(basis, "derivatives", bp, 1));
    f.real_basis = flag(basis, "real", bp, false);
    if (basis.contains("band")) {
      const auto b = jio::as_doubles(basis["band"], join(bp, "band"));
      if (b.size() != 2 || !(b[1] >= b[0])) bad(join(bp, "band"), "expected [min, max]");
      f.pod_min = b[0];
      f.pod_max = b[1];
    }
    if (f.method == RobMethod::Dgp && f.dgp.wavenumbers.empty()) bad(join(bp, "wavenumbers"), "dgp needs wavenumbers");
    return f;
  });
}

ConsistencyOptions decode_align(const Json& j, const std::string& path) {
  return spec([&] {
    ConsistencyOptions o;
    o.mode = consistency_mode_from_string(str(j, "mode", path));
    if (j.contains("reference") && !j["reference"].is_null()) o.reference_index = jio::as_count(j["reference"], join(path, "reference"));
    o.fixed_point.s_margin = num(j, "s_margin", path, o.fixed_point.s_margin);
    o.fixed_point.max_iters = static_cast<int>(count(j, "max_iters", path, static_cast<std::size_t>(o.fixed_point.max_iters)));
    o.fixed_point.restarts = static_cast<int>(count(j, "restarts", path, 0));
    if (j.contains("init")) o.fixed_point.init = init_kind_from_string(str(j, "init", path));
    o.fixed_point.seed = count(j, "seed", path, 0);
    o.truncate = flag(j, "truncate", path, o.truncate);
    o.theta_max = num(j, "theta_max", path, o.theta_max);
    o.fixed_point.validate();
    return o;
  });
}

BuildConfig decode_build_config(const Json& j) {
  return spec([&] {
    BuildConfig cfg;
    cfg.domain = jio::decode_domain(jio::require(j, "domain", ""), "domain");
    cfg.points = decode_points(j, cfg.domain.dim());
    cfg.family = decode_family(jio::require(j, "family", ""), jio::require(j, "basis", ""), "family");
    if (j.contains("scheme")) cfg.scheme = jio::decode_scheme(j["scheme"], "scheme");
    if (j.contains("align") && !j["align"].is_null()) cfg.align = AlignConfig{decode_align(j["align"], "align")};
    if (j.contains("plan")) {
      const Json& p = j["plan"];
      if (p.is_object() && p.contains("auto")) {
        const Json& c = p["auto"];
        if (!c.is_array() || c.empty()) bad("plan.auto", "expected a non-empty candidate list");
        for (std::size_t i = 0; i < c.size(); ++i)
          cfg.plan.auto_candidates.push_back(jio::decode_manifold(c[i], idx("plan.auto", i)));
      } else {
        cfg.plan.explicit_plan = p;
      }
    }
    if (j.contains("partition")) {
      const Json& p = j["partition"];
      if (!p.is_array() || p.size() != cfg.domain.dim()) bad("partition", "expected one boundary list per axis");
      for (std::size_t a = 0; a < p.size(); ++a) cfg.partition.push_back(jio::as_doubles(p[a], idx("partition", a)));
    }
    return cfg;
  });
}

AnnealingOptions decode_annealing(const Json& j, const std::string& path) {
  return spec([&] {
    AnnealingOptions a;
    a.seed = count(j, "seed", path, a.seed);
    a.cooling = num(j, "cooling", path, a.cooling);
    a.proposals_per_level = static_cast<int>(count(j, "proposals_per_level", path, static_cast<std::size_t>(a.proposals_per_level)));
    a.levels = static_cast<int>(count(j, "levels", path, static_cast<std::size_t>(a.levels)));
    a.step_fraction = num(j, "step_fraction", path, a.step_fraction);
    return a;
  });
}

PatternSearchOptions decode_pattern(const Json& j, const std::string& path) {
  return spec([&] {
    PatternSearchOptions p;
    p.initial_step_fraction = num(j, "initial_step_fraction", path, p.initial_step_fraction);
    p.min_step_fraction = num(j, "min_step_fraction", path, p.min_step_fraction);
    p.max_evaluations = static_cast<int>(count(j, "max_evaluations", path, static_cast<std::size_t>(p.max_evaluations)));
    return p;
  });
}

InverseProblemSpec decode_inverse(const Json& j, const Box& fallback) {
  return spec([&] {
    InverseProblemSpec s;
    s.wavenumbers = jio::as_doubles(jio::require(j, "wavenumbers", ""), "wavenumbers");
    if (j.contains("measured")) {
      const Json& m = j["measured"];
      if (!m.is_array()) bad("measured", "expected an array of dB vectors");
      for (std::size_t i = 0; i < m.size(); ++i) {
        const auto v = jio::as_doubles(m[i], idx("measured", i));
        s.measured.push_back(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
      }
    }
    if (j.contains("alpha")) s.alpha = jio::as_doubles(j["alpha"], "alpha");
    s.beta = num(j, "beta", "", 0.0);
    if (j.contains("input")) s.input = decode_cvec(j["input"], "input");
    s.domain = j.contains("domain") ? jio::decode_box(j["domain"], "domain") : fallback;
    if (j.contains("annealing")) s.annealing = decode_annealing(j["annealing"], "annealing");
    if (j.contains("pattern")) s.pattern = decode_pattern(j["pattern"], "pattern");
    s.interpolation.allow_inconsistent = flag(j, "allow_inconsistent", "", false);
    return s;
  });
}

RomDatabase finalize_database(RomDatabase db, const BuildConfig& cfg, bool apply_partition) {
  if (cfg.scheme) db.scheme = *cfg.scheme;
  if (cfg.align) {
    ConsistencyResult r = enforce_database_consistency(db, cfg.align->options);
    db = std::move(r.database);
  }
  if (apply_partition && !cfg.partition.empty()) db = partition(db, cfg.partition);
  if (!cfg.plan.auto_candidates.empty()) {
    db.plan = choose_plan(db, cfg.plan.auto_candidates);
  } else if (cfg.plan.explicit_plan) {
    db.plan = spec([&] { return jio::decode_plan(*cfg.plan.explicit_plan, db.order, db.field, "plan"); });
  }
  db.validate();
  return db;
}

RomDatabase run_build(const BuildConfig& cfg) {
  return finalize_database(build_database(cfg.family, cfg.domain, cfg.points), cfg, true);
}

SampleConfig decode_sample_config(const Json& j) {
  return spec([&] {
    SampleConfig cfg;
    cfg.build.domain = jio::decode_domain(jio::require(j, "domain", ""), "domain");
    cfg.build.family = decode_family(jio::require(j, "family", ""), jio::require(j, "basis", ""), "family");
    if (j.contains("scheme")) cfg.build.scheme = jio::decode_scheme(j["scheme"], "scheme");
    if (j.contains("align") && !j["align"].is_null()) cfg.build.align = AlignConfig{decode_align(j["align"], "align")};
    if (j.contains("plan")) {
      const Json& p = j["plan"];
      if (p.is_object() && p.contains("auto")) bad("plan.auto", "automatic plans are not supported while sampling");
      cfg.build.plan.explicit_plan = p;
    }
    const Json& s = jio::require(j, "sampler", "");
    cfg.sampler.tolerance = num(s, "tolerance", "sampler", cfg.sampler.tolerance);
    cfg.sampler.max_refinements = static_cast<int>(count(s, "max_refinements", "sampler", 4));
    const auto lat = jio::as_doubles(jio::require(s, "initial_lattice", "sampler"), "sampler.initial_lattice");
    for (double v : lat) cfg.sampler.initial_lattice.push_back(static_cast<std::size_t>(v));
    if (s.contains("metric")) {
      const std::string m = str(s, "metric", "sampler");
      if (m == "output_error") {
        cfg.sampler.metric = SamplerMetric::OutputError;
      } else if (m == "inverse_recovery_error") {
        cfg.sampler.metric = SamplerMetric::InverseRecoveryError;
      } else {
        bad("sampler.metric", "expected 'output_error' or 'inverse_recovery_error'");
      }
    }
    cfg.sampler.validate(cfg.build.domain.dim());
    cfg.inverse = decode_inverse(jio::require(j, "inverse", ""), cfg.build.domain.box);
    if (j.contains("validation")) {
      const Json& v = j["validation"];
      if (!v.is_array() || v.size() != cfg.build.domain.dim()) bad("validation", "expected one value list per axis");
      for (std::size_t a = 0; a < v.size(); ++a) cfg.validation_axes.push_back(jio::as_doubles(v[a], idx("validation", a)));
    }
    return cfg;
  });
}

SamplerProblem make_sampler_problem(const SampleConfig& cfg) {
  SamplerProblem p;
  p.domain = cfg.build.domain.box;
  const FamilySpec family = cfg.build.family;
  p.build = [family](const ParameterPoint& mu) { return build_record(mu, family); };
  const std::vector<double> kappas = cfg.inverse.wavenumbers;
  const CVec input = cfg.inverse.input;
  p.truth = [family, kappas, input](const ParameterPoint& mu) {
    const HdmSystem h = make_system(mu, family);
    const CVec u = input.size() ? input : CVec::Ones(h.n_inputs());
    const CMat y = hdm_frequency_response(h, kappas, u);
    std::vector<Vec> out;
    for (Eigen::Index i = 0; i < y.cols(); ++i) out.push_back(db_transform(y.col(i)));
    return out;
  };
  p.inverse = cfg.inverse;
  const BuildConfig build = cfg.build;
  p.finalize = [build](RomDatabase db) { return finalize_database(std::move(db), build, false); };
  return p;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::LoadError, "cannot open " + path, "path");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::InvalidSpec, path + ": malformed JSON: " + e.what());
  }
}

}  // namespace romdb
