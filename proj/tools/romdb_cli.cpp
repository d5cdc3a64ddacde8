// romdb: build, align, partition, inspect and query ROM databases.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "romdb/analyze.hpp"
#include "romdb/config.hpp"
#include "romdb/dbstore.hpp"
#include "romdb/json_io.hpp"
#include "romdb/service.hpp"

namespace {

using Json = nlohmann::json;
using namespace romdb;

[[noreturn]] void usage(const std::string& msg, const std::string& field = {}) {
  throw Error(ErrorKind::Usage, msg, field);
}

std::vector<double> parse_list(const std::string& s, const std::string& field) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      usage("cannot parse '" + tok + "' as a number", field);
    }
  }
  if (out.empty()) usage("expected a comma-separated list of numbers", field);
  return out;
}

/// "lo:hi:n" (n equispaced values) or a comma-separated list.
std::vector<double> parse_grid(const std::string& s) {
  if (s.find(':') == std::string::npos) return parse_list(s, "grid");
  std::string t = s;
  for (auto& c : t)
    if (c == ':') c = ',';
  const auto v = parse_list(t, "grid");
  if (v.size() != 3 || v[2] < 1 || v[2] != std::floor(v[2])) usage("grid range must be lo:hi:n", "grid");
  const auto n = static_cast<std::size_t>(v[2]);
  std::vector<double> g;
  for (std::size_t i = 0; i < n; ++i) g.push_back(n == 1 ? v[0] : v[0] + (v[1] - v[0]) * static_cast<double>(i) / static_cast<double>(n - 1));
  return g;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::LoadError, "cannot write " + path, "out");
  out << text;
}

ParameterPoint target_of(const RomDatabase& db, const std::string& s) {
  ParameterPoint p(parse_list(s, "target.coords"));
  if (p.dim() != db.n_mu())
    usage("target needs " + std::to_string(db.n_mu()) + " coordinates", "target.coords");
  if (!db.domain.box.contains(p)) throw Error(ErrorKind::OutOfDomain, "target lies outside the domain", "target.coords");
  return p;
}

Json alignment_report(const RomDatabase& before, const ConsistencyResult& r) {
  Json recs = Json::array();
  for (const auto& a : r.records) {
    Json j{{"index", a.index}, {"distance_before", a.distance_before}, {"distance_after", a.distance_after}};
    if (a.report) {
      j["iterations"] = a.report->iterations;
      j["converged"] = a.report->converged;
      j["criticality_residual"] = a.report->criticality_residual;
    }
    j["warnings"] = a.diagnostics.warnings;
    recs.push_back(std::move(j));
  }
  Json out{{"mode", to_string(r.database.consistency.mode)},
           {"reference", r.reference_index},
           {"max_pairwise_distance_before", max_pairwise_distance(before, r.reference_index)},
           {"max_pairwise_distance", max_pairwise_distance(r.database, r.reference_index)},
           {"records", std::move(recs)}};
  out["truncation_length"] = r.truncation_length ? Json(*r.truncation_length) : Json(nullptr);
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Build, align and query databases of parametric reduced-order models"};
  app.require_subcommand(1);

  // build
  std::string cfg_path, out_path, in_path, align_mode;
  auto* build = app.add_subcommand("build", "Build a database from a declarative config");
  build->add_option("--config", cfg_path, "Build config (JSON)")->required();
  build->add_option("--out", out_path, "Output database file")->required();
  build->add_option("--align", align_mode, "Override the alignment mode (none, procrustes, fixed-point-g, fixed-point-pg)");

  // align
  std::string mode = "fixed-point-pg", init = "identity";
  std::optional<std::size_t> reference;
  double theta_max = std::numbers::pi / 4, s_margin = 1.5;
  int max_iters = 10000, restarts = 0;
  bool truncate = false;
  auto* align = app.add_subcommand("align", "Enforce consistency of a database");
  align->add_option("--in", in_path, "Input database")->required();
  align->add_option("--out", out_path, "Output database")->required();
  align->add_option("--mode", mode, "procrustes, fixed-point-g or fixed-point-pg");
  align->add_option("--reference", reference, "Reference record index (default: nearest the centroid)");
  align->add_option("--theta-max", theta_max, "Procrustes truncation angle (radians)");
  align->add_flag("--truncate", truncate, "Procrustes: drop directions at or beyond theta-max");
  align->add_option("--s-margin", s_margin, "Fixed-point shift margin (> 1)");
  align->add_option("--max-iters", max_iters, "Fixed-point iteration cap");
  align->add_option("--restarts", restarts, "Extra randomly started fixed-point runs");
  align->add_option("--init", init, "identity, random, warm-start or moment-procrustes");

  // partition
  std::vector<std::string> cuts;
  auto* part = app.add_subcommand("partition", "Split the domain into sub-databases");
  part->add_option("--in", in_path, "Input database")->required();
  part->add_option("--out", out_path, "Output database")->required();
  part->add_option("--cut", cuts, "Interior boundary as axis:value (repeatable)")->required();

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Print database metadata and integrity checks");
  inspect->add_option("--in", in_path, "Database file")->required();

  // interp
  std::string target;
  bool allow_inconsistent = false;
  auto* interp = app.add_subcommand("interp", "Interpolate the ROM at a target point");
  interp->add_option("--in", in_path, "Database file")->required();
  interp->add_option("--target", target, "Target coordinates, comma separated")->required();
  interp->add_option("--out", out_path, "Output JSON (default stdout)");
  interp->add_flag("--allow-inconsistent", allow_inconsistent, "Permit databases never aligned");

  // sweep
  std::string grid, input, q_range = "0,1";
  bool frequency = false, stability = false;
  std::size_t axis = 0, samples = 26;
  double tol = 1e-8;
  int scan_steps = 64;
  auto* sweep = app.add_subcommand("sweep", "Frequency or stability sweep to CSV");
  sweep->add_option("--in", in_path, "Database file")->required();
  sweep->add_option("--target", target, "Target (base) coordinates")->required();
  sweep->add_flag("--frequency", frequency, "Frequency response over --grid");
  sweep->add_flag("--stability", stability, "Critical parameter along --axis");
  sweep->add_option("--grid", grid, "lo:hi:n or comma-separated values");
  sweep->add_option("--input", input, "Real input vector, comma separated (default ones)");
  sweep->add_option("--axis", axis, "Swept parameter axis");
  sweep->add_option("--samples", samples, "Samples along the axis");
  sweep->add_option("--q-range", q_range, "Closed-loop gain range lo,hi");
  sweep->add_option("--tol", tol, "Bisection tolerance on q");
  sweep->add_option("--scan-steps", scan_steps, "Tracking steps across the q range");
  sweep->add_option("--out", out_path, "Output CSV (default stdout)");
  sweep->add_flag("--allow-inconsistent", allow_inconsistent, "Permit databases never aligned");

  // inverse
  std::string spec_path, truth;
  auto* inverse = app.add_subcommand("inverse", "Solve the reduced inverse problem");
  inverse->add_option("--in", in_path, "Database file")->required();
  inverse->add_option("--spec", spec_path, "Inverse problem spec (JSON)")->required();
  inverse->add_option("--truth", truth, "True parameters, to report the recovery error");

  // sample
  auto* sample = app.add_subcommand("sample", "Adaptive database construction");
  sample->add_option("--config", cfg_path, "Sampler config (JSON)")->required();
  sample->add_option("--out", out_path, "Output database file")->required();

  // serve
  std::vector<std::string> dbs;
  std::string host = "127.0.0.1", port_file;
  int port = 8080;
  auto* srv = app.add_subcommand("serve", "Serve databases over HTTP (read-only)");
  srv->add_option("--db", dbs, "id=path (repeatable)")->required();
  srv->add_option("--host", host, "Bind address");
  srv->add_option("--port", port, "Port (0 picks a free one)");
  srv->add_option("--port-file", port_file, "Write the bound port to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    throw Error(ErrorKind::Usage, e.what());
  }

  if (build->parsed()) {
    BuildConfig cfg = decode_build_config(read_json_file(cfg_path));
    if (!align_mode.empty()) {
      ConsistencyOptions o = cfg.align ? cfg.align->options : ConsistencyOptions{};
      try {
        o.mode = consistency_mode_from_string(align_mode);
      } catch (const Error& e) {
        usage(e.what(), "align");
      }
      cfg.align = o.mode == ConsistencyMode::None ? std::nullopt : std::optional<AlignConfig>(AlignConfig{o});
    }
    const RomDatabase db = run_build(cfg);
    save(db, out_path);
    std::cout << Json{{"out", out_path}, {"n_db", db.size()}, {"k", db.k},
                      {"consistency", json::encode(db.consistency)}}.dump()
              << '\n';
  } else if (align->parsed()) {
    const RomDatabase db = load(in_path);
    ConsistencyOptions o;
    try {
      o.mode = consistency_mode_from_string(mode);
    } catch (const Error& e) {
      usage(e.what(), "mode");
    }
    if (o.mode == ConsistencyMode::None) usage("alignment mode 'none' does nothing", "mode");
    o.reference_index = reference;
    o.theta_max = theta_max;
    o.truncate = truncate;
    o.fixed_point.s_margin = s_margin;
    o.fixed_point.max_iters = max_iters;
    o.fixed_point.restarts = restarts;
    try {
      o.fixed_point.init = init_kind_from_string(init);
      o.fixed_point.validate();
    } catch (const Error& e) {
      usage(e.what(), e.field());
    }
    const ConsistencyResult r = enforce_database_consistency(db, o);
    save(r.database, out_path);
    std::cout << alignment_report(db, r).dump() << '\n';
  } else if (part->parsed()) {
    const RomDatabase db = load(in_path);
    std::vector<std::vector<double>> bounds(db.n_mu());
    for (const auto& c : cuts) {
      const auto colon = c.find(':');
      if (colon == std::string::npos) usage("cut must be axis:value", "cut");
      const auto v = parse_list(c.substr(0, colon) + "," + c.substr(colon + 1), "cut");
      if (v[0] < 0 || v[0] != std::floor(v[0]) || static_cast<std::size_t>(v[0]) >= db.n_mu())
        usage("cut axis out of range", "cut");
      bounds[static_cast<std::size_t>(v[0])].push_back(v[1]);
    }
    for (auto& b : bounds) std::sort(b.begin(), b.end());
    const RomDatabase out = partition(db, bounds);
    save(out, out_path);
    std::cout << Json{{"out", out_path}, {"subdatabases", out.partition.size()}, {"n_db", out.size()}}.dump() << '\n';
  } else if (inspect->parsed()) {
    const RomDatabase db = load(in_path);
    const std::size_t expected = db.expected_entry_count();
    const std::size_t stored = db.stored_entry_count();
    Json sizes = Json::array();
    for (const auto& p : db.partition) sizes.push_back(p.size());
    Json dofs = Json::array();
    for (const auto& r : db.records) dofs.push_back(r.hdm_dof_count ? Json(*r.hdm_dof_count) : Json(nullptr));
    std::cout << Json{{"n_db", db.size()},
                      {"k", db.k},
                      {"kind", to_string(db.order)},
                      {"scalar_field", to_string(db.field)},
                      {"n_mu", db.n_mu()},
                      {"n_inputs", db.n_inputs},
                      {"n_outputs", db.n_outputs},
                      {"subdatabase_sizes", sizes},
                      {"hdm_dof_counts", dofs},
                      {"consistency", json::encode(db.consistency)},
                      {"entry_count", {{"expected", expected}, {"stored", stored}, {"check", expected == stored ? "PASS" : "FAIL"}}}}
                     .dump(2)
              << '\n';
  } else if (interp->parsed()) {
    const RomDatabase db = load(in_path);
    InterpolationOptions o;
    o.allow_inconsistent = allow_inconsistent;
    Diagnostics diag;
    const Rom rom = interpolate_rom(db, target_of(db, target), o, &diag);
    Json out{{"rom", json::encode(rom)}, {"warnings", diag.warnings}, {"consistency", json::encode(db.consistency)}};
    write_text(out_path, out.dump() + "\n");
  } else if (sweep->parsed()) {
    if (frequency == stability) usage("choose exactly one of --frequency and --stability");
    const RomDatabase db = load(in_path);
    const ParameterPoint p = target_of(db, target);
    InterpolationOptions o;
    o.allow_inconsistent = allow_inconsistent;
    if (frequency) {
      if (grid.empty()) usage("--frequency needs --grid", "grid");
      const auto g = parse_grid(grid);
      try {
        validate_grid(g);
      } catch (const Error& e) {
        usage(e.what(), "grid");
      }
      CVec u = CVec::Ones(db.n_inputs);
      if (!input.empty()) {
        const auto v = parse_list(input, "input");
        if (static_cast<Eigen::Index>(v.size()) != db.n_inputs) usage("input length differs from N_i", "input");
        for (std::size_t i = 0; i < v.size(); ++i) u(static_cast<Eigen::Index>(i)) = v[i];
      }
      const Rom rom = interpolate_rom(db, p, o);
      write_text(out_path, response_csv_header(db.n_mu()) + response_csv(p, frequency_response(rom, g, u)));
    } else {
      const auto qr = parse_list(q_range, "q_range");
      if (qr.size() != 2 || !(qr[1] > qr[0])) usage("q-range must be lo,hi with lo < hi", "q_range");
      if (axis >= db.n_mu()) usage("axis out of range", "axis");
      if (samples < 2) usage("stability sweep needs at least 2 samples", "samples");
      if (!(tol > 0.0)) usage("tol must be positive", "tol");
      CriticalOptions c{qr[0], qr[1], tol, scan_steps};
      write_text(out_path, stability_csv(stability_curve(db, p, axis, samples, c, o), db.n_mu()));
    }
  } else if (inverse->parsed()) {
    const RomDatabase db = load(in_path);
    const InverseProblemSpec s = decode_inverse(read_json_file(spec_path), db.domain.box);
    try {
      s.validate(db.n_outputs);
    } catch (const Error& e) {
      usage(e.what(), e.field());
    }
    const InverseResult r = solve_inverse(db, s);
    Json out{{"mu", r.mu.coords()},
             {"objective", r.objective},
             {"calls", r.calls},
             {"rejected", r.rejected},
             {"trace", r.trace},
             {"warnings", r.diagnostics.warnings}};
    if (!truth.empty()) {
      const ParameterPoint t(parse_list(truth, "truth"));
      if (t.dim() != db.n_mu()) usage("truth needs one value per axis", "truth");
      out["recovery_error"] = recovery_error(r.mu, t, s.domain);
    }
    std::cout << out.dump() << '\n';
  } else if (sample->parsed()) {
    const SampleConfig cfg = decode_sample_config(read_json_file(cfg_path));
    const SamplerProblem problem = make_sampler_problem(cfg);
    const SamplerResult r = adaptive_sample(problem, cfg.sampler);
    save(r.database, out_path);
    Json log = Json::array();
    for (const auto& it : r.log) {
      double worst = 0.0;
      for (const auto& c : it.cells) worst = std::max(worst, c.error);
      log.push_back({{"iteration", it.iteration}, {"n_db", it.database_size}, {"cells", it.cells.size()},
                     {"max_error", worst}, {"splits", it.splits}});
    }
    Json out{{"out", out_path}, {"converged", r.converged}, {"n_db", r.database.size()}, {"log", log},
             {"failing_cells", r.failing.size()}};
    if (!cfg.validation_axes.empty()) {
      double worst = 0.0;
      std::size_t n = 0;
      for (const auto& p : lattice_points(cfg.validation_axes)) {
        worst = std::max(worst, sampler_error(r.database, problem, cfg.sampler.metric, p));
        ++n;
      }
      out["validation"] = {{"points", n}, {"max_error", worst}};
    }
    std::cout << out.dump() << '\n';
  } else if (srv->parsed()) {
    DatabaseSet set;
    for (const auto& d : dbs) {
      const auto eq = d.find('=');
      if (eq == std::string::npos || eq == 0) usage("--db expects id=path", "db");
      set.add(d.substr(0, eq), load(d.substr(eq + 1)));
    }
    serve(set, host, port, [&](int bound) {
      if (!port_file.empty()) {
        std::ofstream pf(port_file);
        pf << bound << '\n';
      }
      std::cerr << Json{{"listening", host + ":" + std::to_string(bound)}}.dump() << std::endl;
    });
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const romdb::Error& e) {
    std::cerr << romdb::error_body(e).dump() << '\n';
    return romdb::is_usage_kind(e.kind()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "load-error"}, {"message", e.what()}, {"field", nullptr}}.dump() << '\n';
    return 1;
  }
}
