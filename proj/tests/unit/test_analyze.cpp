#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

#include "support/fixtures.hpp"

using namespace romdb;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected romdb::Error");
  return ErrorKind::Usage;
}

DenseMatrix scalar(double v) { return DenseMatrix(Mat::Constant(1, 1, v)); }

Rom scalar_first(double e, double a, double b = 1.0, double g = 1.0, double h = 0.0) {
  return Rom::first_order(scalar(e), scalar(a), scalar(b), scalar(g), scalar(h));
}

Rom scalar_second(double m, double c, double k) {
  return Rom::second_order(scalar(m), scalar(c), scalar(k), scalar(1.0), scalar(1.0), scalar(0.0));
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("scalar transfer functions", "[analyze]") {
  const std::vector<double> grid{0.0, 0.5, 2.0};
  const FrequencyResponse f = frequency_response(scalar_first(1.0, -2.0, 1.0, 1.0, 0.5), grid, CVec::Ones(1));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const cplx expect = 1.0 / (cplx(0, grid[i]) + 2.0) + 0.5;
    CHECK(std::abs(f.outputs(0, static_cast<Eigen::Index>(i)) - expect) <= 1e-15);
  }
  const FrequencyResponse s = frequency_response(scalar_second(2.0, 0.3, 5.0), grid, CVec::Ones(1));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w = grid[i];
    const cplx expect = 1.0 / (5.0 + cplx(0, w) * 0.3 - w * w * 2.0);
    CHECK(std::abs(s.outputs(0, static_cast<Eigen::Index>(i)) - expect) <= 1e-15);
  }
}

TEST_CASE("singular frequencies are flagged rather than thrown", "[analyze]") {
  const FrequencyResponse f = frequency_response(scalar_second(1.0, 0.0, 4.0), {1.0, 2.0, 3.0}, CVec::Ones(1));
  CHECK(f.valid[0]);
  CHECK_FALSE(f.valid[1]);
  CHECK(std::isnan(f.outputs(0, 1).real()));
  const std::string csv = response_csv(ParameterPoint{0.5}, f);
  CHECK(csv.find("0.5,2,0,nan,nan,nan") != std::string::npos);
  CHECK(count_lines(csv) == 3);
  CHECK(response_csv_header(2) == "mu0,mu1,x,output,re,im,db\n");
  CHECK(kind_of([] { validate_grid({1.0, 1.0}); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { validate_grid({}); }) == ErrorKind::InvalidInput);
}

TEST_CASE("dB transform", "[analyze]") {
  CHECK_THAT(db_value(cplx(1.0, 0.0)), WithinAbs(10.0 * std::log10(2.0 * std::numbers::pi), 1e-14));
  CHECK_THAT(db_value(cplx(0.0, 10.0)) - db_value(cplx(1.0, 0.0)), WithinAbs(20.0, 1e-12));
  CHECK(std::isfinite(db_value(cplx(0.0, 0.0))));
  CHECK_THAT(db_value(cplx(0.0, 0.0)), WithinAbs(10.0 * std::log10(2.0 * std::numbers::pi) - 6000.0, 1e-9));
}

TEST_CASE("eigen analysis of first- and second-order ROMs", "[analyze]") {
  Mat a(2, 2);
  a << -1.0, 2.0, -2.0, -1.0;
  const Rom r = Rom::first_order(DenseMatrix(Mat(Mat::Identity(2, 2))), DenseMatrix(a), DenseMatrix(Mat(Mat::Ones(2, 1))),
                                 DenseMatrix(Mat(Mat::Ones(1, 2))), scalar(0.0));
  const EigenAnalysis e = eigen_analysis(r);
  for (Eigen::Index i = 0; i < 2; ++i) {
    CHECK_THAT(e.values(i).real(), WithinAbs(-1.0, 1e-12));
    CHECK_THAT(std::abs(e.values(i).imag()), WithinAbs(2.0, 1e-12));
    CHECK_THAT(e.damping_ratios(i), WithinAbs(1.0 / std::sqrt(5.0), 1e-12));
    CHECK_THAT(e.frequencies(i), WithinAbs(2.0, 1e-12));
  }
  // m l^2 + c l + k = 0
  const EigenAnalysis s = eigen_analysis(scalar_second(2.0, 1.0, 3.0));
  for (Eigen::Index i = 0; i < 2; ++i) {
    const cplx l = s.values(i);
    CHECK(std::abs(2.0 * l * l + l + 3.0) <= 1e-12);
  }
  CHECK(kind_of([] { (void)eigen_analysis(scalar_first(0.0, 1.0)); }) == ErrorKind::SingularPencil);
}

TEST_CASE("closed loop shifts by q B G", "[analyze]") {
  const Rom r = fx::random_rom(RomOrder::First, ScalarField::Real, 3, 5, 2, 2);
  const Rom c = closed_loop(r, 0.7);
  const Mat expect = r.slot(Slot::A).re() + 0.7 * r.slot(Slot::B).re() * r.slot(Slot::G).re();
  CHECK((c.slot(Slot::A).re() - expect).norm() <= 1e-14);
  const Rom r2 = fx::random_rom(RomOrder::Second, ScalarField::Real, 3, 5, 2, 2);
  const Mat k2 = r2.slot(Slot::K).re() - 0.7 * r2.slot(Slot::B).re() * r2.slot(Slot::G).re();
  CHECK((closed_loop(r2, 0.7).slot(Slot::K).re() - k2).norm() <= 1e-14);
  CHECK_THROWS_AS(closed_loop(fx::random_rom(RomOrder::First, ScalarField::Real, 3, 5, 1, 2), 1.0), Error);
}

TEST_CASE("critical parameter of the two-mode family", "[analyze]") {
  CriticalOptions o;
  o.q_hi = 3.0;
  o.tol = 1e-10;
  for (double s : {0.0, 0.2, 0.45, 0.55, 0.8, 1.0}) {
    const CriticalResult r = critical_parameter([s](double q) { return closed_loop(two_mode_family(s), q); }, o);
    CHECK_THAT(r.q_crit, WithinAbs(std::min(1.0 + s, 2.0 - s), 1e-8));
    CHECK(r.mode_index == (s < 0.5 ? 0u : 1u));
    CHECK_THAT(r.eigenvalue.real(), WithinAbs(0.0, 1e-7));
  }
  o.q_hi = 0.5;
  CHECK(kind_of([&] { (void)critical_parameter([](double q) { return closed_loop(two_mode_family(0.3), q); }, o); }) ==
        ErrorKind::NoCrossing);
}

TEST_CASE("trapezoidal first-order time stepping", "[analyze]") {
  const double a = 1.5, dt = 0.05;
  const int steps = 40;
  Mat u = Mat::Ones(1, steps + 1);
  for (int i = 0; i <= steps; ++i) u(0, i) = std::sin(0.3 * i);
  TimeOptions o;
  o.dt = dt;
  o.q0 = Vec::Constant(1, 0.2);
  const Mat y = time_response(scalar_first(1.0, -a), u, o);
  double x = 0.2;
  CHECK_THAT(y(0, 0), WithinAbs(x, 1e-15));
  for (int n = 0; n < steps; ++n) {
    x = ((1.0 - a * dt / 2) * x + dt / 2 * (u(0, n) + u(0, n + 1))) / (1.0 + a * dt / 2);
    CHECK_THAT(y(0, n + 1), WithinAbs(x, 1e-13));
  }
}

TEST_CASE("Newmark average acceleration equals the trapezoidal rule on the state form", "[analyze]") {
  const double m = 2.0, c = 0.4, k = 7.0, dt = 0.02;
  const int steps = 100;
  Mat u = Mat::Zero(1, steps + 1);
  for (int i = 0; i <= steps; ++i) u(0, i) = std::cos(0.05 * i);
  TimeOptions o;
  o.dt = dt;
  o.q0 = Vec::Constant(1, 1.0);
  o.v0 = Vec::Constant(1, -0.5);
  const Mat y = time_response(scalar_second(m, c, k), u, o);

  Mat A(2, 2);
  A << 0.0, 1.0, -k / m, -c / m;
  const Vec b = (Vec(2) << 0.0, 1.0 / m).finished();
  const Mat I = Mat::Identity(2, 2);
  const Mat lhs = I - dt / 2 * A, rhs = I + dt / 2 * A;
  Vec z = (Vec(2) << 1.0, -0.5).finished();
  for (int n = 0; n < steps; ++n) {
    z = lhs.fullPivLu().solve(rhs * z + dt / 2 * b * (u(0, n) + u(0, n + 1)));
    CHECK_THAT(y(0, n + 1), WithinAbs(z(0), 1e-11));
  }
  CHECK(kind_of([&] { (void)time_response(fx::random_rom(RomOrder::First, ScalarField::Complex, 2, 1, 1, 1), u, o); }) ==
        ErrorKind::InvalidInput);
}

TEST_CASE("inverse objective and recovery error", "[analyze]") {
  InverseProblemSpec spec;
  spec.wavenumbers = {1.0, 2.0};
  spec.measured = {Vec::Constant(2, 1.0), Vec::Constant(2, -1.0)};
  spec.alpha = {1.0, 0.5};
  spec.beta = 2.0;
  const std::vector<Vec> pred{Vec::Constant(2, 2.0), Vec::Constant(2, -1.0)};
  CHECK_THAT(inverse_objective(pred, ParameterPoint{3.0}, spec), WithinAbs(2.0 + 9.0, 1e-14));
  CHECK(inverse_objective(spec.measured, ParameterPoint{0.0}, spec) == 0.0);

  const Box dom{{0.0, 10.0}, {2.0, 20.0}};
  CHECK_THAT(recovery_error(ParameterPoint{1.0, 12.0}, ParameterPoint{1.5, 11.0}, dom), WithinAbs(0.25, 1e-15));
  CHECK(recovery_error(ParameterPoint{1.0, 12.0}, ParameterPoint{1.0, 12.0}, dom) == 0.0);
}

TEST_CASE("reduced inverse problem recovers the parameter on an exact database", "[analyze]") {
  // A(mu) = -(1 + mu) varies affinely, so flat interpolation is exact.
  std::vector<RomRecord> recs;
  for (double x : {0.0, 0.5, 1.0, 1.5, 2.0})
    recs.push_back(RomRecord{ParameterPoint{x}, scalar_first(1.0, -(1.0 + x)), std::nullopt, std::nullopt});
  RomDatabase db = RomDatabase::create(ParameterDomain::from_bounds({0.0}, {2.0}), std::move(recs));
  db.consistency.mode = ConsistencyMode::FixedPointG;

  const double truth = 1.234;
  InverseProblemSpec spec;
  spec.wavenumbers = {0.5, 1.0, 3.0};
  spec.measured = db_outputs(scalar_first(1.0, -(1.0 + truth)), spec.wavenumbers, CVec::Ones(1));
  spec.domain = db.domain.box;
  const InverseResult r = solve_inverse(db, spec);
  CHECK(recovery_error(r.mu, ParameterPoint{truth}, spec.domain) <= 1e-4);
  CHECK(r.objective <= 1e-6);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);
  CHECK(r.calls > 0);

  InverseProblemSpec bad = spec;
  bad.measured.pop_back();
  CHECK(kind_of([&] { (void)solve_inverse(db, bad); }) == ErrorKind::InvalidSpec);
}

TEST_CASE("stability curve across the mode switch", "[analyze]") {
  std::vector<RomRecord> recs;
  for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) recs.push_back(RomRecord{ParameterPoint{s}, two_mode_family(s), std::nullopt, std::nullopt});
  RomDatabase db = RomDatabase::create(ParameterDomain::from_bounds({0.0}, {1.0}), std::move(recs));
  db.consistency.mode = ConsistencyMode::FixedPointG;
  CriticalOptions o;
  o.q_hi = 3.0;
  o.tol = 1e-10;
  const auto curve = stability_curve(db, ParameterPoint{0.0}, 0, 11, o);
  REQUIRE(curve.size() == 11);
  for (const auto& c : curve) {
    REQUIRE(c.ok);
    CHECK_THAT(c.result.q_crit, WithinAbs(std::min(1.0 + c.x, 2.0 - c.x), 1e-8));
  }
  const std::string csv = stability_csv(curve, 1);
  CHECK(csv.rfind("mu0,x,q_crit,mode,ambiguous,status\n", 0) == 0);
  CHECK(count_lines(csv) == 12);
}

TEST_CASE("sampler configuration validation", "[analyze]") {
  SamplerConfig c;
  c.initial_lattice = {2, 2};
  CHECK_NOTHROW(c.validate(2));
  CHECK(kind_of([&] { c.validate(1); }) == ErrorKind::InvalidSpec);
  c.initial_lattice = {1, 2};
  CHECK(kind_of([&] { c.validate(2); }) == ErrorKind::InvalidSpec);
  c.initial_lattice = {2, 2};
  c.tolerance = 0.0;
  CHECK(kind_of([&] { c.validate(2); }) == ErrorKind::InvalidSpec);
}

TEST_CASE("adaptive sampler refines until the output error meets the tolerance", "[analyze]") {
  // Quadratic dependence on mu makes multilinear interpolation inexact away from nodes.
  auto rom_at = [](const ParameterPoint& p) { return scalar_first(1.0, -(1.0 + 4.0 * p[0] * p[0] + p[1])); };
  SamplerProblem prob;
  prob.domain = Box{{0.0, 0.0}, {1.0, 1.0}};
  prob.build = [&](const ParameterPoint& p) { return RomRecord{p, rom_at(p), std::nullopt, std::nullopt}; };
  prob.inverse.wavenumbers = {0.5, 2.0};
  prob.truth = [&](const ParameterPoint& p) { return db_outputs(rom_at(p), prob.inverse.wavenumbers, CVec::Ones(1)); };
  prob.finalize = [](RomDatabase db) {
    db.consistency.mode = ConsistencyMode::FixedPointG;
    return db;
  };
  SamplerConfig cfg;
  cfg.metric = SamplerMetric::OutputError;
  cfg.tolerance = 0.002;
  cfg.initial_lattice = {2, 2};
  cfg.max_refinements = 6;
  const SamplerResult r = adaptive_sample(prob, cfg);
  REQUIRE(r.converged);
  CHECK(r.log.size() >= 2);
  CHECK(r.log.front().database_size == 4);
  for (std::size_t i = 1; i < r.log.size(); ++i) CHECK(r.log[i].database_size > r.log[i - 1].database_size);
  for (const auto& cell : r.log.back().cells) CHECK(cell.error <= cfg.tolerance);
  CHECK(r.failing.empty());
}
