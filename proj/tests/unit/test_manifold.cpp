#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "romdb/manifold.hpp"
#include "support/fixtures.hpp"

using namespace romdb;
using Catch::Matchers::WithinAbs;

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

// Natural cubic spline of data y on nodes x, second derivatives from a dense solve.
double oracle_spline(const std::vector<double>& x, const Vec& y, double t) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Mat a = Mat::Zero(n, n);
  Vec r = Vec::Zero(n);
  a(0, 0) = a(n - 1, n - 1) = 1.0;
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
    a(i, i - 1) = h0 / 6.0;
    a(i, i) = (h0 + h1) / 3.0;
    a(i, i + 1) = h1 / 6.0;
    r(i) = (y(i + 1) - y(i)) / h1 - (y(i) - y(i - 1)) / h0;
  }
  const Vec m = a.fullPivLu().solve(r);
  Eigen::Index j = 0;
  while (j + 2 < n && t > x[j + 1]) ++j;
  const double h = x[j + 1] - x[j];
  const double A = (x[j + 1] - t) / h, B = (t - x[j]) / h;
  return A * y(j) + B * y(j + 1) + ((A * A * A - A) * m(j) + (B * B * B - B) * m(j + 1)) * h * h / 6.0;
}

// Geometric mean S0^{1/2} (S0^{-1/2} S1 S0^{-1/2})^{1/2} S0^{1/2} via eigen-decompositions.
Mat geometric_mean(const Mat& s0, const Mat& s1) {
  Eigen::SelfAdjointEigenSolver<Mat> e0(s0);
  const Mat h = e0.operatorSqrt();
  const Mat hi = e0.operatorInverseSqrt();
  Eigen::SelfAdjointEigenSolver<Mat> e1(hi * s1 * hi);
  return h * e1.operatorSqrt() * h;
}

std::vector<double> sorted_nodes(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> gap(0.2, 1.5);
  std::vector<double> x{0.0};
  for (int i = 1; i < n; ++i) x.push_back(x.back() + gap(rng));
  return x;
}

bool is_spd(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
  return (m - m.transpose()).norm() <= 1e-12 * m.norm() && es.eigenvalues().minCoeff() > 0.0;
}

}  // namespace

TEST_CASE("linear weights", "[manifold]") {
  const std::vector<double> x{0.0, 1.0, 3.0};
  CHECK((linear_weights(x, 1.0) - Vec::Unit(3, 1)).norm() == 0.0);
  const Vec w = linear_weights(x, 2.0);
  CHECK_THAT(w(1), WithinAbs(0.5, 1e-15));
  CHECK_THAT(w(2), WithinAbs(0.5, 1e-15));
  CHECK(w(0) == 0.0);
}

TEST_CASE("natural spline weights match an independent spline", "[manifold][property]") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 40; ++trial) {
    const auto x = sorted_nodes(rng, 3 + trial % 6);
    const auto n = static_cast<Eigen::Index>(x.size());
    Vec y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = nd(rng);
    std::uniform_real_distribution<double> pick(x.front(), x.back());
    for (int s = 0; s < 10; ++s) {
      const double t = pick(rng);
      const Vec w = natural_spline_weights(x, t);
      CHECK_THAT(w.dot(y), WithinAbs(oracle_spline(x, y, t), 1e-11));
      CHECK_THAT(w.sum(), WithinAbs(1.0, 1e-12));
      // Affine data is reproduced exactly.
      double lin = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) lin += w(i) * (2.0 - 3.0 * x[static_cast<std::size_t>(i)]);
      CHECK_THAT(lin, WithinAbs(2.0 - 3.0 * t, 1e-11));
    }
    for (Eigen::Index i = 0; i < n; ++i)
      CHECK((natural_spline_weights(x, x[static_cast<std::size_t>(i)]) - Vec::Unit(n, i)).norm() <= 1e-13);
  }
}

TEST_CASE("lattice scheme weights reproduce bilinear data", "[manifold][property]") {
  const auto pts = lattice_points({{0.0, 1.0, 2.5}, {-1.0, 0.5}});
  SchemeSpec s;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u0(0.0, 2.5), u1(-1.0, 0.5);
  for (int trial = 0; trial < 50; ++trial) {
    const ParameterPoint t{u0(rng), u1(rng)};
    const Vec w = scheme_weights(pts, t, s);
    CHECK_THAT(w.sum(), WithinAbs(1.0, 1e-14));
    double f = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      f += w(static_cast<Eigen::Index>(i)) * (1.0 + 2.0 * pts[i][0] - pts[i][1] + 0.5 * pts[i][0] * pts[i][1]);
    CHECK_THAT(f, WithinAbs(1.0 + 2.0 * t[0] - t[1] + 0.5 * t[0] * t[1], 1e-13));
    CHECK(w.minCoeff() >= 0.0);
  }
  CHECK(kind_of([&] { (void)scheme_weights(pts, ParameterPoint{3.0, 0.0}, s); }) == ErrorKind::Extrapolation);
  s.allow_extrapolation = true;
  Diagnostics diag;
  (void)scheme_weights(pts, ParameterPoint{3.0, 0.0}, s, std::nullopt, &diag);
  CHECK_FALSE(diag.empty());

  std::vector<ParameterPoint> ragged = pts;
  ragged.pop_back();
  CHECK(kind_of([&] { (void)scheme_weights(ragged, ParameterPoint{0.5, 0.0}, SchemeSpec{}); }) ==
        ErrorKind::InvalidSpec);
}

TEST_CASE("rbf weights reproduce nodes and affine data", "[manifold][property]") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ParameterPoint> pts;
  for (int i = 0; i < 12; ++i) pts.push_back(ParameterPoint{u(rng), u(rng)});
  SchemeSpec s;
  s.kind = SchemeKind::Rbf;
  for (std::size_t i = 0; i < pts.size(); ++i)
    CHECK((scheme_weights(pts, pts[i], s) - Vec::Unit(12, static_cast<Eigen::Index>(i))).norm() == 0.0);
  for (int trial = 0; trial < 20; ++trial) {
    const ParameterPoint t{0.25 + 0.5 * u(rng), 0.25 + 0.5 * u(rng)};
    const Vec w = scheme_weights(pts, t, s, Box{{0.0, 0.0}, {1.0, 1.0}});
    double f = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) f += w(static_cast<Eigen::Index>(i)) * (3.0 - pts[i][0] + 2.0 * pts[i][1]);
    CHECK_THAT(f, WithinAbs(3.0 - t[0] + 2.0 * t[1], 1e-10));
  }
  const std::vector<ParameterPoint> two{ParameterPoint{0.0, 0.0}, ParameterPoint{1.0, 1.0}};
  CHECK(kind_of([&] { (void)scheme_weights(two, ParameterPoint{0.5, 0.5}, s); }) == ErrorKind::InsufficientCoverage);
}

TEST_CASE("Cholesky and tangent midpoints of scalar multiples of the identity", "[manifold]") {
  const std::vector<Mat> e{Mat::Identity(2, 2), 4.0 * Mat::Identity(2, 2)};
  const Vec w = Vec::Constant(2, 0.5);
  const Mat chol = cholesky_interpolate_weighted(e, w);
  CHECK((chol - 2.25 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);
  const Mat tan = interpolate_weighted(e, w, ManifoldSpec::spd_tangent(), 0);
  CHECK((tan - 2.0 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((interpolate_weighted(e, w, ManifoldSpec::full(), 0) - 2.5 * Mat::Identity(2, 2)).norm() <= 1e-15);
}

TEST_CASE("SPD tangent midpoint is the geometric mean from either base point", "[manifold][property]") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<Mat> e{fx::random_spd(4, rng, 0.3), fx::random_spd(4, rng, 0.3)};
    const Mat oracle = geometric_mean(e[0], e[1]);
    const Vec w = Vec::Constant(2, 0.5);
    for (std::size_t ref : {0u, 1u})
      CHECK((interpolate_weighted(e, w, ManifoldSpec::spd_tangent(), ref) - oracle).norm() <= 1e-10 * oracle.norm());
  }
}

TEST_CASE("manifold interpolation preserves membership at random targets", "[manifold][property]") {
  std::mt19937_64 rng(99);
  const std::vector<double> nodes{0.0, 0.4, 1.0, 1.7};
  std::vector<ParameterPoint> pts;
  for (double x : nodes) pts.push_back(ParameterPoint{x});
  std::vector<Mat> spd, symm, nonsing;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    spd.push_back(fx::random_spd(5, rng, 0.05));
    const Mat r = fx::random_mat(5, 5, rng);
    symm.push_back(r + r.transpose());
    nonsing.push_back(Mat::Identity(5, 5) + 0.2 * fx::random_mat(5, 5, rng));
  }
  SchemeSpec spline;
  spline.kind = SchemeKind::TensorCubicSpline;
  std::uniform_real_distribution<double> u(0.0, 1.7);
  for (int trial = 0; trial < 100; ++trial) {
    const ParameterPoint t{u(rng)};
    const SchemeSpec& s = trial % 2 ? spline : SchemeSpec{};
    CHECK(is_spd(interpolate_slot(spd, pts, t, ManifoldSpec::spd_tangent(), s)));
    CHECK(is_spd(interpolate_slot(spd, pts, t, ManifoldSpec::spd_cholesky(), s)));
    const Mat sy = interpolate_slot(symm, pts, t, ManifoldSpec::symmetric(), s);
    CHECK(sy == sy.transpose());
    const Mat ns = interpolate_slot(nonsing, pts, t, ManifoldSpec::nonsingular(), s);
    CHECK(std::abs(ns.determinant()) > 0.0);
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK((interpolate_slot(spd, pts, pts[i], ManifoldSpec::spd_tangent(), spline) - spd[i]).norm() <=
          1e-12 * spd[i].norm());
    CHECK((interpolate_slot(nonsing, pts, pts[i], ManifoldSpec::nonsingular(), spline) - nonsing[i]).norm() <=
          1e-12 * nonsing[i].norm());
  }
}

TEST_CASE("membership violations name the offending entry", "[manifold]") {
  Mat bad(2, 2);
  bad << 1, 2, 2, 1;
  const std::vector<Mat> e{Mat::Identity(2, 2), bad};
  try {
    (void)interpolate_weighted(e, Vec::Constant(2, 0.5), ManifoldSpec::spd_tangent(), 0);
    FAIL("indefinite entry accepted");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::ManifoldViolation);
    REQUIRE(err.detail().has_value());
    CHECK(*err.detail() == 1.0);
  }
  Mat asym = Mat::Identity(2, 2);
  asym(0, 1) = 1.0;
  CHECK(kind_of([&] {
          (void)interpolate_weighted({Mat::Identity(2, 2), asym}, Vec::Constant(2, 0.5), ManifoldSpec::symmetric(), 0);
        }) == ErrorKind::ManifoldViolation);
  CHECK(kind_of([&] {
          (void)cholesky_interpolate_weighted({Mat::Identity(2, 2), Mat::Identity(2, 2)}, Vec(Vec::Zero(2)));
        }) == ErrorKind::DegenerateFactor);
  CHECK_THROWS_AS((ManifoldSpec{ManifoldKind::Full, MapMethod::Cholesky, std::nullopt}.validate()), Error);
}

TEST_CASE("heuristic prefers the manifold on which the data is affine", "[manifold]") {
  std::vector<ParameterPoint> pts;
  std::vector<Mat> flat, logflat;
  Mat a(2, 2), l(2, 2);
  a << 2.0, 0.3, 0.3, 1.0;
  l << 0.5, 0.2, 0.2, -0.4;
  for (int i = 0; i < 6; ++i) {
    const double x = 0.2 * i;
    pts.push_back(ParameterPoint{x});
    flat.push_back(a + x * Mat::Identity(2, 2));
    logflat.push_back(mat_exp_sym(3.0 * x * l));
  }
  const std::vector<ManifoldSpec> cands{ManifoldSpec::full(), ManifoldSpec::spd_tangent()};
  const ManifoldChoice c1 = manifold_choice_heuristic(flat, pts, cands, SchemeSpec{});
  CHECK(c1.choice == ManifoldSpec::full());
  const ManifoldChoice c2 = manifold_choice_heuristic(logflat, pts, cands, SchemeSpec{});
  CHECK(c2.choice == ManifoldSpec::spd_tangent());

  std::vector<Mat> indefinite = flat;
  indefinite[2](0, 0) = -5.0;
  const ManifoldChoice c3 = manifold_choice_heuristic(indefinite, pts, cands, SchemeSpec{});
  CHECK(std::isinf(c3.indicators[1]));
  CHECK(c3.index == 0);
}

TEST_CASE("interpolate_rom on a database linear in the parameter", "[manifold]") {
  const Rom r0 = fx::random_rom(RomOrder::First, ScalarField::Complex, 3, 1);
  const Rom r1 = fx::random_rom(RomOrder::First, ScalarField::Complex, 3, 2);
  auto at = [&](double x) {
    std::vector<DenseMatrix> s;
    for (std::size_t i = 0; i < r0.slots().size(); ++i)
      s.emplace_back(Mat(r0.slots()[i].re() + x * r1.slots()[i].re()), Mat(r0.slots()[i].im() + x * r1.slots()[i].im()));
    return Rom::from_slots(RomOrder::First, std::move(s));
  };
  std::vector<RomRecord> recs;
  for (double x : {0.0, 0.5, 1.0}) recs.push_back(RomRecord{ParameterPoint{x}, at(x), std::nullopt, std::nullopt});
  RomDatabase db = RomDatabase::create(ParameterDomain::from_bounds({0.0}, {1.0}), std::move(recs));

  CHECK(kind_of([&] { (void)interpolate_rom(db, ParameterPoint{0.3}); }) == ErrorKind::Usage);
  db.consistency.mode = ConsistencyMode::FixedPointPG;
  db.consistency.reference_index = 1;
  const Rom mid = interpolate_rom(db, ParameterPoint{0.3});
  const Rom expect = at(0.3);
  for (std::size_t i = 0; i < mid.slots().size(); ++i) {
    CHECK((mid.slots()[i].re() - expect.slots()[i].re()).norm() <= 1e-14);
    CHECK((mid.slots()[i].im() - expect.slots()[i].im()).norm() <= 1e-14);
  }
  CHECK(interpolate_rom(db, ParameterPoint{0.5}) == db.records[1].rom);
  CHECK(kind_of([&] { (void)interpolate_rom(db, ParameterPoint{1.5}); }) == ErrorKind::OutOfDomain);

  InterpolationOptions o;
  o.plan = OperatorSlotPlan::all_full(RomOrder::Second, ScalarField::Complex);
  CHECK(kind_of([&] { (void)interpolate_rom(db, ParameterPoint{0.3}, o); }) == ErrorKind::InvalidSpec);
}
