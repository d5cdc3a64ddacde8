#include <catch_amalgamated.hpp>

#include <cmath>

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

CMat dense(const SpMat& s) { return CMat(s); }

ChainSpec small_chain(double base = 40.0) {
  ChainSpec c;
  c.dofs.base = base;
  c.stiffness_law = AffineLaw{1.0, {0.5}};
  c.loss_factor = 0.02;
  c.mass_loss = 0.01;
  c.output_locations = {0.5, 1.0};
  return c;
}

// Full solve of (K + j w C - w^2 M) x = B u.
CVec hdm_state(const HdmSystem& h, double w) {
  const CMat z = dense(h.K) + cplx(0, w) * dense(h.C) - w * w * dense(h.M);
  return z.fullPivLu().solve(h.B * CVec::Ones(h.n_inputs()));
}

}  // namespace

TEST_CASE("dof law uses the table before the affine law", "[synth]") {
  DofLaw law;
  law.base = 100.0;
  law.law = AffineLaw{1.0, {0.5}};
  law.table.emplace_back(std::vector<double>{0.2}, 77u);
  CHECK(law(ParameterPoint{0.2}) == 77u);
  CHECK(law(ParameterPoint{1.0}) == 150u);
  CHECK(law(ParameterPoint{0.02}) == 101u);
}

TEST_CASE("chain operators are symmetric with loss factors on the imaginary parts", "[synth]") {
  const ChainSpec spec = small_chain();
  const HdmSystem h = make_msd_chain(ParameterPoint{0.3}, spec);
  CHECK(h.n() == 40);
  CHECK(h.n_outputs() == 2);
  CHECK_NOTHROW(h.validate());
  const CMat K = dense(h.K), M = dense(h.M);
  CHECK((K - K.transpose()).norm() == 0.0);
  CHECK((M - M.transpose()).norm() == 0.0);
  CHECK((K.imag() - spec.loss_factor * K.real()).norm() <= 1e-12 * K.norm());
  CHECK((M.imag() - spec.mass_loss * M.real()).norm() <= 1e-12 * M.norm());
  Eigen::SelfAdjointEigenSolver<Mat> ek(K.real());
  Eigen::SelfAdjointEigenSolver<Mat> em(M.real());
  CHECK(ek.eigenvalues().minCoeff() > 0.0);
  CHECK(em.eigenvalues().minCoeff() > 0.0);
  CHECK_FALSE(h.is_real());
  CHECK(h.real_part().is_real());

  // Stiffness scales with the affine law.
  const HdmSystem h1 = make_msd_chain(ParameterPoint{1.0}, spec);
  CHECK((dense(h1.K).real() - (1.5 / 1.15) * K.real()).norm() <= 1e-12 * K.norm());
}

TEST_CASE("modal basis matches a dense generalized eigensolver", "[synth]") {
  const HdmSystem h = make_msd_chain(ParameterPoint{0.0}, small_chain());
  const RobPair b = modal_rob(h, 5);
  const Mat K = dense(h.K).real(), M = dense(h.M).real();
  const Mat V = b.V.re();
  CHECK((V.transpose() * M * V - Mat::Identity(5, 5)).norm() <= 1e-10);
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> ges(K, M);
  const Mat kr = V.transpose() * K * V;
  for (Eigen::Index i = 0; i < 5; ++i) CHECK_THAT(kr(i, i), WithinRel(ges.eigenvalues()(i), 1e-9));
  CHECK((kr - Mat(kr.diagonal().asDiagonal())).norm() <= 1e-9 * kr.norm());
  CHECK(b.V == b.W);
}

TEST_CASE("POD basis spans the dominant snapshot directions", "[synth]") {
  const HdmSystem h = make_msd_chain(ParameterPoint{0.5}, small_chain());
  const CMat snaps = frequency_snapshots(h, 3, 0.1, 2.0);
  CHECK(snaps.cols() == 6);
  const RobPair b = pod_rob(h, snaps, 3);
  const Mat V = b.V.re();
  CHECK(orthogonality_defect(V) <= 1e-10);
  // Oracle: leading eigenvectors of S S^T with S = [Re, Im].
  Mat S(snaps.rows(), 12);
  S << snaps.real(), snaps.imag();
  Eigen::SelfAdjointEigenSolver<Mat> es(S * S.transpose());
  const Mat U = es.eigenvectors().rightCols(3);
  CHECK((V * V.transpose() - U * U.transpose()).norm() <= 1e-6);

  CHECK(kind_of([&] { (void)pod_rob(h, snaps, 13); }) == ErrorKind::RankDeficiency);
  try {
    (void)pod_rob(h, snaps, 12);
    FAIL("rank-deficient request accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RankDeficiency);
    REQUIRE(e.detail().has_value());
    CHECK(*e.detail() < 12.0);
  }
}

TEST_CASE("DGP basis contains the solution and its wavenumber derivative", "[synth]") {
  const HdmSystem h = make_msd_chain(ParameterPoint{0.2}, small_chain(60.0));
  DgpOptions o;
  o.wavenumbers = {0.7, 1.3};
  o.derivatives = 2;
  const RobPair b = dgp_rob(h, o);
  CHECK_NOTHROW(b.validate());
  const CMat V = b.V.to_complex();
  auto residual = [&](const CVec& x) { return (x - V * (V.adjoint() * x)).norm() / x.norm(); };
  for (double w : o.wavenumbers) {
    CHECK(residual(hdm_state(h, w)) <= 1e-8);
    const double d = 1e-5;
    const CVec dx = (hdm_state(h, w + d) - hdm_state(h, w - d)) / (2 * d);
    CHECK(residual(dx) <= 1e-5);
  }
}

TEST_CASE("projected ROMs interpolate the full response at the DGP wavenumbers", "[synth]") {
  const HdmSystem h = make_msd_chain(ParameterPoint{0.2}, small_chain(60.0));
  DgpOptions o;
  o.wavenumbers = {0.5, 0.9, 1.6};
  o.derivatives = 1;
  const RobPair b = dgp_rob(h, o);
  const Rom r = project(h, b);
  CHECK(r.order() == RomOrder::Second);
  CHECK(r.k() == b.k());
  const CVec u = CVec::Ones(1);
  const CMat full = hdm_frequency_response(h, o.wavenumbers, u);
  const FrequencyResponse red = frequency_response(r, o.wavenumbers, u);
  CHECK((full - red.outputs).norm() <= 1e-9 * full.norm());

  // Operators equal W^H X V.
  const CMat V = b.V.to_complex(), W = b.W.to_complex();
  CHECK((r.slot(Slot::K).to_complex() - W.adjoint() * dense(h.K) * V).norm() <= 1e-10 * r.slot(Slot::K).to_complex().norm());
  CHECK((r.slot(Slot::G).to_complex() - h.G * V).norm() <= 1e-12);
  CHECK(r.slot(Slot::H).to_complex() == h.H);
}

TEST_CASE("first-order spec is stable", "[synth]") {
  FirstOrderSpec s;
  s.oscillators = 5;
  const HdmSystem h = make_first_order(ParameterPoint{0.0}, s);
  CHECK(h.order == RomOrder::First);
  Eigen::ComplexEigenSolver<CMat> es(dense(h.E).fullPivLu().solve(dense(h.A)));
  CHECK(es.eigenvalues().real().maxCoeff() < 0.0);
}

TEST_CASE("two-mode family margins", "[synth]") {
  for (double s : {0.1, 0.5, 0.9}) {
    const Rom r = two_mode_family(s);
    const EigenAnalysis e = eigen_analysis(r);
    const double lo = e.values.real().maxCoeff();
    CHECK_THAT(lo, WithinAbs(-std::min(1.0 + s, 2.0 - s), 1e-12));
  }
}

TEST_CASE("build_database keeps counts and bases", "[synth]") {
  FamilySpec f;
  f.system = small_chain();
  f.k = 3;
  const std::vector<ParameterPoint> pts{ParameterPoint{0.0}, ParameterPoint{1.0}};
  const RomDatabase db = build_database(f, ParameterDomain::from_bounds({0.0}, {1.0}), pts);
  CHECK(db.size() == 2);
  CHECK(db.k == 3);
  CHECK(db.records[0].hdm_dof_count == std::optional<std::size_t>{40});
  REQUIRE(db.bases.size() == 2);
  CHECK(db.bases[1].has_value());
  CHECK_FALSE(db.consistency.enforced());
}
