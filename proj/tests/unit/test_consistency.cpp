#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "support/fixtures.hpp"

using namespace romdb;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Classical Gram-Schmidt in the metric inner product, column by column.
Mat metric_gram_schmidt(const Mat& a, const Mat& metric) {
  Mat q = a;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index i = 0; i < j; ++i) {
        const double c = q.col(i).dot(metric * q.col(j));
        q.col(j) -= c * q.col(i);
      }
    q.col(j) /= std::sqrt(q.col(j).dot(metric * q.col(j)));
  }
  return q;
}

// Ascending principal angles from the eigenvalues of R^T R.
Vec oracle_angles(const Mat& vi, const Mat& vj, const Mat& metric) {
  const Mat r = vi.transpose() * metric * vj;
  Eigen::SelfAdjointEigenSolver<Mat> es(r.transpose() * r);
  Vec out(r.cols());
  for (Eigen::Index l = 0; l < r.cols(); ++l) {
    const double s = std::sqrt(std::max(0.0, es.eigenvalues()(r.cols() - 1 - l)));
    out(l) = std::acos(std::clamp(s, 0.0, 1.0));
  }
  return out;
}

double power_norm(const Mat& m) {
  Vec v = Vec::Ones(m.cols());
  double s = 0.0;
  for (int it = 0; it < 3000; ++it) {
    const Vec w = m.transpose() * (m * v);
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
    s = std::sqrt(n);
  }
  return s;
}

double procrustes_cost(const Mat& vi, const Mat& vref, const Mat& s) { return (vi * s - vref).norm(); }

Mat skew(Eigen::Index k, std::mt19937_64& rng) {
  const Mat a = fx::random_mat(k, k, rng);
  return 0.5 * (a - a.transpose());
}

FixedPointOptions moment_opts() {
  FixedPointOptions o;
  o.init = InitKind::MomentProcrustes;
  return o;
}

}  // namespace

TEST_CASE("subspace angles of identical and orthogonal bases", "[consistency]") {
  std::mt19937_64 rng(1);
  const Mat v = metric_gram_schmidt(fx::random_mat(10, 3, rng), Mat::Identity(10, 10));
  const SubspaceAngleResult same = subspace_angles(v, v);
  CHECK(same.angles.cwiseAbs().maxCoeff() < 1e-7);

  Mat a = Mat::Zero(6, 2);
  Mat b = Mat::Zero(6, 2);
  a(0, 0) = a(1, 1) = 1.0;
  b(2, 0) = b(3, 1) = 1.0;
  const SubspaceAngleResult orth = subspace_angles(a, b);
  for (Eigen::Index l = 0; l < 2; ++l) CHECK_THAT(orth.angles(l), WithinAbs(std::numbers::pi / 2, 1e-15));
}

TEST_CASE("subspace angles reject non-orthonormal bases", "[consistency]") {
  const Mat a = 2.0 * Mat::Identity(4, 2);
  try {
    (void)subspace_angles(a, a);
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidBasis);
  }
}

TEST_CASE("subspace angles match a Gram-Schmidt oracle and are symmetric", "[consistency][property]") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> pn(20, 50), pk(3, 6);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = pn(rng), k = pk(rng);
    const Mat metric = fx::random_spd(n, rng, 0.5);
    const Mat vi = metric_gram_schmidt(fx::random_mat(n, k, rng), metric);
    const Mat vj = metric_gram_schmidt(fx::random_mat(n, k, rng), metric);
    const SubspaceAngleResult r = subspace_angles(vi, vj, metric);
    const Vec oracle = oracle_angles(vi, vj, metric);
    CHECK((r.angles - oracle).cwiseAbs().maxCoeff() <= 1e-10);
    const SubspaceAngleResult rt = subspace_angles(vj, vi, metric);
    CHECK((r.angles - rt.angles).cwiseAbs().maxCoeff() <= 1e-12);
    for (Eigen::Index l = 1; l < k; ++l) CHECK(r.angles(l - 1) <= r.angles(l));
  }
}

TEST_CASE("procrustes recovers exact rotations and is idempotent", "[consistency]") {
  std::mt19937_64 rng(5);
  const Mat vref = metric_gram_schmidt(fx::random_mat(15, 4, rng), Mat::Identity(15, 15));
  CHECK((procrustes_transform(vref, vref) - Mat::Identity(4, 4)).norm() <= 1e-10);

  const Mat q0 = random_orthogonal(4, rng);
  const Mat vi = vref * q0.transpose();
  const Mat q = procrustes_transform(vi, vref);
  CHECK((q - q0).norm() <= 1e-10);
  const Mat aligned = vi * q;
  CHECK((procrustes_transform(aligned, vref) - Mat::Identity(4, 4)).norm() <= 1e-10);
}

TEST_CASE("procrustes beats random orthogonal candidates", "[consistency][property]") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const Mat vi = metric_gram_schmidt(fx::random_mat(20, 4, rng), Mat::Identity(20, 20));
    const Mat vref = metric_gram_schmidt(fx::random_mat(20, 4, rng), Mat::Identity(20, 20));
    const double best = procrustes_cost(vi, vref, procrustes_transform(vi, vref));
    for (int c = 0; c < 1000; ++c) CHECK(best <= procrustes_cost(vi, vref, random_orthogonal(4, rng)) + 1e-12);
  }
}

TEST_CASE("procrustes warns on rank-deficient cross products", "[consistency]") {
  Mat a = Mat::Zero(6, 2);
  Mat b = Mat::Zero(6, 2);
  a(0, 0) = a(1, 1) = 1.0;
  b(0, 0) = b(2, 1) = 1.0;
  Diagnostics diag;
  const Mat q = procrustes_transform(a, b, std::nullopt, &diag);
  CHECK(orthogonality_defect(q) < 1e-12);
  CHECK_FALSE(diag.empty());
}

TEST_CASE("truncation length", "[consistency]") {
  SubspaceAngleResult zero;
  zero.angles = Vec::Zero(5);
  CHECK(truncation_length({zero}) == 5);

  SubspaceAngleResult r;
  r.angles = Vec(3);
  r.angles << 0.1, 0.2, 1.0;
  CHECK(truncation_length({r, zero}, std::numbers::pi / 4) == 2);
  CHECK(truncation_length({}) == 0);

  // Exhaustive scan oracle over random suites.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ang(0.0, std::numbers::pi / 2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SubspaceAngleResult> suite(1 + trial % 5);
    std::size_t expected = 6;
    for (auto& s : suite) {
      std::vector<double> v(6);
      for (double& x : v) x = ang(rng);
      std::sort(v.begin(), v.end());
      s.angles = Eigen::Map<Vec>(v.data(), 6);
      std::size_t below = 0;
      for (double x : v) below += x < 0.6 ? 1 : 0;
      expected = std::min(expected, below);
    }
    CHECK(truncation_length(suite, 0.6) == expected);
  }
}

TEST_CASE("truncate_rom", "[consistency]") {
  const Rom r = fx::random_rom(RomOrder::First, ScalarField::Real, 3, 3);
  SubspaceAngleResult id;
  id.left_directions = Mat::Identity(3, 3);
  id.right_directions = Mat::Identity(3, 3);
  CHECK(truncate_rom(r, id, 3) == r);

  Mat e = Mat::Zero(3, 3);
  e.diagonal() << 1, 2, 3;
  const Rom d = Rom::first_order(DenseMatrix(e), DenseMatrix(e), DenseMatrix(Mat::Ones(3, 1)),
                                 DenseMatrix(Mat::Ones(1, 3)), DenseMatrix(Mat::Zero(1, 1)));
  const Rom t = truncate_rom(d, id, 2);
  Mat expect = Mat::Zero(2, 2);
  expect.diagonal() << 1, 2;
  CHECK(t.slot(Slot::E).re() == expect);
  CHECK(t.k() == 2);

  CHECK_THROWS_AS(truncate_rom(d, id, 0), Error);
  CHECK_THROWS_AS(truncate_rom(d, id, 4), Error);

  std::mt19937_64 rng(4);
  const Rom big = fx::random_rom(RomOrder::Second, ScalarField::Complex, 5, 8);
  const Mat x = random_orthogonal(5, rng);
  const Mat y = random_orthogonal(5, rng);
  const Rom tr = truncate_rom(big, x, y, 3);
  const Mat xq = x.leftCols(3);
  const Mat yz = y.leftCols(3);
  CHECK((tr.slot(Slot::K).im() - yz.transpose() * big.slot(Slot::K).im() * xq).norm() < 1e-13);
  CHECK((tr.slot(Slot::B).re() - yz.transpose() * big.slot(Slot::B).re()).norm() < 1e-13);
  CHECK((tr.slot(Slot::G).re() - big.slot(Slot::G).re() * xq).norm() < 1e-13);
}

TEST_CASE("s_min formulas", "[consistency]") {
  const DenseMatrix I2(Mat(Mat::Identity(2, 2)));
  const DenseMatrix zb(Mat(Mat::Zero(2, 1)));
  const DenseMatrix zg(Mat(Mat::Zero(1, 2)));
  const DenseMatrix zh(Mat(Mat::Zero(1, 1)));
  const Rom r = Rom::first_order(I2, I2, zb, zg, zh);
  const DistanceWeights w = DistanceWeights::uniform(RomOrder::First);
  CHECK_THAT(smin_galerkin(r, r, w), WithinAbs(4.0, 1e-14));
  CHECK_THAT(smin_petrov_galerkin(r, r, w), WithinAbs(2.0, 1e-14));
}

TEST_CASE("s_min matches a power-iteration recomputation", "[consistency][property]") {
  for (int trial = 0; trial < 10; ++trial) {
    const Rom a = fx::random_rom(RomOrder::First, ScalarField::Real, 4, 40 + trial);
    const Rom b = fx::random_rom(RomOrder::First, ScalarField::Real, 4, 60 + trial);
    const DistanceWeights w = normalization_weights(b);
    double quad = 0.0;
    for (Slot s : {Slot::E, Slot::A}) quad += w[s] * power_norm(a.slot(s).re()) * power_norm(b.slot(s).re());
    const Mat fb = w[Slot::B] * a.slot(Slot::B).re() * b.slot(Slot::B).re().transpose();
    const Mat fg = w[Slot::G] * a.slot(Slot::G).re().transpose() * b.slot(Slot::G).re();
    CHECK_THAT(smin_galerkin(a, b, w), WithinRel(2.0 * quad + power_norm(fb + fg), 1e-8));
    CHECK_THAT(smin_petrov_galerkin(a, b, w), WithinRel(quad + std::max(power_norm(fb), power_norm(fg)), 1e-8));
  }
}

TEST_CASE("identical ROMs are a fixed point at the identity", "[consistency]") {
  const Rom r = fx::random_rom(RomOrder::First, ScalarField::Real, 4, 17);
  const DistanceWeights w = normalization_weights(r);
  const FixedPointReport g = fixed_point_galerkin(r, r, w);
  CHECK(g.converged);
  CHECK((g.transform.Q - Mat::Identity(4, 4)).norm() < 1e-8);
  const FixedPointReport pg = fixed_point_petrov_galerkin(r, r, w);
  CHECK((pg.transform.Q - Mat::Identity(4, 4)).norm() < 1e-8);
  CHECK((pg.transform.Z - Mat::Identity(4, 4)).norm() < 1e-8);

  // J at the identity dominates small orthogonal perturbations.
  std::mt19937_64 rng(3);
  const double j0 = galerkin_objective(Mat::Identity(4, 4), r, r, w);
  for (int t = 0; t < 20; ++t) {
    const Mat q = mat_exp_general(1e-2 * skew(4, rng));
    CHECK(galerkin_objective(q, r, r, w) <= j0);
  }
}

TEST_CASE("criticality residual cases", "[consistency]") {
  std::mt19937_64 rng(8);
  Mat e = fx::random_spd(4, rng);
  Mat a = fx::random_spd(4, rng);
  const Rom sym = Rom::first_order(DenseMatrix(e), DenseMatrix(a), DenseMatrix(Mat(fx::random_mat(4, 1, rng))),
                                   DenseMatrix(Mat(fx::random_mat(1, 4, rng))), DenseMatrix(Mat::Zero(1, 1)));
  const DistanceWeights w = normalization_weights(sym);
  CHECK(criticality_residual_galerkin(Mat::Identity(4, 4), sym, sym, w) <= 1e-15);

  const Rom other = fx::random_rom(RomOrder::First, ScalarField::Real, 4, 99, 1, 1);
  CHECK(criticality_residual_galerkin(random_orthogonal(4, rng), other, sym, w) > 1e-3);
}

TEST_CASE("scrambled ROMs are recovered by both fixed-point algorithms", "[consistency]") {
  std::mt19937_64 rng(31);
  for (RomOrder order : {RomOrder::First, RomOrder::Second}) {
    const Rom ref = fx::random_rom(order, ScalarField::Real, 6, 5);
    const DistanceWeights w = normalization_weights(ref);
    const Mat q0 = random_orthogonal(6, rng);
    const Rom g_other = apply_transform(ref, {q0, q0});
    const double before = rom_distance(g_other, ref, w);
    const FixedPointReport g = fixed_point_galerkin(g_other, ref, w, moment_opts());
    CHECK(equivalence_class_distance(ref, g_other, g.transform, w) <= 1e-10 * before);
    CHECK(g.criticality_residual <= 1e-8);

    const Mat z0 = random_orthogonal(6, rng);
    const Rom pg_other = apply_transform(ref, {q0, z0});
    const FixedPointReport pg = fixed_point_petrov_galerkin(pg_other, ref, w, moment_opts());
    CHECK(equivalence_class_distance(ref, pg_other, pg.transform, w) <=
          1e-10 * rom_distance(pg_other, ref, w));
    CHECK(orthogonality_defect(pg.transform.Q) < 1e-10);
    CHECK(orthogonality_defect(pg.transform.Z) < 1e-10);
  }
}

TEST_CASE("moment warm start and identity start reach the same objective", "[consistency]") {
  const Rom ref = fx::random_rom(RomOrder::First, ScalarField::Complex, 5, 12);
  std::mt19937_64 rng(2);
  const Rom other = apply_transform(ref, {random_orthogonal(5, rng), random_orthogonal(5, rng)});
  const DistanceWeights w = normalization_weights(ref);
  const FixedPointReport warm = fixed_point_petrov_galerkin(other, ref, w, moment_opts());
  FixedPointOptions idopt;
  idopt.init = InitKind::Identity;
  idopt.restarts = 30;
  const FixedPointReport ident = fixed_point_petrov_galerkin(other, ref, w, idopt);
  // The warm start reaches the global maximum; identity with restarts may stop
  // at a lower critical point, never above it.
  CHECK(ident.objective_trace.back() <= warm.objective_trace.back() * (1 + 1e-8));
  INFO("identity objective " << ident.objective_trace.back() << " warm " << warm.objective_trace.back());
  CHECK(ident.criticality_residual <= 1e-8);
}

TEST_CASE("fixed-point iterations ascend and satisfy the s-bound", "[consistency][property]") {
  int instances = 0;
  for (double margin : {1.01, 2.0, 10.0}) {
    for (int seed = 0; seed < 20; ++seed) {
      const RomOrder order = seed % 2 ? RomOrder::Second : RomOrder::First;
      const ScalarField field = seed % 3 ? ScalarField::Real : ScalarField::Complex;
      const Rom ref = fx::random_rom(order, field, 3 + seed % 4, 500 + seed);
      const Rom other = fx::random_rom(order, field, 3 + seed % 4, 700 + seed);
      const DistanceWeights w = normalization_weights(ref);
      FixedPointOptions o;
      o.s_margin = margin;
      o.max_iters = 20000;
      o.init = seed % 2 ? InitKind::RandomOrthogonal : InitKind::Identity;
      o.seed = static_cast<std::uint64_t>(seed);
      for (bool petrov : {false, true}) {
        const FixedPointReport r =
            petrov ? fixed_point_petrov_galerkin(other, ref, w, o) : fixed_point_galerkin(other, ref, w, o);
        ++instances;
        for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
          const double prev = r.objective_trace[i - 1];
          CHECK(r.objective_trace[i] >= prev - 1e-12 * std::abs(prev));
        }
        for (double sv : r.min_map_singular_value) CHECK(sv >= (r.s - r.s_min) * (1 - 1e-10));
        CHECK(r.s - r.s_min > 0.0);
        if (r.converged) CHECK(r.criticality_residual <= 1e-8);
      }
    }
  }
  CHECK(instances >= 50);
}

TEST_CASE("converged Galerkin iterates are first-order critical along geodesics", "[consistency][property]") {
  std::mt19937_64 rng(44);
  for (int seed = 0; seed < 10; ++seed) {
    const Rom ref = fx::random_rom(RomOrder::First, ScalarField::Real, 4, 800 + seed);
    const Rom other = fx::random_rom(RomOrder::First, ScalarField::Real, 4, 900 + seed);
    const DistanceWeights w = normalization_weights(ref);
    const FixedPointReport r = fixed_point_galerkin(other, ref, w);
    REQUIRE(r.converged);
    const Mat& q = r.transform.Q;
    for (int d = 0; d < 5; ++d) {
      const Mat s = skew(4, rng);
      const double h = 1e-5;
      const double plus = galerkin_objective(q * mat_exp_general(h * s), other, ref, w);
      const double minus = galerkin_objective(q * mat_exp_general(-h * s), other, ref, w);
      CHECK(std::abs(plus - minus) / (2 * h) <= 1e-6 * std::max(1.0, std::abs(r.objective_trace.back())));
    }
  }
}

TEST_CASE("database consistency keeps the reference and recovers scrambles", "[consistency]") {
  const Rom ref = fx::random_rom(RomOrder::Second, ScalarField::Complex, 4, 3);
  const RomDatabase one = fx::scrambled_database(ref, 1, 1, false);
  ConsistencyOptions o;
  o.fixed_point = moment_opts();
  const ConsistencyResult single = enforce_database_consistency(one, o);
  CHECK(single.database.records[0].rom == one.records[0].rom);

  const RomDatabase db = fx::scrambled_database(ref, 5, 2, false);
  o.reference_index = 2;
  const ConsistencyResult r = enforce_database_consistency(db, o);
  CHECK(r.database.records[2].rom == db.records[2].rom);
  CHECK(max_pairwise_distance(r.database, 2) <= 1e-9 * max_pairwise_distance(db, 2));
  CHECK(r.database.consistency.mode == ConsistencyMode::FixedPointPG);
  CHECK(r.database.consistency.reference_index == 2);
}

TEST_CASE("procrustes mode needs a common mesh; fixed point does not", "[consistency]") {
  const RomDatabase db =
      build_database(fx::small_db_family(), fx::small_db_domain(), fx::small_db_points());
  REQUIRE(db.records[0].hdm_dof_count == 41235u);
  REQUIRE(db.records[3].hdm_dof_count == 40929u);
  ConsistencyOptions proc;
  proc.mode = ConsistencyMode::Procrustes;
  try {
    (void)enforce_database_consistency(db, proc);
    FAIL("procrustes accepted mismatched meshes");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MeshMismatch);
  }
  ConsistencyOptions fp;
  fp.mode = ConsistencyMode::FixedPointG;
  const ConsistencyResult r = enforce_database_consistency(db, fp);
  for (const auto& rec : r.records)
    if (rec.report) {
      INFO("record " << rec.index << " iterations " << rec.report->iterations << " converged " << rec.report->converged);
      CHECK(rec.distance_after <= rec.distance_before);
      if (rec.report->converged) CHECK(rec.report->criticality_residual <= 1e-8);
    }
}

TEST_CASE("procrustes mode aligns bases on a common mesh", "[consistency]") {
  ChainSpec chain;
  chain.dofs.base = 120;
  chain.stiffness_law = AffineLaw{1.0, {0.5}};
  FamilySpec f;
  f.system = chain;
  f.method = RobMethod::Modal;
  f.k = 4;
  const RomDatabase db =
      build_database(f, ParameterDomain::from_bounds({0.0}, {1.0}), {ParameterPoint{0.0}, ParameterPoint{1.0}});
  RomDatabase flipped = db;
  // Flip the sign of one basis vector and the matching ROM coordinates.
  Mat q = Mat::Identity(4, 4);
  q(1, 1) = -1;
  flipped.records[1].rom = apply_transform(db.records[1].rom, {q, q});
  auto& b = *flipped.bases[1];
  b.V = DenseMatrix(Mat(b.V.re() * q));
  b.W = DenseMatrix(Mat(b.W.re() * q));
  ConsistencyOptions o;
  o.mode = ConsistencyMode::Procrustes;
  o.reference_index = 0;
  const ConsistencyResult r = enforce_database_consistency(flipped, o);
  CHECK((r.records[1].transform.Q - q).norm() < 1e-6);
  CHECK(r.truncation_length.value() == 4);
}

TEST_CASE("init names parse", "[consistency]") {
  CHECK(init_kind_from_string("moment-procrustes") == InitKind::MomentProcrustes);
  CHECK(init_kind_from_string("identity") == InitKind::Identity);
  CHECK_THROWS_AS(init_kind_from_string("bogus"), Error);
}
