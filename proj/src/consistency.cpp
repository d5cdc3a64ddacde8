#include "romdb/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace romdb {

namespace {

struct QuadTerm {
  Mat X;
  Mat X0;
  double w;
};

// Real-valued pieces of the alignment functionals for one (other, ref) pair.
struct Problem {
  std::vector<QuadTerm> quad;
  Mat FB;  // beta  B B0^T
  Mat FG;  // gamma G^T G0
};

Problem make_problem(const Rom& other, const Rom& ref, const DistanceWeights& w) {
  if (!other.same_shape(ref)) {
    throw Error(ErrorKind::InvalidInput, "alignment: ROM shapes differ");
  }
  if (w.order != ref.order() || w.values.size() != ref.slots().size()) {
    throw Error(ErrorKind::InvalidInput, "alignment: weights do not match ROM order");
  }
  const bool cplx_field = ref.field() == ScalarField::Complex;
  Problem p;
  for (Slot s : square_slots_of(ref.order())) {
    const double ws = w[s];
    if (ws == 0.0) continue;
    const DenseMatrix& x = other.slot(s);
    const DenseMatrix& x0 = ref.slot(s);
    p.quad.push_back({x.re(), x0.re(), ws});
    if (cplx_field) p.quad.push_back({x.im(), x0.im(), ws});
  }
  const Eigen::Index k = ref.k();
  p.FB = Mat::Zero(k, k);
  p.FG = Mat::Zero(k, k);
  const DenseMatrix& b = other.slot(Slot::B);
  const DenseMatrix& b0 = ref.slot(Slot::B);
  const DenseMatrix& g = other.slot(Slot::G);
  const DenseMatrix& g0 = ref.slot(Slot::G);
  p.FB = w[Slot::B] * (b.re() * b0.re().transpose() + b.im() * b0.im().transpose());
  p.FG = w[Slot::G] * (g.re().transpose() * g0.re() + g.im().transpose() * g0.im());
  return p;
}

double inner(const Mat& a, const Mat& b) { return (a.array() * b.array()).sum(); }

void require_square_k(const Mat& q, Eigen::Index k, const char* name) {
  if (q.rows() != k || q.cols() != k) {
    throw Error(ErrorKind::InvalidInput, std::string("alignment: ") + name + " must be k x k");
  }
}

// Gradient of J_G without the shift: sum w (X Q X0^T + X^T Q X0) + F.
Mat galerkin_gradient(const Problem& p, const Mat& Q) {
  Mat r = p.FB + p.FG;
  for (const auto& t : p.quad) {
    r.noalias() += t.w * (t.X * Q * t.X0.transpose());
    r.noalias() += t.w * (t.X.transpose() * Q * t.X0);
  }
  return r;
}

// Gradients of J_PG with respect to Q and Z.
Mat pg_gradient_q(const Problem& p, const Mat& Z) {
  Mat r = p.FG;
  for (const auto& t : p.quad) r.noalias() += t.w * (t.X.transpose() * Z * t.X0);
  return r;
}

Mat pg_gradient_z(const Problem& p, const Mat& Q) {
  Mat r = p.FB;
  for (const auto& t : p.quad) r.noalias() += t.w * (t.X * Q * t.X0.transpose());
  return r;
}

double galerkin_value(const Problem& p, const Mat& Q) {
  double j = inner(p.FB + p.FG, Q);
  for (const auto& t : p.quad) j += t.w * inner(Q.transpose() * t.X * Q, t.X0);
  return j;
}

double pg_value(const Problem& p, const Mat& Q, const Mat& Z) {
  double j = inner(p.FB, Z) + inner(p.FG, Q);
  for (const auto& t : p.quad) j += t.w * inner(Z.transpose() * t.X * Q, t.X0);
  return j;
}

double asym_residual(const Mat& Q, const Mat& R) {
  const Mat s = Q.transpose() * R;
  return (0.5 * (s - s.transpose())).norm() / std::max(1.0, R.norm());
}

double quad_bound(const Problem& p) {
  double acc = 0.0;
  for (const auto& t : p.quad) acc += t.w * spectral_norm(t.X) * spectral_norm(t.X0);
  return acc;
}

double smin_g(const Problem& p) { return 2.0 * quad_bound(p) + spectral_norm(p.FB + p.FG); }

double smin_pg(const Problem& p) {
  return quad_bound(p) + std::max(spectral_norm(p.FB), spectral_norm(p.FG));
}

bool relative_stagnation(double prev, double next, double tol) {
  const double scale = std::max(std::abs(prev), std::numeric_limits<double>::min());
  return std::abs(next - prev) <= tol * scale;
}

Mat thin_polar(const Mat& a) {
  const SvdResult f = svd(a);
  return f.U * f.V.transpose();
}

// Moment columns of a ROM. Under (Q, Z) the Q-side columns map to Q^T u and
// the Z-side columns to Z^T v: start from G^T (Q side) and B (Z side), then X
// carries Q-side to Z-side and X^T carries Z-side back.
struct Moments {
  Mat qside;
  Mat zside;
};

Moments moments(const Rom& rom) {
  const Eigen::Index k = rom.k();
  const bool cplx = rom.field() == ScalarField::Complex;
  std::vector<Mat> ops;
  for (Slot s : square_slots_of(rom.order())) {
    const DenseMatrix& x = rom.slot(s);
    ops.push_back(x.re());
    if (cplx) ops.push_back(x.im());
  }
  auto planes = [](const Mat& re, const Mat& im, bool cplx) {
    if (!cplx) return re;
    Mat out(re.rows(), 2 * re.cols());
    out << re, im;
    return out;
  };
  auto normalize = [](Mat m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double n = m.col(j).norm();
      if (n > 0.0) m.col(j) /= n;
    }
    return m;
  };
  const Eigen::Index cap = 4 * k;
  const DenseMatrix& g = rom.slot(Slot::G);
  const DenseMatrix& b = rom.slot(Slot::B);
  Mat q = normalize(planes(g.re().transpose(), g.im().transpose(), cplx));
  Mat z = normalize(planes(b.re(), b.im(), cplx));
  std::vector<Mat> qs{q}, zs{z};
  const int levels = static_cast<int>(std::min<Eigen::Index>(2 * k, 12));
  for (int l = 0; l < levels; ++l) {
    Mat qn(k, 0), zn(k, 0);
    for (const Mat& x : ops) {
      Mat a(k, qn.cols() + z.cols());
      a << qn, x.transpose() * z;
      qn = std::move(a);
      Mat b(k, zn.cols() + q.cols());
      b << zn, x * q;
      zn = std::move(b);
    }
    q = normalize(qn.leftCols(std::min(cap, qn.cols())));
    z = normalize(zn.leftCols(std::min(cap, zn.cols())));
    qs.push_back(q);
    zs.push_back(z);
  }
  auto hcat = [k](const std::vector<Mat>& parts) {
    Eigen::Index c = 0;
    for (const auto& m : parts) c += m.cols();
    Mat out(k, c);
    c = 0;
    for (const auto& m : parts) {
      out.middleCols(c, m.cols()) = m;
      c += m.cols();
    }
    return out;
  };
  return {hcat(qs), hcat(zs)};
}

// One full fixed-point run from (Q0, Z0). For Galerkin, Z tracks Q.
FixedPointReport run_fixed_point(const Problem& p, bool petrov, Mat Q, Mat Z,
                                 const FixedPointOptions& opts) {
  FixedPointReport rep;
  rep.s_min = petrov ? smin_pg(p) : smin_g(p);
  rep.s = opts.s_margin * rep.s_min;
  if (!(rep.s > 0.0)) {
    // All terms vanish: every orthogonal pair is critical.
    rep.transform = {Q, petrov ? Z : Q};
    rep.objective_trace.push_back(petrov ? pg_value(p, Q, Z) : galerkin_value(p, Q));
    rep.criticality_residual = 0.0;
    rep.converged = true;
    return rep;
  }
  auto objective = [&](const Mat& q, const Mat& z) {
    return petrov ? pg_value(p, q, z) : galerkin_value(p, q);
  };
  auto residual = [&](const Mat& q, const Mat& z) {
    if (!petrov) return asym_residual(q, galerkin_gradient(p, q));
    return std::max(asym_residual(q, pg_gradient_q(p, z)), asym_residual(z, pg_gradient_z(p, q)));
  };

  double j = objective(Q, Z);
  rep.objective_trace.push_back(j);
  int stagnant = 0;
  for (int it = 1; it <= opts.max_iters; ++it) {
    double step = 0.0;
    double sig_min = 0.0;
    if (petrov) {
      const Mat mq = pg_gradient_q(p, Z) + rep.s * Q;
      const Mat mz = pg_gradient_z(p, Q) + rep.s * Z;
      const SvdResult fq = svd(mq);
      const SvdResult fz = svd(mz);
      const Mat qn = fq.U * fq.V.transpose();
      const Mat zn = fz.U * fz.V.transpose();
      sig_min = std::min(fq.sigma.minCoeff(), fz.sigma.minCoeff());
      step = std::max((qn - Q).norm(), (zn - Z).norm());
      Q = qn;
      Z = zn;
    } else {
      const Mat m = galerkin_gradient(p, Q) + rep.s * Q;
      const SvdResult f = svd(m);
      const Mat qn = f.U * f.V.transpose();
      sig_min = f.sigma.minCoeff();
      step = (qn - Q).norm();
      Q = qn;
      Z = qn;
    }
    rep.min_map_singular_value.push_back(sig_min);
    const double jn = objective(Q, Z);
    rep.objective_trace.push_back(jn);
    rep.iterations = it;
    stagnant = relative_stagnation(j, jn, opts.objective_tol) ? stagnant + 1 : 0;
    j = jn;
    if (step <= opts.step_tol) {
      rep.converged = true;
      break;
    }
    if (stagnant >= opts.stagnation_window && residual(Q, Z) <= opts.criticality_tol) {
      rep.converged = true;
      break;
    }
  }
  rep.transform = {Q, Z};
  rep.criticality_residual = residual(Q, Z);
  return rep;
}

FixedPointReport fixed_point(const Rom& other, const Rom& ref, const DistanceWeights& w,
                             const FixedPointOptions& opts, bool petrov) {
  opts.validate();
  const Problem p = make_problem(other, ref, w);
  const Eigen::Index k = ref.k();
  std::mt19937_64 rng(opts.seed);

  auto objective = [&](const Mat& q, const Mat& z) {
    return petrov ? pg_value(p, q, z) : galerkin_value(p, q);
  };

  Mat Q0 = Mat::Identity(k, k);
  Mat Z0 = Mat::Identity(k, k);
  switch (opts.init) {
    case InitKind::Identity:
      break;
    case InitKind::RandomOrthogonal:
      Q0 = random_orthogonal(k, rng);
      Z0 = petrov ? random_orthogonal(k, rng) : Q0;
      break;
    case InitKind::WarmStart: {
      double best = objective(Q0, Z0);
      for (int i = 0; i < 8; ++i) {
        const Mat q = random_orthogonal(k, rng);
        const Mat z = petrov ? random_orthogonal(k, rng) : q;
        const double v = objective(q, z);
        if (v > best) {
          best = v;
          Q0 = q;
          Z0 = z;
        }
      }
      break;
    }
    case InitKind::MomentProcrustes: {
      const TransformPair t = moment_procrustes(other, ref, !petrov);
      Q0 = t.Q;
      Z0 = t.Z;
      break;
    }
    case InitKind::Given:
      if (!opts.initial) {
        throw Error(ErrorKind::InvalidInput, "fixed point: InitKind::Given without an initial transform");
      }
      opts.initial->validate();
      require_square_k(opts.initial->Q, k, "initial Q");
      Q0 = opts.initial->Q;
      Z0 = petrov ? opts.initial->Z : opts.initial->Q;
      break;
  }

  FixedPointReport best = run_fixed_point(p, petrov, Q0, Z0, opts);
  if (opts.init == InitKind::MomentProcrustes) {
    FixedPointReport cand = run_fixed_point(p, petrov, Mat::Identity(k, k), Mat::Identity(k, k), opts);
    if (cand.objective_trace.back() > best.objective_trace.back()) best = std::move(cand);
  }
  for (int r = 0; r < opts.restarts; ++r) {
    const Mat q = random_orthogonal(k, rng);
    const Mat z = petrov ? random_orthogonal(k, rng) : q;
    FixedPointReport cand = run_fixed_point(p, petrov, q, z, opts);
    if (cand.objective_trace.back() > best.objective_trace.back()) best = std::move(cand);
  }
  return best;
}

}  // namespace

InitKind init_kind_from_string(const std::string& name) {
  if (name == "identity") return InitKind::Identity;
  if (name == "random") return InitKind::RandomOrthogonal;
  if (name == "warm-start") return InitKind::WarmStart;
  if (name == "moment-procrustes") return InitKind::MomentProcrustes;
  throw Error(ErrorKind::InvalidInput, "unknown initialization '" + name + "'");
}

TransformPair moment_procrustes(const Rom& other, const Rom& ref, bool galerkin) {
  if (!other.same_shape(ref)) throw Error(ErrorKind::InvalidInput, "moment_procrustes: ROM shapes differ");
  const Moments mo = moments(other);
  const Moments mr = moments(ref);
  const Mat cq = mo.qside * mr.qside.transpose();
  const Mat cz = mo.zside * mr.zside.transpose();
  if (galerkin) {
    const Mat q = thin_polar(cq + cz);
    return {q, q};
  }
  return {thin_polar(cq), thin_polar(cz)};
}

SubspaceAngleResult subspace_angles(const Mat& Vi, const Mat& Vj, const std::optional<Mat>& metric) {
  if (Vi.rows() != Vj.rows() || Vi.cols() != Vj.cols()) {
    throw Error(ErrorKind::InvalidInput, "subspace_angles: bases differ in shape");
  }
  const Eigen::Index k = Vi.cols();
  Mat MVj = Vj;
  Mat MVi = Vi;
  if (metric) {
    if (metric->rows() != Vi.rows() || metric->cols() != Vi.rows()) {
      throw Error(ErrorKind::InvalidInput, "subspace_angles: metric shape mismatch");
    }
    MVj = (*metric) * Vj;
    MVi = (*metric) * Vi;
  }
  const Mat I = Mat::Identity(k, k);
  const double di = (Vi.transpose() * MVi - I).norm();
  const double dj = (Vj.transpose() * MVj - I).norm();
  if (di > 1e-6 || dj > 1e-6) {
    std::ostringstream os;
    os << "subspace_angles: basis not orthonormal in the metric (defects " << di << ", " << dj << ")";
    throw Error(ErrorKind::InvalidBasis, os.str(), {}, std::max(di, dj));
  }
  const Mat R = Vi.transpose() * MVj;
  const SvdResult f = svd(R);
  SubspaceAngleResult out;
  out.singular_values = f.sigma;
  out.left_directions = f.U;
  out.right_directions = f.V;
  out.angles.resize(k);
  for (Eigen::Index l = 0; l < k; ++l) {
    out.angles(l) = std::acos(std::clamp(f.sigma(l), 0.0, 1.0));
  }
  return out;
}

Mat procrustes_transform(const Mat& Vi, const Mat& Vref, const std::optional<Mat>& metric,
                         Diagnostics* diag) {
  const SubspaceAngleResult a = subspace_angles(Vi, Vref, metric);
  if (a.singular_values.size() > 0 && a.singular_values.minCoeff() < 1e-12 && diag) {
    diag->warn("procrustes: cross-Gram matrix is rank deficient; alignment is ambiguous");
  }
  return a.left_directions * a.right_directions.transpose();
}

Mat realify(const DenseMatrix& basis) {
  if (!basis.is_complex()) return basis.re();
  Mat out(2 * basis.rows(), basis.cols());
  out.topRows(basis.rows()) = basis.re();
  out.bottomRows(basis.rows()) = basis.im();
  return out;
}

std::optional<Mat> realify_metric(const std::optional<Mat>& metric, bool complex_basis) {
  if (!metric || !complex_basis) return metric;
  const Eigen::Index n = metric->rows();
  Mat out = Mat::Zero(2 * n, 2 * n);
  out.topLeftCorner(n, n) = *metric;
  out.bottomRightCorner(n, n) = *metric;
  return out;
}

std::size_t truncation_length(const std::vector<SubspaceAngleResult>& results, double theta_max) {
  std::size_t L = std::numeric_limits<std::size_t>::max();
  for (const auto& r : results) {
    std::size_t l = 0;
    while (l < static_cast<std::size_t>(r.angles.size()) && r.angles(static_cast<Eigen::Index>(l)) < theta_max) {
      ++l;
    }
    L = std::min(L, l);
  }
  return results.empty() ? 0 : L;
}

Rom truncate_rom(const Rom& rom, const Mat& right_dirs, const Mat& left_dirs, std::size_t L) {
  const Eigen::Index k = rom.k();
  const auto l = static_cast<Eigen::Index>(L);
  if (L < 1 || l > k) throw Error(ErrorKind::InvalidInput, "truncate_rom: L must satisfy 1 <= L <= k");
  if (right_dirs.rows() != k || left_dirs.rows() != k || right_dirs.cols() < l || left_dirs.cols() < l) {
    throw Error(ErrorKind::InvalidInput, "truncate_rom: direction matrices have the wrong shape");
  }
  const Mat Q = right_dirs.leftCols(l);
  const Mat Zt = left_dirs.leftCols(l).transpose();
  const auto names = slots_of(rom.order());
  std::vector<DenseMatrix> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const DenseMatrix& x = rom.slots()[i];
    auto map = [&](const Mat& m) -> Mat {
      switch (names[i]) {
        case Slot::B: return Zt * m;
        case Slot::G: return m * Q;
        case Slot::H: return m;
        default: return Zt * m * Q;
      }
    };
    if (x.is_complex()) {
      out.emplace_back(map(x.re()), map(x.im()));
    } else {
      out.emplace_back(map(x.re()));
    }
  }
  return Rom::from_slots(rom.order(), std::move(out));
}

Rom truncate_rom(const Rom& rom, const SubspaceAngleResult& alignment, std::size_t L) {
  return truncate_rom(rom, alignment.left_directions, alignment.left_directions, L);
}

double smin_galerkin(const Rom& other, const Rom& ref, const DistanceWeights& w) {
  return smin_g(make_problem(other, ref, w));
}

double smin_petrov_galerkin(const Rom& other, const Rom& ref, const DistanceWeights& w) {
  return smin_pg(make_problem(other, ref, w));
}

double galerkin_objective(const Mat& Q, const Rom& other, const Rom& ref, const DistanceWeights& w) {
  require_square_k(Q, ref.k(), "Q");
  return galerkin_value(make_problem(other, ref, w), Q);
}

double petrov_galerkin_objective(const Mat& Q, const Mat& Z, const Rom& other, const Rom& ref,
                                 const DistanceWeights& w) {
  require_square_k(Q, ref.k(), "Q");
  require_square_k(Z, ref.k(), "Z");
  return pg_value(make_problem(other, ref, w), Q, Z);
}

double criticality_residual_galerkin(const Mat& Q, const Rom& other, const Rom& ref,
                                     const DistanceWeights& w) {
  require_square_k(Q, ref.k(), "Q");
  return asym_residual(Q, galerkin_gradient(make_problem(other, ref, w), Q));
}

double criticality_residual_petrov_galerkin(const Mat& Q, const Mat& Z, const Rom& other,
                                            const Rom& ref, const DistanceWeights& w) {
  require_square_k(Q, ref.k(), "Q");
  require_square_k(Z, ref.k(), "Z");
  const Problem p = make_problem(other, ref, w);
  return std::max(asym_residual(Q, pg_gradient_q(p, Z)), asym_residual(Z, pg_gradient_z(p, Q)));
}

void FixedPointOptions::validate() const {
  if (!(s_margin > 1.0)) throw Error(ErrorKind::InvalidInput, "s_margin must exceed 1", "s_margin");
  if (max_iters < 1) throw Error(ErrorKind::InvalidInput, "max_iters must be at least 1", "max_iters");
  if (!(objective_tol > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "objective_tol must be positive", "objective_tol");
  }
  if (stagnation_window < 1 || restarts < 0) {
    throw Error(ErrorKind::InvalidInput, "invalid stagnation window or restart count");
  }
}

FixedPointReport fixed_point_galerkin(const Rom& other, const Rom& ref, const DistanceWeights& w,
                                      const FixedPointOptions& opts) {
  return fixed_point(other, ref, w, opts, false);
}

FixedPointReport fixed_point_petrov_galerkin(const Rom& other, const Rom& ref,
                                             const DistanceWeights& w, const FixedPointOptions& opts) {
  return fixed_point(other, ref, w, opts, true);
}

Mat random_orthogonal(Eigen::Index k, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Mat a(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < k; ++i) a(i, j) = n01(rng);
  }
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(k, k);
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

namespace {

std::size_t pick_reference(const RomDatabase& db, const std::optional<std::size_t>& requested) {
  if (requested) {
    if (*requested >= db.size()) {
      throw Error(ErrorKind::InvalidInput, "reference index out of range", "reference_index");
    }
    return *requested;
  }
  return db.centroid_record();
}

void require_common_mesh(const RomDatabase& db) {
  if (db.bases.size() != db.size()) {
    throw Error(ErrorKind::MeshMismatch,
                "procrustes alignment needs the reduced-order bases of every record; use a fixed-point mode");
  }
  std::optional<Eigen::Index> n;
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (!db.bases[i]) {
      throw Error(ErrorKind::MeshMismatch, "record " + std::to_string(i) +
                                               " has no stored basis; use a fixed-point mode");
    }
    if (n && db.bases[i]->n() != *n) {
      std::ostringstream os;
      os << "records have different state dimensions (" << *n << " vs " << db.bases[i]->n()
         << " at record " << i << "); use a fixed-point mode";
      throw Error(ErrorKind::MeshMismatch, os.str());
    }
    n = db.bases[i]->n();
  }
}

}  // namespace

ConsistencyResult enforce_database_consistency(const RomDatabase& db, const ConsistencyOptions& opts) {
  if (opts.mode == ConsistencyMode::None) {
    throw Error(ErrorKind::Usage, "enforce_database_consistency: mode 'none' requested");
  }
  if (db.size() == 0) throw Error(ErrorKind::InvalidInput, "empty database");
  ConsistencyResult out;
  out.reference_index = pick_reference(db, opts.reference_index);
  out.database = db;
  const std::size_t i0 = out.reference_index;
  const Rom& ref = db.records[i0].rom;
  Diagnostics wdiag;
  const DistanceWeights w = normalization_weights(ref, &wdiag);

  std::vector<Rom> aligned(db.size(), ref);
  std::vector<TransformPair> transforms(db.size(), TransformPair::identity(ref.k()));

  if (opts.mode == ConsistencyMode::Procrustes) {
    require_common_mesh(db);
    const RobPair& bref = *db.bases[i0];
    const bool cx = bref.V.is_complex() || bref.W.is_complex();
    const auto metric = realify_metric(bref.metric, cx);
    const Mat Vref = realify(bref.V);
    const Mat Wref = realify(bref.W);
    std::vector<SubspaceAngleResult> angle_results;
    std::vector<Mat> RV(db.size());
    std::vector<Mat> RW(db.size());
    for (std::size_t i = 0; i < db.size(); ++i) {
      RecordAlignment rec;
      rec.index = i;
      const RobPair& b = *db.bases[i];
      const Mat Vi = realify(b.V.as_field(cx ? ScalarField::Complex : ScalarField::Real));
      const Mat Wi = realify(b.W.as_field(cx ? ScalarField::Complex : ScalarField::Real));
      const SubspaceAngleResult av = subspace_angles(Vi, Vref, metric);
      const Mat MVref = metric ? Mat((*metric) * Vref) : Vref;
      const Mat MWref = metric ? Mat((*metric) * Wref) : Wref;
      RV[i] = Vi.transpose() * MVref;
      RW[i] = Wi.transpose() * MWref;
      TransformPair t{procrustes_transform(Vi, Vref, metric, &rec.diagnostics),
                      procrustes_transform(Wi, Wref, metric, &rec.diagnostics)};
      if (i == i0) t = TransformPair::identity(ref.k());
      if (i != i0) angle_results.push_back(av);
      rec.angles = av;
      rec.transform = t;
      rec.distance_before = rom_distance(db.records[i].rom, ref, w);
      aligned[i] = apply_transform(db.records[i].rom, t);
      rec.distance_after = rom_distance(aligned[i], ref, w);
      transforms[i] = t;
      out.records.push_back(std::move(rec));
    }
    const std::size_t L = angle_results.empty() ? static_cast<std::size_t>(ref.k())
                                                : truncation_length(angle_results, opts.theta_max);
    out.truncation_length = L;
    if (opts.truncate && L < static_cast<std::size_t>(ref.k())) {
      if (L == 0) {
        for (auto& rec : out.records) {
          rec.diagnostics.warn("no direction is consistent below theta_max; truncation skipped");
        }
      } else {
        // Reference keeps the L directions best represented across the
        // database; every record is fitted to those by a semi-orthogonal map.
        auto consensus = [&](const std::vector<Mat>& R) {
          Mat acc = Mat::Zero(ref.k(), ref.k());
          for (std::size_t i = 0; i < R.size(); ++i) {
            if (i != i0) acc += R[i].transpose() * R[i];
          }
          return sym_eig(0.5 * (acc + acc.transpose())).vectors.leftCols(static_cast<Eigen::Index>(L)).eval();
        };
        const Mat TV = consensus(RV);
        const Mat TW = consensus(RW);
        for (std::size_t i = 0; i < db.size(); ++i) {
          const Mat SV = i == i0 ? TV : thin_polar(RV[i] * TV);
          const Mat SW = i == i0 ? TW : thin_polar(RW[i] * TW);
          aligned[i] = truncate_rom(db.records[i].rom, SV, SW, L);
        }
        out.database.k = static_cast<Eigen::Index>(L);
        out.database.bases.assign(db.size(), std::nullopt);
      }
    }
  } else {
    const bool petrov = opts.mode == ConsistencyMode::FixedPointPG;
    for (std::size_t i = 0; i < db.size(); ++i) {
      RecordAlignment rec;
      rec.index = i;
      rec.diagnostics = wdiag;
      rec.distance_before = rom_distance(db.records[i].rom, ref, w);
      if (i == i0) {
        rec.transform = TransformPair::identity(ref.k());
        aligned[i] = ref;
      } else {
        FixedPointReport rep = petrov ? fixed_point_petrov_galerkin(db.records[i].rom, ref, w, opts.fixed_point)
                                      : fixed_point_galerkin(db.records[i].rom, ref, w, opts.fixed_point);
        if (!rep.converged) {
          rec.diagnostics.warn("fixed point reached max_iters without converging; best iterate kept");
        }
        rec.transform = rep.transform;
        aligned[i] = apply_transform(db.records[i].rom, rep.transform);
        rec.report = std::move(rep);
      }
      rec.distance_after = rom_distance(aligned[i], ref, w);
      transforms[i] = rec.transform;
      out.records.push_back(std::move(rec));
    }
  }

  // Single commit once every alignment has succeeded.
  for (std::size_t i = 0; i < db.size(); ++i) {
    out.database.records[i].rom = aligned[i];
    if (aligned[i].k() == db.records[i].rom.k()) {
      const auto& prev = db.records[i].transform_applied;
      TransformPair t = transforms[i];
      if (prev) t = {prev->Q * t.Q, prev->Z * t.Z};
      out.database.records[i].transform_applied = t;
    } else {
      out.database.records[i].transform_applied.reset();
    }
  }
  out.database.consistency = {opts.mode, i0};
  return out;
}

double max_pairwise_distance(const RomDatabase& db, std::size_t reference_index) {
  if (reference_index >= db.size()) throw Error(ErrorKind::InvalidInput, "reference index out of range");
  const DistanceWeights w = normalization_weights(db.records[reference_index].rom);
  double m = 0.0;
  for (std::size_t i = 0; i < db.size(); ++i) {
    for (std::size_t j = i + 1; j < db.size(); ++j) {
      m = std::max(m, rom_distance(db.records[i].rom, db.records[j].rom, w));
    }
  }
  return m;
}

}  // namespace romdb
