#include "romdb/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

namespace romdb {
namespace {

using RealSp = Eigen::SparseMatrix<double>;

bool sparse_is_real(const SpMat& m) {
  for (int c = 0; c < m.outerSize(); ++c)
    for (SpMat::InnerIterator it(m, c); it; ++it)
      if (it.value().imag() != 0.0) return false;
  return true;
}

SpMat sparse_real_part(const SpMat& m) { return m.real().cast<cplx>(); }

RealSp to_real(const SpMat& m) { return m.real(); }

std::string point_text(const ParameterPoint& p) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < p.dim(); ++i) os << (i ? ", " : "") << p[i];
  os << ')';
  return os.str();
}

Eigen::Index node_at(double x, Eigen::Index n) {
  const auto idx = static_cast<Eigen::Index>(std::lround(x * static_cast<double>(n))) - 1;
  return std::clamp<Eigen::Index>(idx, 0, n - 1);
}

DenseMatrix dense_of(const CMat& m) {
  if (m.imag().isZero(0.0)) return DenseMatrix(Mat(m.real()));
  return DenseMatrix::from_complex(m);
}

/// Shifted operator of the frequency-domain system at w.
SpMat shifted(const HdmSystem& h, double w) {
  const cplx j(0.0, 1.0);
  if (h.order == RomOrder::First) return SpMat(j * w * h.E - h.A);
  return SpMat(h.K + j * w * h.C - (w * w) * h.M);
}

struct Factor {
  Eigen::SparseLU<SpMat> lu;
  double norm1 = 0.0;
};

void factorize(Factor& f, const SpMat& a, double w) {
  f.norm1 = 0.0;
  for (int c = 0; c < a.outerSize(); ++c) {
    double s = 0.0;
    for (SpMat::InnerIterator it(a, c); it; ++it) s += std::abs(it.value());
    f.norm1 = std::max(f.norm1, s);
  }
  f.lu.analyzePattern(a);
  f.lu.factorize(a);
  if (f.lu.info() != Eigen::Success) {
    std::ostringstream os;
    os << "shifted operator singular at " << w;
    throw Error(ErrorKind::Resonance, os.str(), "", w);
  }
}

CMat checked_solve(const Factor& f, const CMat& rhs, double w) {
  CMat x = f.lu.solve(rhs);
  const double rn = rhs.norm();
  if (!x.allFinite() || (rn > 0.0 && f.norm1 * x.norm() / rn > 1e14)) {
    std::ostringstream os;
    os << "shifted operator numerically singular at " << w;
    throw Error(ErrorKind::Resonance, os.str(), "", w);
  }
  return x;
}

void check_order(const HdmSystem& h, RomOrder want, const char* what) {
  if (h.order != want)
    throw Error(ErrorKind::InvalidInput, std::string(what) + " needs a " + to_string(want) + "-order system");
}

}  // namespace

bool HdmSystem::is_real() const {
  const bool ops = order == RomOrder::First ? sparse_is_real(E) && sparse_is_real(A)
                                            : sparse_is_real(M) && sparse_is_real(C) && sparse_is_real(K);
  return ops && B.imag().isZero(0.0) && G.imag().isZero(0.0) && H.imag().isZero(0.0);
}

HdmSystem HdmSystem::real_part() const {
  HdmSystem out = *this;
  if (order == RomOrder::First) {
    out.E = sparse_real_part(E);
    out.A = sparse_real_part(A);
  } else {
    out.M = sparse_real_part(M);
    out.C = sparse_real_part(C);
    out.K = sparse_real_part(K);
  }
  out.B = B.real().cast<cplx>();
  out.G = G.real().cast<cplx>();
  out.H = H.real().cast<cplx>();
  return out;
}

void HdmSystem::validate() const {
  const Eigen::Index N = n();
  auto sq = [&](const SpMat& m, const char* name) {
    if (m.rows() != N || m.cols() != N)
      throw Error(ErrorKind::InvalidInput, std::string("operator ") + name + " is not N x N", name);
  };
  if (order == RomOrder::First) {
    sq(E, "E");
    sq(A, "A");
  } else {
    sq(M, "M");
    sq(C, "C");
    sq(K, "K");
  }
  if (G.cols() != N) throw Error(ErrorKind::InvalidInput, "G must have N columns", "G");
  if (H.rows() != G.rows() || H.cols() != B.cols())
    throw Error(ErrorKind::InvalidInput, "H must be N_o x N_i", "H");
}

double AffineLaw::operator()(const ParameterPoint& p) const {
  double v = c0;
  for (std::size_t a = 0; a < c.size() && a < p.dim(); ++a) v += c[a] * p[a];
  return v;
}

std::size_t DofLaw::operator()(const ParameterPoint& p) const {
  for (const auto& [coords, n] : table) {
    if (coords.size() != p.dim()) continue;
    bool match = true;
    for (std::size_t a = 0; a < coords.size(); ++a)
      if (std::abs(coords[a] - p[a]) > 1e-12 * std::max(1.0, std::abs(coords[a]))) match = false;
    if (match) return n;
  }
  const double v = std::round(base * law(p));
  return v <= 0.0 ? 0 : static_cast<std::size_t>(v);
}

HdmSystem make_msd_chain(const ParameterPoint& p, const ChainSpec& spec) {
  const std::size_t n_dofs = spec.dofs(p);
  if (n_dofs < 4) throw Error(ErrorKind::InvalidSpec, "chain needs at least 4 dofs", "dofs");
  if (spec.input_locations.empty() || spec.output_locations.empty())
    throw Error(ErrorKind::InvalidSpec, "chain needs at least one input and one output location");
  const auto N = static_cast<Eigen::Index>(n_dofs);
  const double rho = spec.density * spec.density_law(p);
  const double ea = spec.stiffness * spec.stiffness_law(p);
  if (!(rho > 0.0) || !(ea > 0.0)) throw Error(ErrorKind::InvalidSpec, "density and stiffness must stay positive");
  const double nd = static_cast<double>(N);
  const double m = spec.continuum_scaling ? rho / nd : rho;
  const double kk = spec.continuum_scaling ? ea * nd : ea;

  double x0 = 0.0;
  if (spec.bump) x0 = spec.bump->position(p);

  std::vector<Eigen::Triplet<double>> mt, kt;
  for (Eigen::Index i = 0; i < N; ++i) {
    double mi = m;
    if (spec.bump) {
      const double x = static_cast<double>(i + 1) / nd;
      const double r = (x - x0) / spec.bump->width;
      mi *= 1.0 + spec.bump->amplitude * std::exp(-r * r);
    }
    mt.emplace_back(i, i, mi);
    kt.emplace_back(i, i, i + 1 < N ? 2.0 * kk : kk);
    if (i + 1 < N) {
      kt.emplace_back(i, i + 1, -kk);
      kt.emplace_back(i + 1, i, -kk);
    }
  }
  RealSp M0(N, N), K0(N, N);
  M0.setFromTriplets(mt.begin(), mt.end());
  K0.setFromTriplets(kt.begin(), kt.end());

  HdmSystem h;
  h.order = RomOrder::Second;
  h.point = p;
  const cplx j(0.0, 1.0);
  h.M = (1.0 + j * spec.mass_loss) * M0.cast<cplx>();
  h.K = (1.0 + j * spec.loss_factor) * K0.cast<cplx>();
  h.C = (spec.rayleigh_mass * M0 + spec.rayleigh_stiffness * K0).cast<cplx>();
  const auto ni = static_cast<Eigen::Index>(spec.input_locations.size());
  const auto no = static_cast<Eigen::Index>(spec.output_locations.size());
  h.B = CMat::Zero(N, ni);
  h.G = CMat::Zero(no, N);
  h.H = CMat::Zero(no, ni);
  for (Eigen::Index c = 0; c < ni; ++c) h.B(node_at(spec.input_locations[c], N), c) = 1.0;
  for (Eigen::Index r = 0; r < no; ++r) h.G(r, node_at(spec.output_locations[r], N)) = 1.0;
  return h;
}

HdmSystem make_first_order(const ParameterPoint& p, const FirstOrderSpec& spec) {
  if (spec.oscillators < 1 || spec.n_inputs < 1 || spec.n_outputs < 1)
    throw Error(ErrorKind::InvalidSpec, "first-order family needs oscillators, inputs and outputs");
  const auto n = static_cast<Eigen::Index>(spec.oscillators);
  const Eigen::Index N = 2 * n;
  const auto ni = static_cast<Eigen::Index>(spec.n_inputs);
  const auto no = static_cast<Eigen::Index>(spec.n_outputs);

  // Parameter-independent random ingredients; p only rescales them.
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto randn = [&](Eigen::Index r, Eigen::Index c) {
    Mat m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = nd(rng);
    return m;
  };
  const Mat R = randn(N, N);
  const Mat S = randn(N, N);
  const Mat P = randn(N, N);
  const Mat Bm = randn(N, ni) / std::sqrt(static_cast<double>(N));
  const Mat Gm = ni == no ? Mat(Bm.transpose()) : Mat(randn(no, N) / std::sqrt(static_cast<double>(N)));

  const double fl = spec.frequency_law(p);
  const double dl = spec.damping_law(p);
  if (!(fl > 0.0) || !(dl > 0.0)) throw Error(ErrorKind::InvalidSpec, "frequency and damping laws must stay positive");

  Mat D = Mat::Zero(N, N);
  Mat J = Mat::Zero(N, N);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = (spec.base_frequency + spec.frequency_spacing * static_cast<double>(i)) * fl;
    const double a = spec.damping * w * dl;
    D(2 * i, 2 * i) = a;
    D(2 * i + 1, 2 * i + 1) = a;
    J(2 * i, 2 * i + 1) = w;
    J(2 * i + 1, 2 * i) = -w;
  }
  const double scale = 1.0 / static_cast<double>(N);
  D += spec.coupling * dl * scale * R * R.transpose();
  J += spec.coupling * fl * 0.5 * (S - S.transpose()) / std::sqrt(static_cast<double>(N));
  const Mat E = Mat::Identity(N, N) + spec.mass_perturbation * scale * P * P.transpose();
  const Mat A = -D + J + spec.gain * Bm * Gm;

  HdmSystem h;
  h.order = RomOrder::First;
  h.point = p;
  h.E = E.cast<cplx>().sparseView();
  h.A = A.cast<cplx>().sparseView();
  h.B = Bm.cast<cplx>();
  h.G = Gm.cast<cplx>();
  h.H = CMat::Zero(no, ni);
  return h;
}

Rom two_mode_family(double s) {
  const double a1 = 1.0 + s;
  const double a2 = 2.0 - s;
  Mat A = Mat::Zero(4, 4);
  A << -a1, 1.0, 0.0, 0.0,
       -1.0, -a1, 0.0, 0.0,
       0.0, 0.0, -a2, 3.0,
       0.0, 0.0, -3.0, -a2;
  const Mat I = Mat::Identity(4, 4);
  return Rom::first_order(DenseMatrix(I), DenseMatrix(A), DenseMatrix(I), DenseMatrix(I),
                          DenseMatrix(Mat::Zero(4, 4)));
}

RobPair modal_rob(const HdmSystem& h, Eigen::Index k) {
  check_order(h, RomOrder::Second, "modal_rob");
  const Eigen::Index N = h.n();
  if (k < 1 || k > N) throw Error(ErrorKind::InvalidInput, "modal_rob needs 1 <= k <= N", "k");
  const RealSp K0 = to_real(h.K);
  const RealSp M0 = to_real(h.M);

  Mat V;
  if (N <= 600) {
    const Mat kd(K0), md(M0);
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(kd, md);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::NotSpd, "mass matrix is not positive definite", "M");
    V = es.eigenvectors().leftCols(k);
  } else {
    // Shift-invert subspace iteration with Rayleigh-Ritz on an oversampled block.
    double ratio = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) ratio = std::max(ratio, K0.coeff(i, i) / M0.coeff(i, i));
    const double sigma = -1e-8 * ratio;
    const RealSp shifted_k = K0 - sigma * M0;
    Eigen::SimplicialLDLT<RealSp> ldlt(shifted_k);
    if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::SingularMatrix, "modal shift factorization failed", "K");
    const Eigen::Index p = std::min(N, 2 * k + 8);
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat X(N, p);
    for (Eigen::Index c = 0; c < p; ++c)
      for (Eigen::Index r = 0; r < N; ++r) X(r, c) = nd(rng);
    Vec prev = Vec::Constant(k, 0.0);
    bool converged = false;
    for (int it = 0; it < 1000 && !converged; ++it) {
      const Mat Y = ldlt.solve(Mat(M0 * X));
      const Mat kp = Y.transpose() * (K0 * Y);
      const Mat mp = Y.transpose() * (M0 * Y);
      Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(0.5 * (kp + kp.transpose()), 0.5 * (mp + mp.transpose()));
      if (es.info() != Eigen::Success) throw Error(ErrorKind::NotSpd, "Rayleigh-Ritz step failed", "M");
      X = Y * es.eigenvectors();
      const Vec lam = es.eigenvalues().head(k);
      converged = ((lam - prev).array().abs() <= 1e-13 * lam.array().abs().max(1e-300)).all();
      prev = lam;
    }
    V = X.leftCols(k);
    for (Eigen::Index c = 0; c < k; ++c) {
      const Vec r = K0 * V.col(c) - prev(c) * (M0 * V.col(c));
      if (r.norm() > 1e-8 * (K0 * V.col(c)).norm())
        throw Error(ErrorKind::SingularMatrix, "modal subspace iteration did not converge", "K");
    }
  }
  // Sign convention: the free-end displacement-weighted sum is positive.
  for (Eigen::Index c = 0; c < k; ++c) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < N; ++r) s += static_cast<double>(r + 1) * V(r, c);
    if (s < 0.0) V.col(c) = -V.col(c);
  }
  RobPair out{DenseMatrix(V), DenseMatrix(V), Mat(M0)};
  if (N > 600) out.metric.reset();  // dense metric storage is not worth it at this size
  return out;
}

CMat frequency_snapshots(const HdmSystem& h, Eigen::Index k, double w_min, double w_max) {
  if (k < 1) throw Error(ErrorKind::InvalidInput, "snapshot count needs k >= 1", "k");
  if (!(w_max >= w_min)) throw Error(ErrorKind::InvalidInput, "frequency band is empty");
  const Eigen::Index count = 2 * k;
  const Eigen::Index ni = h.n_inputs();
  CMat S(h.n(), count * ni);
  for (Eigen::Index i = 0; i < count; ++i) {
    const double w = count == 1 ? w_min : w_min + (w_max - w_min) * static_cast<double>(i) / static_cast<double>(count - 1);
    Factor f;
    factorize(f, shifted(h, w), w);
    S.middleCols(i * ni, ni) = checked_solve(f, h.B, w);
  }
  return S;
}

RobPair pod_rob(const HdmSystem& h, const CMat& snapshots, Eigen::Index k, const std::optional<Mat>& metric) {
  const Eigen::Index N = snapshots.rows();
  if (h.n() != 0 && h.n() != N) throw Error(ErrorKind::InvalidInput, "snapshot rows differ from N", "snapshots");
  if (k < 1) throw Error(ErrorKind::InvalidInput, "pod_rob needs k >= 1", "k");
  Mat S;
  if (snapshots.imag().isZero(0.0)) {
    S = snapshots.real();
  } else {
    S.resize(N, 2 * snapshots.cols());
    S << snapshots.real(), snapshots.imag();
  }
  if (S.cols() < k)
    throw Error(ErrorKind::RankDeficiency,
                "fewer snapshots than requested k; achievable k = " + std::to_string(S.cols()), "k",
                static_cast<double>(S.cols()));
  Mat L;
  if (metric) {
    if (metric->rows() != N || metric->cols() != N) throw Error(ErrorKind::InvalidInput, "metric must be N x N", "metric");
    L = cholesky(*metric);
    S = L.transpose() * S;
  }
  const SvdResult sv = svd(S);
  const double s1 = sv.sigma.size() ? sv.sigma(0) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.sigma.size(); ++i)
    if (sv.sigma(i) > 1e-10 * s1 && s1 > 0.0) ++rank;
  if (rank < k)
    throw Error(ErrorKind::RankDeficiency, "snapshot rank below requested k; achievable k = " + std::to_string(rank),
                "k", static_cast<double>(rank));
  Mat V = sv.U.leftCols(k);
  if (metric) V = L.transpose().triangularView<Eigen::Upper>().solve(V);
  return RobPair{DenseMatrix(V), DenseMatrix(V), metric};
}

RobPair dgp_rob(const HdmSystem& h, const DgpOptions& opts) {
  check_order(h, RomOrder::Second, "dgp_rob");
  if (opts.wavenumbers.empty()) throw Error(ErrorKind::InvalidInput, "dgp_rob needs wavenumbers", "wavenumbers");
  if (opts.derivatives < 1) throw Error(ErrorKind::InvalidInput, "dgp_rob needs derivatives >= 1", "derivatives");
  const Eigen::Index N = h.n();
  const auto k = static_cast<Eigen::Index>(opts.wavenumbers.size()) * opts.derivatives;
  if (k > N) throw Error(ErrorKind::InvalidInput, "dgp basis dimension exceeds N", "derivatives");
  const cplx j(0.0, 1.0);
  const CVec f = h.B * CVec::Ones(h.n_inputs());

  CMat raw(N, k);
  Eigen::Index col = 0;
  for (double kappa : opts.wavenumbers) {
    Factor fac;
    factorize(fac, shifted(h, kappa), kappa);
    const SpMat d1 = j * h.C - (2.0 * kappa) * h.M;
    std::vector<CVec> w;
    for (int d = 0; d < opts.derivatives; ++d) {
      CVec rhs;
      if (d == 0) {
        rhs = f;
      } else {
        rhs = -static_cast<double>(d) * (d1 * w[d - 1]);
        if (d >= 2) rhs += static_cast<double>(d) * static_cast<double>(d - 1) * (h.M * w[d - 2]);
      }
      w.push_back(checked_solve(fac, rhs, kappa));
      raw.col(col++) = w.back();
    }
  }

  // Modified Gram-Schmidt with one reorthogonalization pass.
  CMat V(N, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const double n0 = raw.col(c).norm();
    if (!(n0 > 0.0)) throw Error(ErrorKind::RankDeficiency, "zero derivative vector", "derivatives", static_cast<double>(c));
    CVec v = raw.col(c) / n0;
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index i = 0; i < c; ++i) v -= V.col(i).dot(v) * V.col(i);
    const double nv = v.norm();
    if (nv < 1e-12)
      throw Error(ErrorKind::RankDeficiency,
                  "derivative vectors are linearly dependent; achievable k = " + std::to_string(c), "derivatives",
                  static_cast<double>(c));
    V.col(c) = v / nv;
  }
  const DenseMatrix basis = dense_of(V);
  return RobPair{basis, basis, std::nullopt};
}

Rom project(const HdmSystem& h, const RobPair& basis) {
  const Eigen::Index N = h.n();
  if (basis.V.rows() != N || basis.W.rows() != N || basis.V.cols() != basis.W.cols())
    throw Error(ErrorKind::InvalidInput, "basis shape does not match the system", "basis");
  h.validate();
  const CMat V = basis.V.to_complex();
  const CMat W = basis.W.to_complex();
  const CMat Wh = W.adjoint();
  auto red = [&](const SpMat& X) { return dense_of(Wh * (X * V)); };
  const DenseMatrix Br = dense_of(Wh * h.B);
  const DenseMatrix Gr = dense_of(h.G * V);
  const DenseMatrix Hr = dense_of(h.H);
  if (h.order == RomOrder::First) return Rom::first_order(red(h.E), red(h.A), Br, Gr, Hr);
  return Rom::second_order(red(h.M), red(h.C), red(h.K), Br, Gr, Hr);
}

CMat hdm_frequency_response(const HdmSystem& h, const std::vector<double>& grid, const CVec& u) {
  if (u.size() != h.n_inputs()) throw Error(ErrorKind::InvalidInput, "input vector length differs from N_i", "input");
  CMat Y(h.n_outputs(), static_cast<Eigen::Index>(grid.size()));
  const CVec bu = h.B * u;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Factor f;
    factorize(f, shifted(h, grid[i]), grid[i]);
    const CVec x = checked_solve(f, bu, grid[i]);
    Y.col(static_cast<Eigen::Index>(i)) = h.G * x + h.H * u;
  }
  return Y;
}

HdmSystem make_system(const ParameterPoint& p, const FamilySpec& spec) {
  if (const auto* chain = std::get_if<ChainSpec>(&spec.system)) return make_msd_chain(p, *chain);
  return make_first_order(p, std::get<FirstOrderSpec>(spec.system));
}

RobPair make_basis(const HdmSystem& h, const FamilySpec& spec) {
  const HdmSystem src = spec.real_basis ? h.real_part() : h;
  switch (spec.method) {
    case RobMethod::Modal:
      return modal_rob(src, spec.k);
    case RobMethod::Pod:
      return pod_rob(src, frequency_snapshots(src, spec.k, spec.pod_min, spec.pod_max), spec.k);
    case RobMethod::Dgp:
      return dgp_rob(src, spec.dgp);
  }
  throw Error(ErrorKind::InvalidSpec, "unknown basis method");
}

RomRecord build_record(const ParameterPoint& p, const FamilySpec& spec, RobPair* basis_out) {
  const HdmSystem h = make_system(p, spec);
  RobPair basis = make_basis(h, spec);
  RomRecord rec{p, project(h, basis), static_cast<std::size_t>(h.n()), std::nullopt};
  if (basis_out) *basis_out = std::move(basis);
  return rec;
}

RomDatabase build_database(const FamilySpec& spec, const ParameterDomain& domain,
                           const std::vector<ParameterPoint>& points) {
  if (points.empty()) throw Error(ErrorKind::InvalidInput, "no parameter points given", "points");
  std::vector<RomRecord> records;
  std::vector<std::optional<RobPair>> bases;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::string field = "points[" + std::to_string(i) + "]";
    if (points[i].dim() != domain.dim() || !domain.box.contains(points[i]))
      throw Error(ErrorKind::OutOfDomain, "point " + point_text(points[i]) + " lies outside the domain", field);
    try {
      RobPair basis;
      records.push_back(build_record(points[i], spec, &basis));
      bases.emplace_back(std::move(basis));
    } catch (const Error& e) {
      throw Error(e.kind(), "at point " + point_text(points[i]) + ": " + e.what(), field, e.detail());
    }
  }
  RomDatabase db = RomDatabase::create(domain, std::move(records));
  db.bases = std::move(bases);
  return db;
}

}  // namespace romdb
