#include "support/fixtures.hpp"

#include <cmath>
#include <numbers>

namespace fx {

Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

Mat random_spd(Eigen::Index n, std::mt19937_64& rng, double shift) {
  const Mat a = random_mat(n, n, rng);
  return a * a.transpose() / static_cast<double>(n) + shift * Mat::Identity(n, n);
}

Rom random_rom(RomOrder order, ScalarField field, Eigen::Index k, std::uint64_t seed, Eigen::Index n_in,
               Eigen::Index n_out) {
  std::mt19937_64 rng(seed);
  auto dm = [&](Eigen::Index r, Eigen::Index c) {
    Mat re = random_mat(r, c, rng);
    if (field == ScalarField::Real) return DenseMatrix(re);
    return DenseMatrix(re, 0.5 * random_mat(r, c, rng));
  };
  const DenseMatrix B = dm(k, n_in);
  const DenseMatrix G = dm(n_out, k);
  const DenseMatrix H = dm(n_out, n_in);
  if (order == RomOrder::First) return Rom::first_order(dm(k, k), dm(k, k), B, G, H);
  return Rom::second_order(dm(k, k), dm(k, k), dm(k, k), B, G, H);
}

RomDatabase scramble(const RomDatabase& db, std::uint64_t seed, bool galerkin) {
  std::mt19937_64 rng(seed);
  RomDatabase out = db;
  for (auto& r : out.records) {
    const Mat Q = random_orthogonal(db.k, rng);
    const Mat Z = galerkin ? Q : random_orthogonal(db.k, rng);
    r.rom = apply_transform(r.rom, TransformPair{Q, Z});
  }
  out.bases.assign(out.size(), std::nullopt);
  return out;
}

RomDatabase scrambled_database(const Rom& ref, std::size_t count, std::uint64_t seed, bool galerkin) {
  std::vector<RomRecord> recs;
  for (std::size_t i = 0; i < count; ++i) {
    const double x = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    recs.push_back(RomRecord{ParameterPoint{x}, ref, std::nullopt, std::nullopt});
  }
  return scramble(RomDatabase::create(ParameterDomain::from_bounds({0.0}, {1.0}), std::move(recs)), seed, galerkin);
}

ChainSpec acoustic_chain(std::size_t base_dofs) {
  ChainSpec c;
  c.dofs.base = static_cast<double>(base_dofs);
  c.dofs.law = AffineLaw{1.0, {0.2, 0.5}};
  c.density = 1.0;
  c.stiffness = 1.0;
  c.stiffness_law = AffineLaw{0.0, {1.0, 0.0}};
  c.loss_factor = 0.05;
  c.mass_loss = 0.02;
  c.input_locations = {1.0};
  c.output_locations = {0.25, 0.5, 0.75, 1.0};
  c.bump = MassBump{1.0, 0.1, AffineLaw{0.3, {0.0, 2.0}}};
  return c;
}

FamilySpec acoustic_family(std::size_t base_dofs, Eigen::Index derivatives, std::vector<double> wavenumbers) {
  FamilySpec f;
  f.system = acoustic_chain(base_dofs);
  f.method = RobMethod::Dgp;
  f.dgp.wavenumbers = std::move(wavenumbers);
  f.dgp.derivatives = static_cast<int>(derivatives);
  f.real_basis = true;
  return f;
}

std::vector<ParameterPoint> small_db_points() {
  return {ParameterPoint{0.95, 0.1}, ParameterPoint{0.975, 0.1}, ParameterPoint{0.95, 0.125},
          ParameterPoint{0.975, 0.125}};
}

FamilySpec small_db_family() {
  FamilySpec f = acoustic_family(41100, 2, {2.0, 3.0, 4.0, 5.0});
  auto& chain = std::get<ChainSpec>(f.system);
  chain.dofs.law = AffineLaw{1.0, {}};
  const std::vector<std::size_t> n = {41235, 40965, 41424, 40929};
  const auto pts = small_db_points();
  for (std::size_t i = 0; i < pts.size(); ++i) chain.dofs.table.emplace_back(pts[i].coords(), n[i]);
  return f;
}

ParameterDomain small_db_domain() { return ParameterDomain::from_bounds({0.95, 0.1}, {0.975, 0.125}); }

ParameterPoint small_db_target() { return ParameterPoint{0.9625, 0.1125}; }

ChainSpec dgp_chain() {
  ChainSpec c;
  c.dofs.base = 2000;
  c.loss_factor = 0.01;
  c.input_locations = {1.0};
  c.output_locations = {0.5, 1.0};
  return c;
}

std::vector<double> dgp_wavenumbers() { return {4.0 * std::numbers::pi, 6.0 * std::numbers::pi}; }

std::vector<double> dgp_band_grid(std::size_t points) {
  const auto k = dgp_wavenumbers();
  std::vector<double> g;
  for (std::size_t i = 0; i < points; ++i) g.push_back(k[0] + (k[1] - k[0]) * static_cast<double>(i) / static_cast<double>(points - 1));
  return g;
}

SamplerProblem sampler_problem() {
  FamilySpec f = acoustic_family(400, 2, {2.0, 3.0, 4.0, 5.0});
  SamplerProblem p;
  p.domain = Box{{0.9, 0.1}, {1.0, 0.2}};
  p.build = [f](const ParameterPoint& mu) { return build_record(mu, f); };
  std::vector<double> kappa;
  for (int i = 0; i < 9; ++i) kappa.push_back(2.1 + 2.8 * i / 8.0);
  p.truth = [f, kappa](const ParameterPoint& mu) {
    const CMat y = hdm_frequency_response(make_system(mu, f), kappa, CVec::Ones(1));
    std::vector<Vec> out;
    for (Eigen::Index i = 0; i < y.cols(); ++i) out.push_back(db_transform(y.col(i)));
    return out;
  };
  p.inverse.wavenumbers = kappa;
  p.inverse.alpha.assign(kappa.size(), 1.0);
  p.inverse.input = CVec::Ones(1);
  p.inverse.domain = p.domain;
  p.inverse.interpolation.allow_inconsistent = true;
  p.finalize = [](RomDatabase db) { return db; };
  return p;
}

FamilySpec flutter_family() {
  FirstOrderSpec s;
  s.oscillators = 6;
  s.seed = 11;
  s.frequency_law = AffineLaw{1.0, {-0.3, -0.002}};
  s.damping_law = AffineLaw{1.5, {-1.0, 0.003}};
  FamilySpec f;
  f.system = s;
  f.method = RobMethod::Pod;
  f.k = 8;
  f.pod_min = 0.2;
  f.pod_max = 5.0;
  return f;
}

std::vector<ParameterPoint> flutter_lattice() {
  return lattice_points({{0.6, 0.75, 0.9, 0.95, 1.0, 1.05, 1.1}, {0.0, 50.0, 100.0}});
}

ParameterDomain flutter_domain() { return ParameterDomain::from_bounds({0.6, 0.0}, {1.1, 100.0}); }

double max_db_error(const CMat& a, const CMat& b) {
  double e = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) e = std::max(e, std::abs(db_value(a(i, j)) - db_value(b(i, j))));
  return e;
}

}  // namespace fx
