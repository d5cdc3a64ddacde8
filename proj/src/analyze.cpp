#include "romdb/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "romdb/dbstore.hpp"

namespace romdb {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

CMat slot_c(const Rom& rom, Slot s) { return rom.slot(s).to_complex(); }

/// Pencil (A, E) of the state-space form; second order uses the companion linearization.
void state_pencil(const Rom& rom, CMat& A, CMat& E) {
  const Eigen::Index k = rom.k();
  if (rom.order() == RomOrder::First) {
    A = slot_c(rom, Slot::A);
    E = slot_c(rom, Slot::E);
    return;
  }
  A = CMat::Zero(2 * k, 2 * k);
  E = CMat::Identity(2 * k, 2 * k);
  A.topRightCorner(k, k) = CMat::Identity(k, k);
  A.bottomLeftCorner(k, k) = -slot_c(rom, Slot::K);
  A.bottomRightCorner(k, k) = -slot_c(rom, Slot::C);
  E.bottomRightCorner(k, k) = slot_c(rom, Slot::M);
}

double max_real(const CVec& v) {
  double m = -kInf;
  for (Eigen::Index i = 0; i < v.size(); ++i) m = std::max(m, v(i).real());
  return m;
}

/// Mode labels at the start of a sweep: upper-half-plane eigenvalues sorted by modulus;
/// lower-half ones take the label of their conjugate partner.
std::vector<std::size_t> initial_labels(const CVec& v) {
  const auto n = static_cast<std::size_t>(v.size());
  std::vector<std::size_t> upper;
  for (std::size_t i = 0; i < n; ++i)
    if (v(static_cast<Eigen::Index>(i)).imag() >= 0.0) upper.push_back(i);
  std::stable_sort(upper.begin(), upper.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(v(static_cast<Eigen::Index>(a))) < std::abs(v(static_cast<Eigen::Index>(b)));
  });
  std::vector<std::size_t> label(n, 0);
  for (std::size_t r = 0; r < upper.size(); ++r) label[upper[r]] = r;
  for (std::size_t i = 0; i < n; ++i) {
    const cplx li = v(static_cast<Eigen::Index>(i));
    if (li.imag() >= 0.0) continue;
    double best = kInf;
    for (std::size_t r = 0; r < upper.size(); ++r) {
      const double d = std::abs(std::conj(v(static_cast<Eigen::Index>(upper[r]))) - li);
      if (d < best) {
        best = d;
        label[i] = r;
      }
    }
  }
  return label;
}

double min_gap(const CVec& v) {
  double g = kInf;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    for (Eigen::Index j = i + 1; j < v.size(); ++j) g = std::min(g, std::abs(v(i) - v(j)));
  return g;
}

/// Greedy nearest-neighbour matching; returns perm with next(perm[i]) continuing prev(i).
std::vector<Eigen::Index> match(const CVec& prev, const CVec& next, bool& ambiguous) {
  const Eigen::Index n = prev.size();
  std::vector<std::tuple<double, Eigen::Index, Eigen::Index>> pairs;
  pairs.reserve(static_cast<std::size_t>(n * n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) pairs.emplace_back(std::abs(prev(i) - next(j)), i, j);
  std::sort(pairs.begin(), pairs.end());
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n), -1);
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  double moved = 0.0;
  for (const auto& [d, i, j] : pairs) {
    if (perm[static_cast<std::size_t>(i)] >= 0 || used[static_cast<std::size_t>(j)]) continue;
    perm[static_cast<std::size_t>(i)] = j;
    used[static_cast<std::size_t>(j)] = true;
    moved = std::max(moved, d);
  }
  const double gap = min_gap(prev);
  if (std::isfinite(gap) && moved > 0.5 * gap) ambiguous = true;
  return perm;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

ParameterPoint clip(std::vector<double> c, const Box& b) {
  for (std::size_t a = 0; a < c.size(); ++a) c[a] = std::clamp(c[a], b.lower[a], b.upper[a]);
  return ParameterPoint(std::move(c));
}

}  // namespace

void validate_grid(const std::vector<double>& grid, const char* field) {
  if (grid.empty()) throw Error(ErrorKind::InvalidInput, "grid is empty", field);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw Error(ErrorKind::InvalidInput, "grid value is not finite", field);
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw Error(ErrorKind::InvalidInput, "grid must be strictly ascending", field);
  }
}

FrequencyResponse frequency_response(const Rom& rom, const std::vector<double>& grid, const CVec& u) {
  validate_grid(grid);
  if (u.size() != rom.n_inputs()) throw Error(ErrorKind::InvalidInput, "input length differs from N_i", "input");
  FrequencyResponse out;
  out.grid = grid;
  out.outputs = CMat::Constant(rom.n_outputs(), static_cast<Eigen::Index>(grid.size()), cplx(kNaN, kNaN));
  out.valid.assign(grid.size(), false);
  const cplx j(0.0, 1.0);
  const CVec bu = slot_c(rom, Slot::B) * u;
  const CMat G = slot_c(rom, Slot::G);
  const CVec hu = slot_c(rom, Slot::H) * u;
  CMat P0, P1, P2;
  if (rom.order() == RomOrder::First) {
    P0 = -slot_c(rom, Slot::A);
    P1 = slot_c(rom, Slot::E);
  } else {
    P0 = slot_c(rom, Slot::K);
    P1 = slot_c(rom, Slot::C);
    P2 = slot_c(rom, Slot::M);
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w = grid[i];
    CMat S = P0 + (j * w) * P1;
    if (rom.order() == RomOrder::Second) S -= (w * w) * P2;
    Eigen::PartialPivLU<CMat> lu(S);
    if (!(lu.rcond() > 1e-14)) continue;
    const CVec q = lu.solve(bu);
    if (!q.allFinite()) continue;
    out.outputs.col(static_cast<Eigen::Index>(i)) = G * q + hu;
    out.valid[i] = true;
  }
  return out;
}

double db_value(cplx y) {
  const double m = std::max(std::abs(y), 1e-300);
  // Squaring the floor would underflow; split the logarithm instead.
  return 10.0 * std::log10(2.0 * std::numbers::pi) + 20.0 * std::log10(m);
}

Vec db_transform(const CVec& y) {
  Vec s(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) s(i) = db_value(y(i));
  return s;
}

EigenAnalysis eigen_analysis(const Rom& rom) {
  CMat A, E;
  state_pencil(rom, A, E);
  Eigen::PartialPivLU<CMat> lu(E);
  if (!(lu.rcond() > 1e-13))
    throw Error(ErrorKind::SingularPencil, rom.order() == RomOrder::First ? "E_r is singular" : "M_r is singular",
                rom.order() == RomOrder::First ? "E" : "M");
  const CMat T = lu.solve(A);
  Eigen::ComplexEigenSolver<CMat> es(T);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::SingularPencil, "eigenvalue iteration failed");
  EigenAnalysis out;
  out.values = es.eigenvalues();
  out.vectors = es.eigenvectors();
  out.damping_ratios.resize(out.values.size());
  out.frequencies.resize(out.values.size());
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    const double m = std::abs(out.values(i));
    out.damping_ratios(i) = m > 0.0 ? -out.values(i).real() / m : 0.0;
    out.frequencies(i) = std::abs(out.values(i).imag());
  }
  return out;
}

Rom closed_loop(const Rom& rom, double q) {
  if (rom.n_inputs() != rom.n_outputs())
    throw Error(ErrorKind::InvalidInput, "closed loop needs as many inputs as outputs", "B");
  std::vector<DenseMatrix> slots = rom.slots();
  const CMat bg = slot_c(rom, Slot::B) * slot_c(rom, Slot::G);
  const auto span = slots_of(rom.order());
  const Slot target = rom.order() == RomOrder::First ? Slot::A : Slot::K;
  const double sign = rom.order() == RomOrder::First ? 1.0 : -1.0;
  for (std::size_t i = 0; i < span.size(); ++i) {
    if (span[i] != target) continue;
    const CMat x = slots[i].to_complex() + (sign * q) * bg;
    slots[i] = rom.field() == ScalarField::Real ? DenseMatrix(Mat(x.real())) : DenseMatrix::from_complex(x);
  }
  return Rom::from_slots(rom.order(), std::move(slots));
}

CriticalResult critical_parameter(const RomFamily& family, const CriticalOptions& opts, Diagnostics* diag) {
  if (!(opts.q_hi > opts.q_lo) || !(opts.tol > 0.0) || opts.scan_steps < 1)
    throw Error(ErrorKind::InvalidInput, "critical_parameter needs q_lo < q_hi, tol > 0 and scan_steps >= 1", "q_range");
  auto eig = [&](double q) { return eigen_analysis(family(q)).values; };

  CVec prev = eig(opts.q_lo);
  if (max_real(prev) >= 0.0)
    throw Error(ErrorKind::NoCrossing, "family is not stable at the start of the range", "q_range", opts.q_lo);
  // labels[i]: mode label of the i-th entry of the current eigenvalue vector
  std::vector<std::size_t> labels = initial_labels(prev);
  CriticalResult res;
  double a = opts.q_lo;
  double b = opts.q_hi;
  bool bracketed = false;
  CVec at_b;
  for (int s = 1; s <= opts.scan_steps; ++s) {
    const double q = opts.q_lo + (opts.q_hi - opts.q_lo) * static_cast<double>(s) / opts.scan_steps;
    const CVec next = eig(q);
    const auto perm = match(prev, next, res.ambiguous);
    std::vector<std::size_t> nl(labels.size());
    for (std::size_t i = 0; i < perm.size(); ++i) nl[static_cast<std::size_t>(perm[i])] = labels[i];
    labels = std::move(nl);
    if (max_real(next) > 0.0) {
      b = q;
      at_b = next;
      bracketed = true;
      break;
    }
    a = q;
    prev = next;
  }
  if (!bracketed)
    throw Error(ErrorKind::NoCrossing, "no eigenvalue crosses the imaginary axis in the range", "q_range", opts.q_hi);

  // Bisection on the sign of the rightmost real part, tracking labels along the way.
  CVec cur_b = at_b;
  std::vector<std::size_t> labels_b = labels;
  CVec cur_a = prev;
  while (b - a > opts.tol) {
    const double m = 0.5 * (a + b);
    const CVec v = eig(m);
    ++res.bisections;
    bool amb = false;
    const auto perm = match(cur_b, v, amb);
    std::vector<std::size_t> nl(labels_b.size());
    for (std::size_t i = 0; i < perm.size(); ++i) nl[static_cast<std::size_t>(perm[i])] = labels_b[i];
    if (max_real(v) > 0.0) {
      b = m;
      cur_b = v;
      labels_b = std::move(nl);
    } else {
      a = m;
      cur_a = v;
    }
  }
  Eigen::Index idx = 0;
  for (Eigen::Index i = 1; i < cur_b.size(); ++i)
    if (cur_b(i).real() > cur_b(idx).real()) idx = i;
  res.q_crit = b;
  res.eigenvalue = cur_b(idx);
  res.mode_index = labels_b[static_cast<std::size_t>(idx)];
  if (res.ambiguous && diag) diag->warn("eigenvalue tracking ambiguous: two eigenvalues moved closer than half their gap");
  return res;
}

Mat time_response(const Rom& rom, const Mat& u, const TimeOptions& opts) {
  if (rom.field() != ScalarField::Real) throw Error(ErrorKind::InvalidInput, "time integration needs a real ROM");
  if (!(opts.dt > 0.0)) throw Error(ErrorKind::InvalidInput, "dt must be positive", "dt");
  if (u.rows() != rom.n_inputs() || u.cols() < 1)
    throw Error(ErrorKind::InvalidInput, "input samples must be N_i x (steps + 1)", "input");
  const Eigen::Index k = rom.k();
  const double dt = opts.dt;
  const Mat& B = rom.slot(Slot::B).re();
  const Mat& G = rom.slot(Slot::G).re();
  const Mat& H = rom.slot(Slot::H).re();
  Mat y(rom.n_outputs(), u.cols());
  Vec q = opts.q0 ? *opts.q0 : Vec::Zero(k);
  if (q.size() != k) throw Error(ErrorKind::InvalidInput, "initial state length differs from k", "q0");

  if (rom.order() == RomOrder::First) {
    const Mat& E = rom.slot(Slot::E).re();
    const Mat& A = rom.slot(Slot::A).re();
    Eigen::PartialPivLU<Mat> mass(E);
    if (!(mass.rcond() > 1e-13)) throw Error(ErrorKind::SingularMatrix, "E_r is singular", "E");
    Eigen::PartialPivLU<Mat> lhs(E - 0.5 * dt * A);
    const Mat rhs_op = E + 0.5 * dt * A;
    y.col(0) = G * q + H * u.col(0);
    for (Eigen::Index n = 0; n + 1 < u.cols(); ++n) {
      q = lhs.solve(rhs_op * q + 0.5 * dt * B * (u.col(n) + u.col(n + 1)));
      y.col(n + 1) = G * q + H * u.col(n + 1);
    }
    return y;
  }

  const Mat& M = rom.slot(Slot::M).re();
  const Mat& C = rom.slot(Slot::C).re();
  const Mat& K = rom.slot(Slot::K).re();
  Eigen::PartialPivLU<Mat> mass(M);
  if (!(mass.rcond() > 1e-13)) throw Error(ErrorKind::SingularMatrix, "M_r is singular", "M");
  Vec v = opts.v0 ? *opts.v0 : Vec::Zero(k);
  if (v.size() != k) throw Error(ErrorKind::InvalidInput, "initial velocity length differs from k", "v0");
  Vec acc = mass.solve(B * u.col(0) - C * v - K * q);
  const double a0 = 4.0 / (dt * dt);
  const double a1 = 2.0 / dt;
  Eigen::PartialPivLU<Mat> lhs(K + a1 * C + a0 * M);
  y.col(0) = G * q + H * u.col(0);
  for (Eigen::Index n = 0; n + 1 < u.cols(); ++n) {
    const Vec rhs = B * u.col(n + 1) + M * (a0 * q + (4.0 / dt) * v + acc) + C * (a1 * q + v);
    const Vec qn = lhs.solve(rhs);
    const Vec an = a0 * (qn - q) - (4.0 / dt) * v - acc;
    v += 0.5 * dt * (acc + an);
    acc = an;
    q = qn;
    y.col(n + 1) = G * q + H * u.col(n + 1);
  }
  return y;
}

void InverseProblemSpec::validate(Eigen::Index n_outputs) const {
  if (wavenumbers.empty()) throw Error(ErrorKind::InvalidSpec, "inverse problem needs wavenumbers", "wavenumbers");
  if (measured.size() != wavenumbers.size())
    throw Error(ErrorKind::InvalidSpec, "one measured vector per wavenumber is required", "measured");
  for (std::size_t i = 0; i < measured.size(); ++i)
    if (measured[i].size() != n_outputs)
      throw Error(ErrorKind::InvalidSpec, "measured vector length differs from N_o",
                  "measured[" + std::to_string(i) + "]");
  if (!alpha.empty()) {
    if (alpha.size() != wavenumbers.size())
      throw Error(ErrorKind::InvalidSpec, "one weight per wavenumber is required", "alpha");
    for (double a : alpha)
      if (!(a > 0.0)) throw Error(ErrorKind::InvalidSpec, "weights must be positive", "alpha");
  }
  if (!(beta >= 0.0)) throw Error(ErrorKind::InvalidSpec, "beta must be nonnegative", "beta");
  if (domain.lower.empty()) throw Error(ErrorKind::InvalidSpec, "inverse problem needs a domain", "domain");
  ParameterDomain{domain, {}}.validate();
  if (!(annealing.cooling > 0.0 && annealing.cooling < 1.0) || annealing.proposals_per_level < 1 ||
      annealing.levels < 0 || !(annealing.step_fraction > 0.0))
    throw Error(ErrorKind::InvalidSpec, "invalid annealing schedule", "annealing");
  if (!(pattern.initial_step_fraction > 0.0) || !(pattern.min_step_fraction > 0.0))
    throw Error(ErrorKind::InvalidSpec, "invalid pattern-search steps", "pattern");
}

std::vector<Vec> db_outputs(const Rom& rom, const std::vector<double>& wavenumbers, const CVec& input) {
  const FrequencyResponse r = frequency_response(rom, wavenumbers, input);
  std::vector<Vec> out;
  out.reserve(wavenumbers.size());
  for (std::size_t i = 0; i < wavenumbers.size(); ++i) {
    if (!r.valid[i])
      throw Error(ErrorKind::Resonance, "reduced operator singular at " + fmt(wavenumbers[i]), "wavenumbers",
                  wavenumbers[i]);
    out.push_back(db_transform(r.outputs.col(static_cast<Eigen::Index>(i))));
  }
  return out;
}

double inverse_objective(const std::vector<Vec>& predicted, const ParameterPoint& mu, const InverseProblemSpec& spec) {
  double j = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double a = spec.alpha.empty() ? 1.0 : spec.alpha[i];
    j += a * (predicted[i] - spec.measured[i]).squaredNorm();
  }
  double m2 = 0.0;
  for (double c : mu.coords()) m2 += c * c;
  return j + 0.5 * spec.beta * m2;
}

InverseResult solve_inverse(const RomDatabase& db, const InverseProblemSpec& spec) {
  spec.validate(db.n_outputs);
  if (spec.domain.dim() != db.n_mu()) throw Error(ErrorKind::InvalidSpec, "domain dimension differs from the database", "domain");
  const CVec input = spec.input.size() ? spec.input : CVec::Ones(db.n_inputs);
  if (input.size() != db.n_inputs) throw Error(ErrorKind::InvalidSpec, "input length differs from N_i", "input");

  InverseResult res;
  auto evaluate = [&](const ParameterPoint& mu) {
    ++res.calls;
    try {
      const Rom rom = interpolate_rom(db, mu, spec.interpolation);
      return inverse_objective(db_outputs(rom, spec.wavenumbers, input), mu, spec);
    } catch (const Error& e) {
      ++res.rejected;
      if (res.rejected <= 5) res.diagnostics.warn(std::string("probe rejected: ") + to_string(e.kind()) + ": " + e.what());
      return kInf;
    }
  };

  const Box& box = spec.domain;
  const std::size_t n = box.dim();
  std::vector<double> width(n);
  for (std::size_t a = 0; a < n; ++a) width[a] = box.upper[a] - box.lower[a];

  ParameterPoint cur = box.center();
  double fcur = evaluate(cur);
  ParameterPoint best = cur;
  double fbest = fcur;

  // Simulated annealing: geometric cooling, Gaussian proposals clipped to the box.
  std::mt19937_64 rng(spec.annealing.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  double T = std::isfinite(fcur) && fcur > 0.0 ? fcur : 1.0;
  for (int level = 0; level < spec.annealing.levels; ++level) {
    for (int p = 0; p < spec.annealing.proposals_per_level; ++p) {
      std::vector<double> c = cur.coords();
      for (std::size_t a = 0; a < n; ++a) c[a] += spec.annealing.step_fraction * width[a] * nd(rng);
      const ParameterPoint cand = clip(std::move(c), box);
      const double f = evaluate(cand);
      if (!std::isfinite(f)) continue;
      if (!std::isfinite(fcur) || f <= fcur || ud(rng) < std::exp(-(f - fcur) / T)) {
        cur = cand;
        fcur = f;
        if (f < fbest) {
          best = cand;
          fbest = f;
        }
      }
    }
    T *= spec.annealing.cooling;
    res.trace.push_back(fbest);
  }

  // Compass pattern search polish from the best annealing point.
  double step = spec.pattern.initial_step_fraction;
  while (step >= spec.pattern.min_step_fraction &&
         res.calls < static_cast<std::size_t>(spec.pattern.max_evaluations) + 1 +
                         static_cast<std::size_t>(spec.annealing.levels * spec.annealing.proposals_per_level)) {
    bool improved = false;
    for (std::size_t a = 0; a < n && !improved; ++a) {
      for (double dir : {1.0, -1.0}) {
        std::vector<double> c = best.coords();
        c[a] += dir * step * width[a];
        const ParameterPoint cand = clip(std::move(c), box);
        if (cand == best) continue;
        const double f = evaluate(cand);
        if (f < fbest) {
          best = cand;
          fbest = f;
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  res.trace.push_back(fbest);
  if (!std::isfinite(fbest))
    throw Error(ErrorKind::OutOfDomain, "every probe of the inverse problem failed to interpolate", "domain");
  res.mu = best;
  res.objective = fbest;
  return res;
}

double recovery_error(const ParameterPoint& found, const ParameterPoint& truth, const Box& domain) {
  if (found.dim() != truth.dim() || found.dim() != domain.dim())
    throw Error(ErrorKind::InvalidInput, "recovery_error needs matching dimensions");
  double e = 0.0;
  for (std::size_t c = 0; c < found.dim(); ++c) {
    const double w = domain.upper[c] - domain.lower[c];
    if (!(w > 0.0)) throw Error(ErrorKind::InvalidDomain, "zero-width domain axis", "domain");
    e = std::max(e, std::abs(found[c] - truth[c]) / w);
  }
  return e;
}

void SamplerConfig::validate(std::size_t n_mu) const {
  if (!(tolerance > 0.0 && tolerance < 1.0)) throw Error(ErrorKind::InvalidSpec, "tolerance must lie in (0, 1)", "tolerance");
  if (max_refinements < 0) throw Error(ErrorKind::InvalidSpec, "max_refinements must be >= 0", "max_refinements");
  if (initial_lattice.size() != n_mu)
    throw Error(ErrorKind::InvalidSpec, "initial lattice needs one count per axis", "initial_lattice");
  for (std::size_t c : initial_lattice)
    if (c < 2) throw Error(ErrorKind::InvalidSpec, "initial lattice needs >= 2 nodes per axis", "initial_lattice");
}

double sampler_error(const RomDatabase& db, const SamplerProblem& problem, SamplerMetric metric,
                     const ParameterPoint& center) {
  const std::vector<Vec> truth = problem.truth(center);
  if (metric == SamplerMetric::OutputError) {
    const CVec input = problem.inverse.input.size() ? problem.inverse.input : CVec::Ones(db.n_inputs);
    const auto pred = db_outputs(interpolate_rom(db, center, problem.inverse.interpolation), problem.inverse.wavenumbers,
                                 input);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      num = std::max(num, (pred[i] - truth[i]).cwiseAbs().maxCoeff());
      den = std::max(den, truth[i].cwiseAbs().maxCoeff());
    }
    return den > 0.0 ? num / den : num;
  }
  InverseProblemSpec spec = problem.inverse;
  spec.measured = truth;
  spec.domain = problem.domain;
  const InverseResult r = solve_inverse(db, spec);
  return recovery_error(r.mu, center, problem.domain);
}

namespace {

struct Lattice {
  std::map<std::vector<double>, std::size_t> index;  // node coordinates -> record
  std::vector<ParameterPoint> nodes;
};

std::vector<std::vector<double>> box_nodes(const Box& b, int per_axis) {
  std::vector<std::vector<double>> axes(b.dim());
  for (std::size_t a = 0; a < b.dim(); ++a)
    for (int i = 0; i < per_axis; ++i)
      axes[a].push_back(b.lower[a] + (b.upper[a] - b.lower[a]) * static_cast<double>(i) / (per_axis - 1));
  std::vector<std::vector<double>> out;
  for (const auto& p : lattice_points(axes)) out.push_back(p.coords());
  return out;
}

}  // namespace

SamplerResult adaptive_sample(const SamplerProblem& problem, const SamplerConfig& config) {
  const std::size_t n_mu = problem.domain.dim();
  config.validate(n_mu);
  ParameterDomain{problem.domain, {}}.validate();
  if (!problem.build || !problem.truth) throw Error(ErrorKind::InvalidSpec, "sampler needs a builder and a truth oracle");

  std::vector<RomRecord> records;
  Lattice lattice;
  auto add_node = [&](const std::vector<double>& c) {
    if (lattice.index.count(c)) return;
    const ParameterPoint p(c);
    records.push_back(problem.build(p));
    lattice.index[c] = records.size() - 1;
  };

  // Initial cells from the lattice.
  std::vector<std::vector<double>> axes(n_mu);
  for (std::size_t a = 0; a < n_mu; ++a) {
    const auto cnt = config.initial_lattice[a];
    for (std::size_t i = 0; i < cnt; ++i)
      axes[a].push_back(problem.domain.lower[a] +
                        (problem.domain.upper[a] - problem.domain.lower[a]) * static_cast<double>(i) /
                            static_cast<double>(cnt - 1));
  }
  std::vector<Box> cells;
  {
    std::vector<std::vector<double>> cell_axes(n_mu);
    for (std::size_t a = 0; a < n_mu; ++a)
      for (std::size_t i = 0; i + 1 < axes[a].size(); ++i) cell_axes[a].push_back(static_cast<double>(i));
    for (const auto& idx : lattice_points(cell_axes)) {
      Box b;
      for (std::size_t a = 0; a < n_mu; ++a) {
        const auto i = static_cast<std::size_t>(idx[a]);
        b.lower.push_back(axes[a][i]);
        b.upper.push_back(axes[a][i + 1]);
      }
      cells.push_back(b);
    }
  }
  for (const auto& p : lattice_points(axes)) add_node(p.coords());

  auto assemble = [&]() {
    RomDatabase db = RomDatabase::create(ParameterDomain{problem.domain, {}}, records);
    db.domain.subdomains = cells;
    db.partition.assign(cells.size(), {});
    for (std::size_t s = 0; s < cells.size(); ++s)
      for (const auto& c : box_nodes(cells[s], 2)) db.partition[s].push_back(lattice.index.at(c));
    db.scheme = SchemeSpec{};
    db.validate();
    if (problem.finalize) db = problem.finalize(std::move(db));
    return db;
  };

  SamplerResult result;
  for (int iter = 0;; ++iter) {
    RomDatabase db = assemble();
    SamplerIteration log;
    log.iteration = iter;
    log.database_size = db.size();
    std::vector<std::size_t> failing;
    for (std::size_t s = 0; s < cells.size(); ++s) {
      const ParameterPoint c = cells[s].center();
      double e;
      try {
        e = sampler_error(db, problem, config.metric, c);
      } catch (const Error&) {
        e = kInf;
      }
      log.cells.push_back({cells[s], c, e});
      if (!(e <= config.tolerance)) failing.push_back(s);
    }
    if (failing.empty() || iter >= config.max_refinements) {
      for (std::size_t s : failing) result.failing.push_back(log.cells[s]);
      result.converged = failing.empty();
      result.log.push_back(std::move(log));
      result.database = std::move(db);
      return result;
    }
    // Split failing cells into 2^N_mu children and build every new lattice node.
    std::vector<Box> next;
    std::vector<bool> split(cells.size(), false);
    for (std::size_t s : failing) split[s] = true;
    for (std::size_t s = 0; s < cells.size(); ++s) {
      if (!split[s]) {
        next.push_back(cells[s]);
        continue;
      }
      const Box& b = cells[s];
      for (const auto& c : box_nodes(b, 3)) add_node(c);
      std::vector<std::vector<double>> halves(n_mu, {0.0, 1.0});
      for (const auto& h : lattice_points(halves)) {
        Box child;
        for (std::size_t a = 0; a < n_mu; ++a) {
          const double mid = 0.5 * (b.lower[a] + b.upper[a]);
          child.lower.push_back(h[a] == 0.0 ? b.lower[a] : mid);
          child.upper.push_back(h[a] == 0.0 ? mid : b.upper[a]);
        }
        next.push_back(child);
      }
    }
    log.splits = failing.size();
    result.log.push_back(std::move(log));
    cells = std::move(next);
  }
}

std::vector<StabilitySample> stability_curve(const RomDatabase& db, const ParameterPoint& base, std::size_t axis,
                                             std::size_t samples, const CriticalOptions& copts,
                                             const InterpolationOptions& iopts) {
  if (base.dim() != db.n_mu()) throw Error(ErrorKind::InvalidInput, "base point dimension differs from the database", "target.coords");
  if (axis >= db.n_mu()) throw Error(ErrorKind::InvalidInput, "axis out of range", "axis");
  if (samples < 2) throw Error(ErrorKind::InvalidInput, "stability curve needs at least 2 samples", "samples");
  const Box& box = db.domain.box;
  std::vector<StabilitySample> out;
  for (std::size_t i = 0; i < samples; ++i) {
    std::vector<double> c = base.coords();
    const double x = box.lower[axis] + (box.upper[axis] - box.lower[axis]) * static_cast<double>(i) /
                                           static_cast<double>(samples - 1);
    c[axis] = x;
    StabilitySample s;
    s.x = x;
    s.point = ParameterPoint(c);
    try {
      const Rom rom = interpolate_rom(db, s.point, iopts);
      s.result = critical_parameter([&](double q) { return closed_loop(rom, q); }, copts);
      s.ok = true;
    } catch (const Error& e) {
      s.error = to_string(e.kind());
      s.message = e.what();
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string response_csv_header(std::size_t n_mu) {
  std::ostringstream os;
  for (std::size_t a = 0; a < n_mu; ++a) os << "mu" << a << ',';
  os << "x,output,re,im,db\n";
  return os.str();
}

std::string response_csv(const ParameterPoint& point, const FrequencyResponse& r) {
  std::ostringstream os;
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    for (Eigen::Index o = 0; o < r.outputs.rows(); ++o) {
      for (double c : point.coords()) os << fmt(c) << ',';
      const cplx y = r.outputs(o, static_cast<Eigen::Index>(i));
      os << fmt(r.grid[i]) << ',' << o << ',';
      if (r.valid[i])
        os << fmt(y.real()) << ',' << fmt(y.imag()) << ',' << fmt(db_value(y)) << '\n';
      else
        os << "nan,nan,nan\n";
    }
  }
  return os.str();
}

std::string stability_csv(const std::vector<StabilitySample>& curve, std::size_t n_mu) {
  std::ostringstream os;
  for (std::size_t a = 0; a < n_mu; ++a) os << "mu" << a << ',';
  os << "x,q_crit,mode,ambiguous,status\n";
  for (const auto& s : curve) {
    for (double c : s.point.coords()) os << fmt(c) << ',';
    os << fmt(s.x) << ',';
    if (s.ok)
      os << fmt(s.result.q_crit) << ',' << s.result.mode_index << ',' << (s.result.ambiguous ? 1 : 0) << ",ok\n";
    else
      os << "nan,,," << s.error << '\n';
  }
  return os.str();
}

}  // namespace romdb
