#include "romdb/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "romdb/dbstore.hpp"

namespace romdb {

namespace {

constexpr double kCoordTol = 1e-12;

// Sorted distinct values of one axis; near-equal values (relative 1e-12) merge.
std::vector<double> axis_nodes(const std::vector<ParameterPoint>& pts, std::size_t axis) {
  std::vector<double> v;
  for (const auto& p : pts) v.push_back(p[axis]);
  std::sort(v.begin(), v.end());
  const double range = v.back() - v.front();
  const double tol = kCoordTol * std::max(range, 1.0);
  std::vector<double> out;
  for (double x : v) {
    if (out.empty() || x - out.back() > tol) out.push_back(x);
  }
  return out;
}

std::size_t node_index(const std::vector<double>& nodes, double x) {
  const double range = nodes.back() - nodes.front();
  const double tol = kCoordTol * std::max(range, 1.0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (std::abs(nodes[i] - x) <= tol) return i;
  }
  return nodes.size();
}

// Clamps t into [lo, hi] when it is outside only by roundoff; reports real extrapolation.
double check_axis(double t, double lo, double hi, const SchemeSpec& scheme, std::size_t axis,
                  Diagnostics* diag) {
  const double tol = kCoordTol * std::max(hi - lo, 1.0);
  if (t >= lo - tol && t <= hi + tol) return std::clamp(t, lo, hi);
  std::ostringstream os;
  os << "target coordinate " << t << " on axis " << axis << " lies outside [" << lo << ", " << hi << "]";
  if (!scheme.allow_extrapolation) throw Error(ErrorKind::Extrapolation, os.str(), "target.coords");
  if (diag) diag->warn("extrapolating: " + os.str());
  return t;
}

Vec axis_weights(const std::vector<double>& nodes, double t, AxisRule rule) {
  if (nodes.size() == 1) return Vec::Ones(1);
  if (rule == AxisRule::Linear || nodes.size() == 2) return linear_weights(nodes, t);
  return natural_spline_weights(nodes, t);
}

Vec lattice_weights(const std::vector<ParameterPoint>& pts, const ParameterPoint& target,
                    const SchemeSpec& scheme, Diagnostics* diag) {
  const std::size_t d = target.dim();
  std::vector<std::vector<double>> nodes(d);
  std::size_t total = 1;
  for (std::size_t a = 0; a < d; ++a) {
    nodes[a] = axis_nodes(pts, a);
    total *= nodes[a].size();
  }
  if (total != pts.size()) {
    throw Error(ErrorKind::InvalidSpec, "lattice scheme needs the points to form a full tensor grid", "scheme");
  }
  std::vector<Vec> w(d);
  for (std::size_t a = 0; a < d; ++a) {
    double t = target[a];
    if (nodes[a].size() == 1) {
      if (std::abs(t - nodes[a][0]) > kCoordTol * std::max(std::abs(t), 1.0)) {
        std::ostringstream os;
        os << "axis " << a << " has a single node; target coordinate " << t << " is off the lattice";
        if (!scheme.allow_extrapolation) throw Error(ErrorKind::Extrapolation, os.str(), "target.coords");
        if (diag) diag->warn("extrapolating: " + os.str());
      }
    } else {
      t = check_axis(t, nodes[a].front(), nodes[a].back(), scheme, a, diag);
    }
    w[a] = axis_weights(nodes[a], t, scheme.rule_for_axis(a));
  }
  Vec out(static_cast<Eigen::Index>(pts.size()));
  std::vector<int> hit(total, 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double wi = 1.0;
    std::size_t flat = 0;
    for (std::size_t a = 0; a < d; ++a) {
      const std::size_t j = node_index(nodes[a], pts[i][a]);
      wi *= w[a](static_cast<Eigen::Index>(j));
      flat = flat * nodes[a].size() + j;
    }
    if (hit[flat]++) {
      throw Error(ErrorKind::InvalidSpec, "lattice scheme: duplicated grid point", "scheme");
    }
    out(static_cast<Eigen::Index>(i)) = wi;
  }
  return out;
}

double rbf_kernel(double r, const SchemeSpec& s) {
  if (s.kernel == RbfKernel::ThinPlate) return r > 0.0 ? r * r * std::log(r) : 0.0;
  const double q = r / s.gaussian_width;
  return std::exp(-q * q);
}

Vec rbf_weights(const std::vector<ParameterPoint>& pts, const ParameterPoint& target, const SchemeSpec& scheme,
                const Box& bounds, Diagnostics* diag) {
  const std::size_t d = target.dim();
  const auto n = static_cast<Eigen::Index>(pts.size());
  if (pts.size() < d + 1) {
    throw Error(ErrorKind::InsufficientCoverage, "rbf scheme needs at least N_mu + 1 points", "scheme");
  }
  std::vector<double> t(d);
  for (std::size_t a = 0; a < d; ++a) t[a] = check_axis(target[a], bounds.lower[a], bounds.upper[a], scheme, a, diag);
  // Normalized coordinates keep the kernel width meaningful on every axis.
  auto norm = [&](double x, std::size_t a) {
    const double w = bounds.upper[a] - bounds.lower[a];
    return w > 0.0 ? (x - bounds.lower[a]) / w : 0.0;
  };
  Mat X(n, static_cast<Eigen::Index>(d));
  Vec xt(static_cast<Eigen::Index>(d));
  for (std::size_t a = 0; a < d; ++a) {
    xt(static_cast<Eigen::Index>(a)) = norm(t[a], a);
    for (Eigen::Index i = 0; i < n; ++i) X(i, static_cast<Eigen::Index>(a)) = norm(pts[static_cast<std::size_t>(i)][a], a);
  }
  const bool linear_poly = scheme.kernel == RbfKernel::ThinPlate;
  const Eigen::Index m = linear_poly ? static_cast<Eigen::Index>(d) + 1 : 1;
  Mat A = Mat::Zero(n + m, n + m);
  Vec rhs = Vec::Zero(n + m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) A(i, j) = rbf_kernel((X.row(i) - X.row(j)).norm(), scheme);
    A(i, n) = 1.0;
    A(n, i) = 1.0;
    if (linear_poly) {
      for (Eigen::Index a = 0; a < static_cast<Eigen::Index>(d); ++a) {
        A(i, n + 1 + a) = X(i, a);
        A(n + 1 + a, i) = X(i, a);
      }
    }
    rhs(i) = rbf_kernel((X.row(i).transpose() - xt).norm(), scheme);
  }
  rhs(n) = 1.0;
  if (linear_poly) rhs.segment(n + 1, static_cast<Eigen::Index>(d)) = xt;
  const Vec sol = solve(A, Mat(rhs)).col(0);
  return sol.head(n);
}

bool is_unit_vector(const Vec& w, std::size_t* which) {
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) == 1.0) {
      *which = static_cast<std::size_t>(i);
      ++count;
    } else if (w(i) != 0.0) {
      return false;
    }
  }
  return count == 1;
}

std::string entry_name(std::size_t i) { return "entry " + std::to_string(i); }

void check_spd(const std::vector<Mat>& entries) {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    try {
      (void)cholesky(entries[i]);
    } catch (const Error& e) {
      throw Error(ErrorKind::ManifoldViolation, entry_name(i) + " is not SPD: " + e.what(), {},
                  static_cast<double>(i));
    }
  }
}

void check_symmetric(const std::vector<Mat>& entries) {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!is_symmetric(entries[i])) {
      throw Error(ErrorKind::ManifoldViolation, entry_name(i) + " is not symmetric", {}, static_cast<double>(i));
    }
  }
}

void check_nonsingular(const std::vector<Mat>& entries) {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    try {
      (void)solve(entries[i], Mat::Identity(entries[i].rows(), entries[i].cols()));
    } catch (const Error& e) {
      throw Error(ErrorKind::ManifoldViolation, entry_name(i) + " is singular: " + e.what(), {},
                  static_cast<double>(i));
    }
  }
}

void check_shapes(const std::vector<Mat>& entries, const Vec& w) {
  if (entries.empty()) throw Error(ErrorKind::InvalidInput, "interpolation needs at least one entry");
  if (static_cast<std::size_t>(w.size()) != entries.size()) {
    throw Error(ErrorKind::InvalidInput, "weight count differs from entry count");
  }
  for (const auto& e : entries) {
    if (e.rows() != entries[0].rows() || e.cols() != entries[0].cols()) {
      throw Error(ErrorKind::InvalidInput, "interpolation entries differ in shape");
    }
  }
}

Mat flat_sum(const std::vector<Mat>& entries, const Vec& w) {
  Mat out = Mat::Zero(entries[0].rows(), entries[0].cols());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double wi = w(static_cast<Eigen::Index>(i));
    if (wi != 0.0) out += wi * entries[i];
  }
  return out;
}

Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

void check_partition_of_unity(const Vec& w, Diagnostics* diag) {
  if (std::abs(w.sum() - 1.0) > 1e-10 && diag) {
    diag->warn("tangent-space weights do not sum to 1; the interpolant leaves the tangent-space convention");
  }
}

Mat spd_tangent(const std::vector<Mat>& entries, const Vec& w, std::size_t ref, Diagnostics* diag) {
  check_partition_of_unity(w, diag);
  const SymEigResult e = sym_eig(entries[ref]);
  const Vec sq = e.values.array().sqrt();
  const Mat P_half = e.vectors * sq.asDiagonal() * e.vectors.transpose();
  const Mat P_mhalf = e.vectors * sq.cwiseInverse().asDiagonal() * e.vectors.transpose();
  Mat gamma = Mat::Zero(entries[0].rows(), entries[0].cols());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double wi = w(static_cast<Eigen::Index>(i));
    if (wi == 0.0 || i == ref) continue;  // log(I) = 0
    gamma += wi * mat_log_spd(sym(P_mhalf * entries[i] * P_mhalf));
  }
  return sym(P_half * mat_exp_sym(sym(gamma)) * P_half);
}

Mat nonsingular_tangent(const std::vector<Mat>& entries, const Vec& w, std::size_t ref, Diagnostics* diag) {
  check_partition_of_unity(w, diag);
  const Mat& P = entries[ref];
  const Eigen::Index k = P.rows();
  Mat gamma = Mat::Zero(k, k);
  try {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const double wi = w(static_cast<Eigen::Index>(i));
      if (wi == 0.0 || i == ref) continue;
      gamma += wi * mat_log_general(solve(P, entries[i]));
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::LogUndefined) throw;
    if (diag) diag->warn(std::string("nonsingular manifold: ") + e.what() + "; falling back to the full manifold");
    return flat_sum(entries, w);
  }
  return P * mat_exp_general(gamma);
}

}  // namespace

Vec linear_weights(const std::vector<double>& x, double t) {
  const std::size_t n = x.size();
  if (n == 0) throw Error(ErrorKind::InvalidInput, "linear_weights: no nodes");
  Vec w = Vec::Zero(static_cast<Eigen::Index>(n));
  if (n == 1) {
    w(0) = 1.0;
    return w;
  }
  std::size_t j = 0;
  while (j + 2 < n && t > x[j + 1]) ++j;
  const double h = x[j + 1] - x[j];
  const double a = (x[j + 1] - t) / h;
  const double b = (t - x[j]) / h;
  w(static_cast<Eigen::Index>(j)) = a;
  w(static_cast<Eigen::Index>(j + 1)) = b;
  return w;
}

Vec natural_spline_weights(const std::vector<double>& x, double t) {
  const std::size_t n = x.size();
  if (n < 3) return linear_weights(x, t);
  const auto N = static_cast<Eigen::Index>(n);
  // Second derivatives Mpp = S y with natural end conditions Mpp_0 = Mpp_{n-1} = 0.
  Mat A = Mat::Zero(N, N);
  Mat R = Mat::Zero(N, N);
  A(0, 0) = 1.0;
  A(N - 1, N - 1) = 1.0;
  for (Eigen::Index i = 1; i + 1 < N; ++i) {
    const double h0 = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i - 1)];
    const double h1 = x[static_cast<std::size_t>(i + 1)] - x[static_cast<std::size_t>(i)];
    A(i, i - 1) = h0 / 6.0;
    A(i, i) = (h0 + h1) / 3.0;
    A(i, i + 1) = h1 / 6.0;
    R(i, i - 1) = 1.0 / h0;
    R(i, i) = -1.0 / h0 - 1.0 / h1;
    R(i, i + 1) = 1.0 / h1;
  }
  const Mat S = solve(A, R);
  std::size_t j = 0;
  while (j + 2 < n && t > x[j + 1]) ++j;
  const double h = x[j + 1] - x[j];
  const double a = (x[j + 1] - t) / h;
  const double b = (t - x[j]) / h;
  const auto J = static_cast<Eigen::Index>(j);
  Vec w = ((a * a * a - a) * S.row(J) + (b * b * b - b) * S.row(J + 1)).transpose() * (h * h / 6.0);
  w(J) += a;
  w(J + 1) += b;
  return w;
}

Vec scheme_weights(const std::vector<ParameterPoint>& points, const ParameterPoint& target,
                   const SchemeSpec& scheme, const std::optional<Box>& bounds, Diagnostics* diag) {
  if (points.empty()) throw Error(ErrorKind::InvalidInput, "scheme_weights: no points");
  const std::size_t d = target.dim();
  for (const auto& p : points) {
    if (p.dim() != d) throw Error(ErrorKind::InvalidInput, "scheme_weights: dimension mismatch", "target.coords");
  }
  scheme.validate(d);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i] == target) {
      Vec w = Vec::Zero(static_cast<Eigen::Index>(points.size()));
      w(static_cast<Eigen::Index>(i)) = 1.0;
      return w;
    }
  }
  if (points.size() == 1) {
    if (!scheme.allow_extrapolation) {
      throw Error(ErrorKind::Extrapolation, "a single-point stencil only reproduces its own point", "target.coords");
    }
    if (diag) diag->warn("extrapolating from a single point");
    return Vec::Ones(1);
  }
  if (scheme.is_lattice()) return lattice_weights(points, target, scheme, diag);
  Box b;
  if (bounds) {
    b = *bounds;
  } else {
    b.lower.assign(d, std::numeric_limits<double>::infinity());
    b.upper.assign(d, -std::numeric_limits<double>::infinity());
    for (const auto& p : points) {
      for (std::size_t a = 0; a < d; ++a) {
        b.lower[a] = std::min(b.lower[a], p[a]);
        b.upper[a] = std::max(b.upper[a], p[a]);
      }
    }
  }
  return rbf_weights(points, target, scheme, b, diag);
}

Mat cholesky_interpolate_weighted(const std::vector<Mat>& entries, const Vec& weights) {
  check_shapes(entries, weights);
  check_spd(entries);
  Mat s = Mat::Zero(entries[0].rows(), entries[0].cols());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double wi = weights(static_cast<Eigen::Index>(i));
    if (wi != 0.0) s += wi * cholesky(entries[i]);
  }
  const double scale = s.diagonal().cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < s.rows(); ++j) {
    if (std::abs(s(j, j)) <= 1e-14 * scale || scale == 0.0) {
      std::ostringstream os;
      os << "interpolated Cholesky factor has a zero diagonal entry at position " << (j + 1);
      throw Error(ErrorKind::DegenerateFactor, os.str(), {}, static_cast<double>(j + 1));
    }
  }
  return s * s.transpose();
}

Mat cholesky_interpolate(const std::vector<Mat>& entries, const std::vector<ParameterPoint>& points,
                         const ParameterPoint& target, const SchemeSpec& scheme) {
  if (points.size() != entries.size()) throw Error(ErrorKind::InvalidInput, "entry and point counts differ");
  const Vec w = scheme_weights(points, target, scheme);
  std::size_t node = 0;
  if (is_unit_vector(w, &node)) {
    check_spd(entries);
    return entries[node];
  }
  return cholesky_interpolate_weighted(entries, w);
}

Mat interpolate_weighted(const std::vector<Mat>& entries, const Vec& weights, const ManifoldSpec& manifold,
                         std::size_t reference, Diagnostics* diag) {
  manifold.validate();
  check_shapes(entries, weights);
  if (reference >= entries.size()) throw Error(ErrorKind::InvalidInput, "reference index out of range");
  switch (manifold.kind) {
    case ManifoldKind::SPD: check_spd(entries); break;
    case ManifoldKind::Symmetric: check_symmetric(entries); break;
    case ManifoldKind::Nonsingular: check_nonsingular(entries); break;
    case ManifoldKind::Full:
      for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!entries[i].allFinite()) {
          throw Error(ErrorKind::ManifoldViolation, entry_name(i) + " is not finite", {}, static_cast<double>(i));
        }
      }
      break;
  }
  std::size_t node = 0;
  if (is_unit_vector(weights, &node)) return entries[node];
  switch (manifold.kind) {
    case ManifoldKind::Full: return flat_sum(entries, weights);
    case ManifoldKind::Symmetric: return sym(flat_sum(entries, weights));
    case ManifoldKind::SPD:
      if (manifold.method == MapMethod::Cholesky) return cholesky_interpolate_weighted(entries, weights);
      return spd_tangent(entries, weights, reference, diag);
    case ManifoldKind::Nonsingular: return nonsingular_tangent(entries, weights, reference, diag);
  }
  return flat_sum(entries, weights);
}

namespace {

std::size_t nearest_point(const std::vector<ParameterPoint>& pts, const ParameterPoint& target) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = distance(pts[i], target);
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

Mat interpolate_slot(const std::vector<Mat>& entries, const std::vector<ParameterPoint>& points,
                     const ParameterPoint& target, const ManifoldSpec& manifold, const SchemeSpec& scheme,
                     Diagnostics* diag) {
  if (points.size() != entries.size()) throw Error(ErrorKind::InvalidInput, "entry and point counts differ");
  const Vec w = scheme_weights(points, target, scheme, std::nullopt, diag);
  std::size_t ref = manifold.reference_index.value_or(nearest_point(points, target));
  if (ref >= entries.size()) throw Error(ErrorKind::InvalidInput, "manifold reference index out of range");
  return interpolate_weighted(entries, w, manifold, ref, diag);
}

ManifoldChoice manifold_choice_heuristic(const std::vector<Mat>& entries, const std::vector<ParameterPoint>& points,
                                         const std::vector<ManifoldSpec>& candidates, const SchemeSpec& scheme) {
  if (candidates.empty()) throw Error(ErrorKind::InvalidInput, "no manifold candidates");
  if (points.size() != entries.size()) throw Error(ErrorKind::InvalidInput, "entry and point counts differ");
  ManifoldChoice out;
  if (candidates.size() == 1) {
    out.index = 0;
    out.choice = candidates[0];
  }
  if (entries.size() < 3 && candidates.size() > 1) {
    throw Error(ErrorKind::InsufficientCoverage, "manifold heuristic needs at least 3 entries");
  }
  if (entries.size() < 2) {
    out.indicators.push_back(0.0);
    return out;
  }
  // Lattice stencils lose their grid structure once a node is left out, so the
  // cross-validation always runs on thin-plate radial basis weights.
  SchemeSpec loo = scheme;
  if (loo.is_lattice()) {
    loo = SchemeSpec{};
    loo.kind = SchemeKind::Rbf;
    loo.kernel = RbfKernel::ThinPlate;
  }
  loo.allow_extrapolation = true;
  Box bounds;
  const std::size_t d = points[0].dim();
  bounds.lower.assign(d, std::numeric_limits<double>::infinity());
  bounds.upper.assign(d, -std::numeric_limits<double>::infinity());
  for (const auto& p : points) {
    for (std::size_t a = 0; a < d; ++a) {
      bounds.lower[a] = std::min(bounds.lower[a], p[a]);
      bounds.upper[a] = std::max(bounds.upper[a], p[a]);
    }
  }
  for (const auto& cand : candidates) {
    double acc = 0.0;
    try {
      cand.validate();
      for (std::size_t i = 0; i < entries.size(); ++i) {
        std::vector<Mat> e;
        std::vector<ParameterPoint> p;
        for (std::size_t j = 0; j < entries.size(); ++j) {
          if (j == i) continue;
          e.push_back(entries[j]);
          p.push_back(points[j]);
        }
        const Vec w = scheme_weights(p, points[i], loo, bounds);
        const Mat est = interpolate_weighted(e, w, cand, nearest_point(p, points[i]));
        const double scale = std::max(entries[i].norm(), std::numeric_limits<double>::min());
        acc += (est - entries[i]).norm() / scale;
      }
      acc /= static_cast<double>(entries.size());
      if (!std::isfinite(acc)) acc = std::numeric_limits<double>::infinity();
    } catch (const Error&) {
      acc = std::numeric_limits<double>::infinity();
    }
    out.indicators.push_back(acc);
  }
  if (candidates.size() == 1) return out;
  std::size_t best = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    if (out.indicators[c] < out.indicators[best]) best = c;
  }
  const double m = out.indicators[best];
  if (std::isfinite(m)) {
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (candidates[c].kind == ManifoldKind::Full && out.indicators[c] <= m + 1e-12 * std::max(1.0, m)) {
        best = c;
        break;
      }
    }
  }
  out.index = best;
  out.choice = candidates[best];
  return out;
}

OperatorSlotPlan choose_plan(const RomDatabase& db, const std::vector<ManifoldSpec>& candidates,
                             std::vector<ManifoldChoice>* details) {
  OperatorSlotPlan plan = OperatorSlotPlan::all_full(db.order, db.field);
  const auto pts = db.points();
  const auto names = slots_of(db.order);
  for (std::size_t s = 0; s < names.size(); ++s) {
    for (Part part : {Part::Re, Part::Im}) {
      if (part == Part::Im && db.field == ScalarField::Real) continue;
      if (!is_square_slot(names[s])) {
        if (details) details->push_back({0, ManifoldSpec::full(), {}});
        continue;
      }
      std::vector<Mat> entries;
      for (const auto& r : db.records) {
        entries.push_back(part == Part::Re ? r.rom.slots()[s].re() : r.rom.slots()[s].im());
      }
      ManifoldChoice c = manifold_choice_heuristic(entries, pts, candidates, db.scheme);
      plan.set(names[s], part, c.choice);
      if (details) details->push_back(std::move(c));
    }
  }
  plan.validate();
  return plan;
}

Rom interpolate_rom(const RomDatabase& db, const ParameterPoint& target, const InterpolationOptions& opts,
                    Diagnostics* diag) {
  if (!db.consistency.enforced() && !opts.allow_inconsistent && db.size() > 1) {
    throw Error(ErrorKind::Usage,
                "database coordinates are not consistency-aligned; align it first or allow inconsistent "
                "interpolation explicitly",
                "consistency");
  }
  if (!db.consistency.enforced() && db.size() > 1 && diag) {
    diag->warn("interpolating a database without consistency alignment");
  }
  const OperatorSlotPlan& plan = opts.plan ? *opts.plan : db.plan;
  const SchemeSpec& scheme = opts.scheme ? *opts.scheme : db.scheme;
  if (plan.order != db.order || plan.field != db.field) {
    throw Error(ErrorKind::InvalidSpec, "plan does not match the database kind", "plan");
  }
  plan.validate();
  const std::size_t s = locate_subdatabase(db, target);
  const auto& idx = db.partition[s];
  std::vector<ParameterPoint> pts;
  for (std::size_t i : idx) pts.push_back(db.records[i].point);
  const Vec w = scheme_weights(pts, target, scheme, db.subdomain_boxes()[s], diag);
  const std::size_t nearest = nearest_point(pts, target);

  const auto names = slots_of(db.order);
  std::vector<DenseMatrix> out;
  for (std::size_t k = 0; k < names.size(); ++k) {
    Mat planes[2];
    for (Part part : {Part::Re, Part::Im}) {
      if (part == Part::Im && db.field == ScalarField::Real) continue;
      const ManifoldSpec& m = plan.get(names[k], part);
      std::size_t ref = nearest;
      if (m.reference_index) {
        const auto it = std::find(idx.begin(), idx.end(), *m.reference_index);
        if (it != idx.end()) ref = static_cast<std::size_t>(it - idx.begin());
      }
      std::vector<Mat> entries;
      entries.reserve(idx.size());
      for (std::size_t i : idx) {
        const DenseMatrix& x = db.records[i].rom.slots()[k];
        entries.push_back(part == Part::Re ? x.re() : x.im());
      }
      const std::string label = std::string(to_string(names[k])) + "." + to_string(part);
      try {
        planes[part == Part::Re ? 0 : 1] = interpolate_weighted(entries, w, m, ref, diag);
      } catch (const Error& e) {
        std::string msg = "slot " + label + ": " + e.what();
        if (e.kind() == ErrorKind::ManifoldViolation && e.detail()) {
          const auto local = static_cast<std::size_t>(*e.detail());
          if (local < idx.size()) msg += " (record " + std::to_string(idx[local]) + ")";
        }
        throw Error(e.kind(), msg, "plan." + label, e.detail());
      }
    }
    if (db.field == ScalarField::Complex) {
      out.emplace_back(std::move(planes[0]), std::move(planes[1]));
    } else {
      out.emplace_back(std::move(planes[0]));
    }
  }
  return Rom::from_slots(db.order, std::move(out));
}

}  // namespace romdb
