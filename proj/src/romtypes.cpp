#include "romdb/romtypes.hpp"

#include <cmath>
#include <sstream>

namespace romdb {

namespace {

constexpr std::array<Slot, 5> kFirstSlots{Slot::E, Slot::A, Slot::B, Slot::G, Slot::H};
constexpr std::array<Slot, 6> kSecondSlots{Slot::M, Slot::C, Slot::K, Slot::B, Slot::G, Slot::H};
constexpr std::array<Slot, 2> kFirstSquare{Slot::E, Slot::A};
constexpr std::array<Slot, 3> kSecondSquare{Slot::M, Slot::C, Slot::K};

std::string shape_str(const DenseMatrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

std::ptrdiff_t slot_position(RomOrder order, Slot s) {
  const auto slots = slots_of(order);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i] == s) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

void require_same_shape(const Rom& a, const Rom& b, const char* op) {
  if (!a.same_shape(b)) {
    throw Error(ErrorKind::InvalidInput, std::string(op) + ": ROM shapes differ");
  }
}

}  // namespace

ParameterPoint::ParameterPoint(std::vector<double> coords) : coords_(std::move(coords)) {
  if (coords_.empty()) throw Error(ErrorKind::InvalidInput, "parameter point must have N_mu >= 1");
  for (double c : coords_) {
    if (!std::isfinite(c)) throw Error(ErrorKind::InvalidInput, "parameter point has a non-finite coordinate");
  }
}

ParameterPoint::ParameterPoint(std::initializer_list<double> coords)
    : ParameterPoint(std::vector<double>(coords)) {}

double distance(const ParameterPoint& a, const ParameterPoint& b) {
  if (a.dim() != b.dim()) throw Error(ErrorKind::InvalidInput, "distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

bool Box::contains(const ParameterPoint& p, double rel_tol) const {
  if (p.dim() != dim()) return false;
  for (std::size_t i = 0; i < dim(); ++i) {
    const double slack = rel_tol * (upper[i] - lower[i]);
    if (p[i] < lower[i] - slack || p[i] > upper[i] + slack) return false;
  }
  return true;
}

ParameterPoint Box::center() const {
  std::vector<double> c(dim());
  for (std::size_t i = 0; i < dim(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
  return ParameterPoint(std::move(c));
}

ParameterDomain ParameterDomain::from_bounds(std::vector<double> lower, std::vector<double> upper) {
  ParameterDomain d;
  d.box = Box{std::move(lower), std::move(upper)};
  d.validate();
  return d;
}

void ParameterDomain::validate() const {
  auto check_box = [](const Box& b, const std::string& what) {
    if (b.lower.empty() || b.lower.size() != b.upper.size()) {
      throw Error(ErrorKind::InvalidDomain, what + ": lower/upper length mismatch", what);
    }
    for (std::size_t i = 0; i < b.dim(); ++i) {
      if (!std::isfinite(b.lower[i]) || !std::isfinite(b.upper[i]) || !(b.lower[i] < b.upper[i])) {
        throw Error(ErrorKind::InvalidDomain, what + ": requires lower < upper on every axis", what);
      }
    }
  };
  check_box(box, "domain");
  if (subdomains.empty()) return;
  double volume = 0.0;
  double total = 1.0;
  for (std::size_t i = 0; i < dim(); ++i) total *= box.upper[i] - box.lower[i];
  for (std::size_t s = 0; s < subdomains.size(); ++s) {
    const Box& b = subdomains[s];
    const std::string what = "partition[" + std::to_string(s) + "]";
    check_box(b, what);
    if (b.dim() != dim()) throw Error(ErrorKind::InvalidDomain, what + ": dimension mismatch", what);
    double v = 1.0;
    for (std::size_t i = 0; i < dim(); ++i) {
      const double tol = 1e-12 * (box.upper[i] - box.lower[i]);
      if (b.lower[i] < box.lower[i] - tol || b.upper[i] > box.upper[i] + tol) {
        throw Error(ErrorKind::InvalidDomain, what + ": leaves the domain box", what);
      }
      v *= b.upper[i] - b.lower[i];
    }
    volume += v;
    for (std::size_t t = 0; t < s; ++t) {
      const Box& o = subdomains[t];
      double overlap = 1.0;
      for (std::size_t i = 0; i < dim(); ++i) {
        overlap *= std::max(0.0, std::min(b.upper[i], o.upper[i]) - std::max(b.lower[i], o.lower[i]));
      }
      if (overlap > 1e-12 * total) {
        throw Error(ErrorKind::InvalidDomain, what + ": overlaps partition[" + std::to_string(t) + "]",
                    what);
      }
    }
  }
  // Disjoint interiors inside the box: equal total volume means the union covers it.
  if (std::abs(volume - total) > 1e-9 * total) {
    throw Error(ErrorKind::InvalidDomain, "partition does not cover the domain box", "partition");
  }
}

const char* to_string(RomOrder order) noexcept {
  return order == RomOrder::First ? "first_order" : "second_order";
}

const char* to_string(Slot slot) noexcept {
  switch (slot) {
    case Slot::E: return "E";
    case Slot::A: return "A";
    case Slot::M: return "M";
    case Slot::C: return "C";
    case Slot::K: return "K";
    case Slot::B: return "B";
    case Slot::G: return "G";
    case Slot::H: return "H";
  }
  return "?";
}

std::optional<Slot> slot_from_string(const std::string& name) {
  for (Slot s : {Slot::E, Slot::A, Slot::M, Slot::C, Slot::K, Slot::B, Slot::G, Slot::H}) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

std::span<const Slot> slots_of(RomOrder order) noexcept {
  if (order == RomOrder::First) return {kFirstSlots.data(), kFirstSlots.size()};
  return {kSecondSlots.data(), kSecondSlots.size()};
}

std::span<const Slot> square_slots_of(RomOrder order) noexcept {
  if (order == RomOrder::First) return {kFirstSquare.data(), kFirstSquare.size()};
  return {kSecondSquare.data(), kSecondSquare.size()};
}

bool is_square_slot(Slot slot) noexcept {
  return slot != Slot::B && slot != Slot::G && slot != Slot::H;
}

Rom::Rom(RomOrder order, std::vector<DenseMatrix> slots) : order_(order), slots_(std::move(slots)) {
  const auto names = slots_of(order_);
  if (slots_.size() != names.size()) {
    throw Error(ErrorKind::InvalidInput, "Rom: wrong number of operator slots");
  }
  const Eigen::Index k = slots_.front().rows();
  if (k < 1) throw Error(ErrorKind::InvalidInput, "Rom: k must be at least 1");
  const Eigen::Index ni = slot(Slot::B).cols();
  const Eigen::Index no = slot(Slot::G).rows();
  field_ = ScalarField::Real;
  for (const auto& m : slots_) {
    if (m.is_complex()) field_ = ScalarField::Complex;
  }
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    const Slot s = names[i];
    Eigen::Index r = k;
    Eigen::Index c = k;
    if (s == Slot::B) c = ni;
    if (s == Slot::G) r = no;
    if (s == Slot::H) {
      r = no;
      c = ni;
    }
    if (slots_[i].rows() != r || slots_[i].cols() != c) {
      std::ostringstream os;
      os << "Rom: slot " << to_string(s) << " has shape " << shape_str(slots_[i]) << ", expected "
         << r << "x" << c;
      throw Error(ErrorKind::InvalidInput, os.str(), to_string(s));
    }
    if (!slots_[i].all_finite()) {
      throw Error(ErrorKind::InvalidInput, std::string("Rom: slot ") + to_string(s) + " is not finite",
                  to_string(s));
    }
    slots_[i] = slots_[i].as_field(field_);
  }
}

Rom Rom::first_order(DenseMatrix E, DenseMatrix A, DenseMatrix B, DenseMatrix G, DenseMatrix H) {
  return Rom(RomOrder::First, {std::move(E), std::move(A), std::move(B), std::move(G), std::move(H)});
}

Rom Rom::second_order(DenseMatrix M, DenseMatrix C, DenseMatrix K, DenseMatrix B, DenseMatrix G,
                      DenseMatrix H) {
  return Rom(RomOrder::Second, {std::move(M), std::move(C), std::move(K), std::move(B),
                                std::move(G), std::move(H)});
}

Rom Rom::from_slots(RomOrder order, std::vector<DenseMatrix> slots) {
  return Rom(order, std::move(slots));
}

Eigen::Index Rom::n_inputs() const noexcept { return slots_.back().cols(); }
Eigen::Index Rom::n_outputs() const noexcept { return slots_.back().rows(); }

const DenseMatrix& Rom::slot(Slot s) const {
  const auto pos = slot_position(order_, s);
  if (pos < 0) {
    throw Error(ErrorKind::InvalidInput,
                std::string("Rom: slot ") + to_string(s) + " not present in " + to_string(order_));
  }
  return slots_[static_cast<std::size_t>(pos)];
}

bool Rom::has_slot(Slot s) const noexcept { return slot_position(order_, s) >= 0; }

bool Rom::same_shape(const Rom& other) const noexcept {
  return order_ == other.order_ && field_ == other.field_ && k() == other.k() &&
         n_inputs() == other.n_inputs() && n_outputs() == other.n_outputs();
}

TransformPair TransformPair::identity(Eigen::Index k) {
  return {Mat::Identity(k, k), Mat::Identity(k, k)};
}

void TransformPair::validate(double tol) const {
  if (Q.rows() != Q.cols() || Z.rows() != Z.cols() || Q.rows() != Z.rows()) {
    throw Error(ErrorKind::InvalidInput, "TransformPair: Q and Z must be square of equal size");
  }
  if (orthogonality_defect(Q) > tol) throw Error(ErrorKind::InvalidInput, "TransformPair: Q not orthogonal", "Q");
  if (orthogonality_defect(Z) > tol) throw Error(ErrorKind::InvalidInput, "TransformPair: Z not orthogonal", "Z");
}

void RobPair::validate(double tol) const {
  auto check = [&](const DenseMatrix& b, const char* name) {
    const CMat v = b.to_complex();
    CMat g;
    if (metric) {
      if (metric->rows() != v.rows() || metric->cols() != v.rows()) {
        throw Error(ErrorKind::InvalidBasis, "RobPair: metric shape mismatch", "metric");
      }
      g = v.adjoint() * metric->cast<cplx>() * v;
    } else {
      g = v.adjoint() * v;
    }
    const double defect = (g - CMat::Identity(v.cols(), v.cols())).norm();
    if (!(defect <= tol)) {
      std::ostringstream os;
      os << "RobPair: " << name << " is not orthonormal (defect " << defect << ")";
      throw Error(ErrorKind::InvalidBasis, os.str(), name, defect);
    }
  };
  if (V.rows() != W.rows() || V.cols() != W.cols()) {
    throw Error(ErrorKind::InvalidBasis, "RobPair: V and W differ in shape");
  }
  check(V, "V");
  check(W, "W");
}

double DistanceWeights::operator[](Slot s) const {
  const auto pos = slot_position(order, s);
  if (pos < 0 || static_cast<std::size_t>(pos) >= values.size()) {
    throw Error(ErrorKind::InvalidInput, std::string("DistanceWeights: no weight for slot ") + to_string(s));
  }
  return values[static_cast<std::size_t>(pos)];
}

DistanceWeights DistanceWeights::uniform(RomOrder order, double w) {
  DistanceWeights out;
  out.order = order;
  out.values.assign(slots_of(order).size(), w);
  out.excluded.assign(slots_of(order).size(), false);
  return out;
}

void DistanceWeights::validate() const {
  if (values.size() != slots_of(order).size() || excluded.size() != values.size()) {
    throw Error(ErrorKind::InvalidInput, "DistanceWeights: wrong number of weights");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const bool ok = excluded[i] ? values[i] == 0.0 : (std::isfinite(values[i]) && values[i] > 0.0);
    if (!ok) {
      throw Error(ErrorKind::InvalidInput,
                  std::string("DistanceWeights: invalid weight for slot ") + to_string(slots_of(order)[i]));
    }
  }
}

Rom apply_transform(const Rom& rom, const TransformPair& t) {
  const Eigen::Index k = rom.k();
  if (t.Q.rows() != k || t.Q.cols() != k || t.Z.rows() != k || t.Z.cols() != k) {
    throw Error(ErrorKind::InvalidInput, "apply_transform: transform size does not match k");
  }
  const auto names = slots_of(rom.order());
  std::vector<DenseMatrix> out;
  out.reserve(names.size());
  const Mat Zt = t.Z.transpose();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const DenseMatrix& x = rom.slots()[i];
    auto map = [&](const Mat& p) -> Mat {
      switch (names[i]) {
        case Slot::B: return Zt * p;
        case Slot::G: return p * t.Q;
        case Slot::H: return p;
        default: return Zt * p * t.Q;
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

DistanceWeights normalization_weights(const Rom& ref, Diagnostics* diag) {
  DistanceWeights w;
  w.order = ref.order();
  const auto names = slots_of(ref.order());
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double n2 = ref.slots()[i].squared_norm();
    if (n2 > 0.0 && std::isfinite(1.0 / n2)) {
      w.values.push_back(1.0 / n2);
      w.excluded.push_back(false);
    } else {
      w.values.push_back(0.0);
      w.excluded.push_back(true);
      if (diag) {
        diag->warn(std::string("reference operator ") + to_string(names[i]) +
                   " has zero norm; term excluded from the distance");
      }
    }
  }
  return w;
}

double rom_distance(const Rom& a, const Rom& b, const DistanceWeights& w) {
  require_same_shape(a, b, "rom_distance");
  if (w.order != a.order() || w.values.size() != a.slots().size()) {
    throw Error(ErrorKind::InvalidInput, "rom_distance: weights do not match ROM order");
  }
  double d = 0.0;
  for (std::size_t i = 0; i < a.slots().size(); ++i) {
    if (w.values[i] == 0.0) continue;
    const DenseMatrix& x = a.slots()[i];
    const DenseMatrix& y = b.slots()[i];
    d += w.values[i] * ((x.re() - y.re()).squaredNorm() + (x.im() - y.im()).squaredNorm());
  }
  return d;
}

double equivalence_class_distance(const Rom& ref, const Rom& other, const TransformPair& t,
                                  const DistanceWeights& w) {
  require_same_shape(ref, other, "equivalence_class_distance");
  return rom_distance(apply_transform(other, t), ref, w);
}

std::vector<ParameterPoint> lattice_points(const std::vector<std::vector<double>>& axes) {
  std::vector<ParameterPoint> out;
  if (axes.empty()) return out;
  std::vector<std::size_t> idx(axes.size(), 0);
  for (const auto& a : axes)
    if (a.empty()) return out;
  while (true) {
    std::vector<double> c(axes.size());
    for (std::size_t a = 0; a < axes.size(); ++a) c[a] = axes[a][idx[a]];
    out.emplace_back(std::move(c));
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].size()) break;
      idx[a] = 0;
      if (a == 0) return out;
    }
  }
}

}  // namespace romdb
