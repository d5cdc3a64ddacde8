#include "romdb/plan.hpp"

namespace romdb {

namespace {

[[noreturn]] void bad_name(const char* what, const std::string& s) {
  throw Error(ErrorKind::InvalidSpec, std::string("unknown ") + what + " '" + s + "'");
}

std::vector<Part> parts_of(ScalarField field) {
  if (field == ScalarField::Complex) return {Part::Re, Part::Im};
  return {Part::Re};
}

}  // namespace

const char* to_string(ManifoldKind kind) noexcept {
  switch (kind) {
    case ManifoldKind::SPD: return "spd";
    case ManifoldKind::Symmetric: return "symmetric";
    case ManifoldKind::Nonsingular: return "nonsingular";
    case ManifoldKind::Full: return "full";
  }
  return "?";
}

const char* to_string(MapMethod method) noexcept {
  switch (method) {
    case MapMethod::Tangent: return "tangent";
    case MapMethod::Cholesky: return "cholesky";
    case MapMethod::Flat: return "flat";
  }
  return "?";
}

ManifoldKind manifold_kind_from_string(const std::string& s) {
  for (auto k : {ManifoldKind::SPD, ManifoldKind::Symmetric, ManifoldKind::Nonsingular,
                 ManifoldKind::Full}) {
    if (s == to_string(k)) return k;
  }
  bad_name("manifold", s);
}

MapMethod map_method_from_string(const std::string& s) {
  for (auto m : {MapMethod::Tangent, MapMethod::Cholesky, MapMethod::Flat}) {
    if (s == to_string(m)) return m;
  }
  bad_name("map method", s);
}

void ManifoldSpec::validate() const {
  bool ok = false;
  switch (kind) {
    case ManifoldKind::Full:
    case ManifoldKind::Symmetric:
      ok = method == MapMethod::Flat;
      break;
    case ManifoldKind::SPD:
      ok = method == MapMethod::Tangent || method == MapMethod::Cholesky;
      break;
    case ManifoldKind::Nonsingular:
      ok = method == MapMethod::Tangent;
      break;
  }
  if (!ok) {
    throw Error(ErrorKind::InvalidSpec, std::string("manifold '") + to_string(kind) +
                                            "' cannot use method '" + to_string(method) + "'");
  }
}

const char* to_string(SchemeKind kind) noexcept {
  switch (kind) {
    case SchemeKind::LatticeMultilinear: return "lattice_multilinear";
    case SchemeKind::TensorCubicSpline: return "tensor_cubic_spline";
    case SchemeKind::MixedPerAxis: return "mixed_per_axis";
    case SchemeKind::Rbf: return "rbf";
  }
  return "?";
}

const char* to_string(AxisRule rule) noexcept {
  return rule == AxisRule::Linear ? "linear" : "cubic_spline";
}

const char* to_string(RbfKernel kernel) noexcept {
  return kernel == RbfKernel::ThinPlate ? "thin_plate" : "gaussian";
}

SchemeKind scheme_kind_from_string(const std::string& s) {
  for (auto k : {SchemeKind::LatticeMultilinear, SchemeKind::TensorCubicSpline,
                 SchemeKind::MixedPerAxis, SchemeKind::Rbf}) {
    if (s == to_string(k)) return k;
  }
  bad_name("scheme", s);
}

AxisRule axis_rule_from_string(const std::string& s) {
  for (auto r : {AxisRule::Linear, AxisRule::CubicSpline}) {
    if (s == to_string(r)) return r;
  }
  bad_name("axis rule", s);
}

RbfKernel rbf_kernel_from_string(const std::string& s) {
  for (auto k : {RbfKernel::ThinPlate, RbfKernel::Gaussian}) {
    if (s == to_string(k)) return k;
  }
  bad_name("rbf kernel", s);
}

AxisRule SchemeSpec::rule_for_axis(std::size_t axis) const {
  switch (kind) {
    case SchemeKind::LatticeMultilinear: return AxisRule::Linear;
    case SchemeKind::TensorCubicSpline: return AxisRule::CubicSpline;
    case SchemeKind::MixedPerAxis:
      if (axis >= axes.size()) {
        throw Error(ErrorKind::InvalidSpec, "mixed_per_axis scheme has no rule for axis " +
                                                std::to_string(axis));
      }
      return axes[axis];
    case SchemeKind::Rbf: break;
  }
  throw Error(ErrorKind::InvalidSpec, "rbf scheme has no per-axis rule");
}

void SchemeSpec::validate(std::size_t n_mu) const {
  if (kind == SchemeKind::MixedPerAxis && axes.size() != n_mu) {
    throw Error(ErrorKind::InvalidSpec, "mixed_per_axis scheme needs one rule per axis", "scheme.axes");
  }
  if (kind == SchemeKind::Rbf && kernel == RbfKernel::Gaussian && !(gaussian_width > 0.0)) {
    throw Error(ErrorKind::InvalidSpec, "gaussian width must be positive", "scheme.gaussian_width");
  }
}

const char* to_string(Part part) noexcept { return part == Part::Re ? "re" : "im"; }

OperatorSlotPlan OperatorSlotPlan::all_full(RomOrder order, ScalarField field) {
  OperatorSlotPlan plan;
  plan.order = order;
  plan.field = field;
  for (Slot s : slots_of(order)) {
    for (Part p : parts_of(field)) plan.entries.push_back({s, p, ManifoldSpec::full()});
  }
  return plan;
}

const ManifoldSpec& OperatorSlotPlan::get(Slot slot, Part part) const {
  for (const auto& e : entries) {
    if (e.slot == slot && e.part == part) return e.manifold;
  }
  throw Error(ErrorKind::InvalidSpec,
              std::string("plan has no entry for ") + to_string(slot) + "." + to_string(part));
}

void OperatorSlotPlan::set(Slot slot, Part part, ManifoldSpec spec) {
  for (auto& e : entries) {
    if (e.slot == slot && e.part == part) {
      e.manifold = spec;
      return;
    }
  }
  entries.push_back({slot, part, spec});
}

void OperatorSlotPlan::validate() const {
  const auto parts = parts_of(field);
  const auto slots = slots_of(order);
  if (entries.size() != slots.size() * parts.size()) {
    throw Error(ErrorKind::InvalidSpec, "plan must have exactly one entry per slot and plane", "plan");
  }
  for (Slot s : slots) {
    for (Part p : parts) {
      int count = 0;
      for (const auto& e : entries) {
        if (e.slot == s && e.part == p) ++count;
      }
      if (count != 1) {
        throw Error(ErrorKind::InvalidSpec,
                    std::string("plan entry for ") + to_string(s) + "." + to_string(p) +
                        " must appear exactly once",
                    "plan");
      }
    }
  }
  for (const auto& e : entries) {
    try {
      e.manifold.validate();
    } catch (const Error& err) {
      throw Error(ErrorKind::InvalidSpec,
                  std::string("plan entry ") + to_string(e.slot) + "." + to_string(e.part) + ": " +
                      err.what(),
                  "plan");
    }
    if (!is_square_slot(e.slot) && e.manifold.kind != ManifoldKind::Full) {
      throw Error(ErrorKind::InvalidSpec,
                  std::string("rectangular slot ") + to_string(e.slot) + " must use the full manifold",
                  "plan");
    }
  }
}

}  // namespace romdb
