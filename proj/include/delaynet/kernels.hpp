#pragma once

// Delay measures dK(s) on [0, inf): point masses plus absolutely continuous
// parts, and their discretization into quadrature plans.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace delaynet {

struct Atom {
  double location = 0.0;
  double weight = 0.0;
};

/// Density w * rate * exp(-rate * s); total mass w.
struct ExponentialDensity {
  double rate = 1.0;
  double weight = 1.0;
};

/// Density w / (b - a) on [a, b]; total mass w.
struct UniformDensity {
  double a = 0.0;
  double b = 1.0;
  double weight = 1.0;
};

using Density = std::variant<ExponentialDensity, UniformDensity>;

class KernelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A finite-variation, possibly signed, measure on [0, inf).
///
/// Instances are immutable once built; use the static factories or
/// make_kernel() so parameters are validated.
class DelayKernel {
 public:
  DelayKernel() = default;

  DelayKernel(std::vector<Atom> atoms, std::vector<Density> densities)
      : atoms_(std::move(atoms)), densities_(std::move(densities)) {
    for (const auto& a : atoms_) {
      if (!std::isfinite(a.location) || !std::isfinite(a.weight))
        throw KernelError("kernel atom must be finite");
      if (a.location < 0.0)
        throw KernelError("kernel atom location must be nonnegative, got " +
                          std::to_string(a.location));
    }
    for (const auto& d : densities_) {
      if (const auto* e = std::get_if<ExponentialDensity>(&d)) {
        if (!(e->rate > 0.0) || !std::isfinite(e->rate))
          throw KernelError("exponential kernel rate must be positive");
        if (!std::isfinite(e->weight))
          throw KernelError("exponential kernel weight must be finite");
      } else {
        const auto& u = std::get<UniformDensity>(d);
        if (!(u.a >= 0.0) || !(u.a < u.b) || !std::isfinite(u.b))
          throw KernelError("uniform kernel requires 0 <= a < b");
        if (!std::isfinite(u.weight))
          throw KernelError("uniform kernel weight must be finite");
      }
    }
  }

  static DelayKernel dirac(double location = 0.0, double weight = 1.0) {
    return DelayKernel({Atom{location, weight}}, {});
  }
  static DelayKernel exponential(double rate, double weight = 1.0) {
    return DelayKernel({}, {ExponentialDensity{rate, weight}});
  }
  static DelayKernel uniform(double a, double b, double weight = 1.0) {
    return DelayKernel({}, {UniformDensity{a, b, weight}});
  }
  static DelayKernel mixture(const std::vector<DelayKernel>& parts) {
    std::vector<Atom> atoms;
    std::vector<Density> dens;
    for (const auto& p : parts) {
      atoms.insert(atoms.end(), p.atoms_.begin(), p.atoms_.end());
      dens.insert(dens.end(), p.densities_.begin(), p.densities_.end());
    }
    return DelayKernel(std::move(atoms), std::move(dens));
  }

  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Density>& densities() const { return densities_; }

  /// Sum of |component weights|. Exact for non-overlapping components and
  /// an upper bound on the true variation otherwise.
  double total_variation() const {
    double tv = 0.0;
    for (const auto& a : atoms_) tv += std::abs(a.weight);
    for (const auto& d : densities_)
      tv += std::abs(std::visit([](const auto& x) { return x.weight; }, d));
    return tv;
  }

  /// Signed mass, the integral of dK over [0, inf).
  double mass() const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight;
    for (const auto& d : densities_)
      s += std::visit([](const auto& x) { return x.weight; }, d);
    return s;
  }

 private:
  std::vector<Atom> atoms_;
  std::vector<Density> densities_;
};

inline double total_variation(const DelayKernel& k) { return k.total_variation(); }

struct QuadratureNode {
  double s = 0.0;
  double w = 0.0;
};

struct QuadraturePlan {
  std::vector<QuadratureNode> nodes;
  double truncation_horizon = 0.0;
  double tail_mass_bound = 0.0;

  double abs_weight_sum() const {
    double s = 0.0;
    for (const auto& n : nodes) s += std::abs(n.w);
    return s;
  }
};

namespace detail {

// Composite trapezoid on [lo, hi] for density `pdf` (normalized to unit
// mass on the full support). Weights are rescaled so their sum equals the
// exact mass `target` carried by [lo, hi]; this keeps sum |w| bounded by the
// kernel's total variation.
template <class Pdf>
void append_trapezoid(std::vector<QuadratureNode>& out, double lo, double hi,
                      double spacing, Pdf pdf, double target) {
  const auto intervals =
      static_cast<std::size_t>(std::max(1.0, std::ceil((hi - lo) / spacing - 1e-9)));
  const double h = (hi - lo) / static_cast<double>(intervals);
  std::vector<QuadratureNode> local;
  local.reserve(intervals + 1);
  double raw = 0.0;
  for (std::size_t k = 0; k <= intervals; ++k) {
    const double s = (k == intervals) ? hi : lo + static_cast<double>(k) * h;
    const double end = (k == 0 || k == intervals) ? 0.5 : 1.0;
    const double w = end * h * pdf(s);
    raw += w;
    local.push_back({s, w});
  }
  const double scale = raw != 0.0 ? target / raw : 0.0;
  for (auto& n : local) n.w *= scale;
  out.insert(out.end(), local.begin(), local.end());
}

}  // namespace detail

/// Discretize `kernel`. Atoms become exact nodes; each density is truncated
/// at the smallest horizon whose tail mass is at most its share of
/// `tail_tol`, then discretized by composite trapezoid with spacing at most
/// `node_spacing`.
inline QuadraturePlan build_quadrature(const DelayKernel& kernel, double tail_tol,
                                       double node_spacing) {
  if (!(tail_tol > 0.0)) throw KernelError("tail_tol must be positive");
  if (!(node_spacing > 0.0)) throw KernelError("node_spacing must be positive");

  QuadraturePlan plan;
  for (const auto& a : kernel.atoms()) {
    plan.nodes.push_back({a.location, a.weight});
    plan.truncation_horizon = std::max(plan.truncation_horizon, a.location);
  }

  std::size_t n_exp = 0;
  for (const auto& d : kernel.densities())
    if (std::holds_alternative<ExponentialDensity>(d)) ++n_exp;
  const double share = n_exp > 0 ? tail_tol / static_cast<double>(n_exp) : tail_tol;

  for (const auto& d : kernel.densities()) {
    if (const auto* e = std::get_if<ExponentialDensity>(&d)) {
      const double w = std::abs(e->weight);
      if (w == 0.0) continue;
      // w * exp(-rate * S) <= share
      const double horizon = w > share ? std::log(w / share) / e->rate : 0.0;
      const double tail = w * std::exp(-e->rate * horizon);
      plan.tail_mass_bound += std::min(tail, share);
      if (horizon > 0.0) {
        const double rate = e->rate;
        detail::append_trapezoid(
            plan.nodes, 0.0, horizon, node_spacing,
            [rate](double s) { return rate * std::exp(-rate * s); },
            e->weight * -std::expm1(-rate * horizon));
      }
      plan.truncation_horizon = std::max(plan.truncation_horizon, horizon);
    } else {
      const auto& u = std::get<UniformDensity>(d);
      if (u.weight == 0.0) continue;
      const double height = 1.0 / (u.b - u.a);
      detail::append_trapezoid(
          plan.nodes, u.a, u.b, node_spacing, [height](double) { return height; },
          u.weight);
      plan.truncation_horizon = std::max(plan.truncation_horizon, u.b);
    }
  }
  return plan;
}

}  // namespace delaynet
