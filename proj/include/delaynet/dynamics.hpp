#pragma once

// Network right-hand side
//
//   dx_i/dt = f(t, x_i(t)) + sum_j a_ij(t) * int_0^inf g(t, x_j(t - tau_ij(t) - s)) dK_ij(s)
//
// assembled from shared node dynamics f, an output map g, a coupling
// schedule A(t), a delay schedule tau_ij(t) and a grid of delay kernels.

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "delaynet/history.hpp"
#include "delaynet/kernels.hpp"
#include "delaynet/linalg.hpp"

namespace delaynet {

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class RhsError : public std::runtime_error {
 public:
  RhsError(const std::string& what, std::size_t node, double t)
      : std::runtime_error(what), node_(node), t_(t) {}
  std::size_t node() const { return node_; }
  double time() const { return t_; }

 private:
  std::size_t node_;
  double t_;
};

using VectorField = std::function<Vector(double, const Vector&)>;

struct NodeDynamics {
  std::size_t dim = 0;
  VectorField eval;
  /// Optional Lipschitz bound of f(t, .) on the box [-r, r]^n, as a
  /// function of r.
  std::function<double(double)> lipschitz_on_box;
  std::string name;

  Vector operator()(double t, const Vector& u) const { return eval(t, u); }
};

struct OutputFunction {
  VectorField eval;
  /// kappa(t) >= 0 with ||g(t,u1) - g(t,u2)|| <= kappa(t) ||u1 - u2||.
  std::function<double(double)> kappa;

  Vector operator()(double t, const Vector& u) const { return eval(t, u); }

  static OutputFunction linear(Matrix gamma) {
    const double k = spectral_norm(gamma);
    return {[gamma = std::move(gamma)](double, const Vector& u) -> Vector { return gamma * u; },
            [k](double) { return k; }};
  }
  static OutputFunction linear(std::function<Matrix(double)> gamma) {
    return {[gamma](double t, const Vector& u) -> Vector { return gamma(t) * u; },
            [gamma](double t) { return spectral_norm(gamma(t)); }};
  }
};

struct CouplingSchedule {
  std::function<Matrix(double)> eval;
  bool zero_row_sums = false;
  bool nonneg_off_diagonal = false;

  Matrix operator()(double t) const { return eval(t); }

  static CouplingSchedule constant(Matrix a, bool zero_rows = false, bool nonneg = false) {
    CouplingSchedule s{[a](double) { return a; }, zero_rows, nonneg};
    s.require_flags(0.0);
    return s;
  }

  /// Throws if a declared structural flag fails at time t (to 1e-12).
  void require_flags(double t) const {
    const Matrix a = eval(t);
    if (a.rows() != a.cols()) throw ModelError("coupling matrix must be square");
    const double tol = 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (zero_row_sums && std::abs(a.row(i).sum()) > tol)
        throw ModelError("coupling row " + std::to_string(i) + " does not sum to zero at t=" +
                         std::to_string(t));
      if (nonneg_off_diagonal)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
          if (i != j && a(i, j) < -tol)
            throw ModelError("negative off-diagonal coupling a(" + std::to_string(i) + "," +
                             std::to_string(j) + ") at t=" + std::to_string(t));
    }
  }
};

struct DelaySchedule {
  std::function<double(std::size_t, std::size_t, double)> eval;

  double operator()(std::size_t i, std::size_t j, double t) const { return eval(i, j, t); }

  static DelaySchedule zero() {
    return {[](std::size_t, std::size_t, double) { return 0.0; }};
  }
  static DelaySchedule uniform_offdiag(double tau) {
    return {[tau](std::size_t i, std::size_t j, double) { return i == j ? 0.0 : tau; }};
  }
  static DelaySchedule constant(Matrix tau) {
    return {[tau = std::move(tau)](std::size_t i, std::size_t j, double) {
      return tau(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }};
  }
};

struct QuadratureOptions {
  double tail_tol = 1e-10;
  double node_spacing = 1e-2;
};

/// Immutable assembly of the coupled network.
class NetworkModel {
 public:
  NetworkModel(std::size_t m, NodeDynamics f, OutputFunction g, CouplingSchedule a,
               DelaySchedule tau, std::vector<DelayKernel> kernels,
               QuadratureOptions quad = {})
      : m_(m),
        f_(std::move(f)),
        g_(std::move(g)),
        a_(std::move(a)),
        tau_(std::move(tau)),
        kernels_(std::move(kernels)),
        quad_(quad) {
    if (m_ == 0) throw ModelError("network needs at least one node");
    if (f_.dim == 0 || !f_.eval) throw ModelError("node dynamics must have n >= 1");
    if (!g_.eval || !g_.kappa) throw ModelError("output function needs g and kappa");
    if (!a_.eval || !tau_.eval) throw ModelError("coupling and delay schedules required");
    if (kernels_.size() != m_ * m_)
      throw ModelError("expected " + std::to_string(m_ * m_) + " kernels, got " +
                       std::to_string(kernels_.size()));
    const Matrix a0 = a_(0.0);
    if (a0.rows() != static_cast<Eigen::Index>(m_) || a0.cols() != static_cast<Eigen::Index>(m_))
      throw ModelError("coupling matrix must be m x m");
    plans_.reserve(kernels_.size());
    for (const auto& k : kernels_)
      plans_.push_back(build_quadrature(k, quad_.tail_tol, quad_.node_spacing));
  }

  /// Same kernel on every edge.
  NetworkModel(std::size_t m, NodeDynamics f, OutputFunction g, CouplingSchedule a,
               DelaySchedule tau, const DelayKernel& kernel, QuadratureOptions quad = {})
      : NetworkModel(m, std::move(f), std::move(g), std::move(a), std::move(tau),
                     std::vector<DelayKernel>(m * m, kernel), quad) {}

  std::size_t nodes() const { return m_; }
  std::size_t node_dim() const { return f_.dim; }
  std::size_t state_dim() const { return m_ * f_.dim; }
  const NodeDynamics& f() const { return f_; }
  const OutputFunction& g() const { return g_; }
  const CouplingSchedule& coupling() const { return a_; }
  const DelaySchedule& delays() const { return tau_; }
  const QuadratureOptions& quadrature_options() const { return quad_; }
  const DelayKernel& kernel(std::size_t i, std::size_t j) const { return kernels_[i * m_ + j]; }
  const QuadraturePlan& plan(std::size_t i, std::size_t j) const { return plans_[i * m_ + j]; }

  /// K = sum_ij total variation of K_ij.
  double total_kernel_variation() const {
    double k = 0.0;
    for (const auto& kern : kernels_) k += kern.total_variation();
    return k;
  }

 private:
  std::size_t m_;
  NodeDynamics f_;
  OutputFunction g_;
  CouplingSchedule a_;
  DelaySchedule tau_;
  std::vector<DelayKernel> kernels_;
  std::vector<QuadraturePlan> plans_;
  QuadratureOptions quad_;
};

/// sum_k w_k g(t, x_node(t - tau - s_k)). `past(q)` returns the stacked
/// state at time q; `n` is the node dimension.
template <class G, class History>
Vector convolve(const QuadraturePlan& plan, const G& g_at, const History& past, double t,
                double tau, std::size_t node, std::size_t n) {
  Vector acc;
  for (std::size_t k = 0; k < plan.nodes.size(); ++k) {
    const auto& q = plan.nodes[k];
    Vector xj;
    try {
      xj = past(t - tau - q.s).segment(static_cast<Eigen::Index>(node * n),
                                       static_cast<Eigen::Index>(n));
    } catch (const HistoryError& e) {
      throw HistoryError(std::string(e.what()) + " (quadrature node " + std::to_string(k) +
                         ", s=" + std::to_string(q.s) + ")");
    }
    Vector term = q.w * g_at(t, xj);
    if (acc.size() == 0)
      acc = std::move(term);
    else
      acc += term;
  }
  if (acc.size() == 0) acc = Vector::Zero(static_cast<Eigen::Index>(n));
  return acc;
}

/// Single-node form: `past(q)` returns the node's n-vector directly.
template <class G, class History>
Vector convolve(const QuadraturePlan& plan, const G& g_at, const History& past, double t,
                double tau) {
  const Vector probe = past(t - tau - (plan.nodes.empty() ? 0.0 : plan.nodes.front().s));
  return convolve(plan, g_at, past, t, tau, 0, static_cast<std::size_t>(probe.size()));
}

/// Right-hand side of the network at time t. `past(q)` must return the
/// stacked m*n state for every q <= t that the delays and plans reach.
template <class History>
Vector rhs(const NetworkModel& model, double t, const History& past) {
  const std::size_t m = model.nodes();
  const std::size_t n = model.node_dim();
  const auto ni = static_cast<Eigen::Index>(n);
  const Vector now = past(t);
  const Matrix a = model.coupling()(t);
  Vector out(static_cast<Eigen::Index>(m * n));
  for (std::size_t i = 0; i < m; ++i) {
    const auto off = static_cast<Eigen::Index>(i * n);
    Vector xi_dot = model.f()(t, now.segment(off, ni));
    for (std::size_t j = 0; j < m; ++j) {
      const double aij = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (aij == 0.0) continue;
      const double tau = model.delays()(i, j, t);
      xi_dot += aij * convolve(model.plan(i, j), model.g(), past, t, tau, j, n);
    }
    if (!xi_dot.allFinite())
      throw RhsError("non-finite derivative at node " + std::to_string(i) +
                         ", t=" + std::to_string(t),
                     i, t);
    out.segment(off, ni) = xi_dot;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions of the general model

/// Constant zero-row-sum A, g = Gamma u, Dirac kernels, no delay.
struct Example1Params {
  std::size_t m = 2;
  NodeDynamics f;
  Matrix A;
  Matrix Gamma;
};

/// Time-varying zero-row-sum A(t), g = Gamma(t) u, Dirac kernels, no delay.
struct Example2Params {
  std::size_t m = 2;
  NodeDynamics f;
  std::function<Matrix(double)> A;
  std::function<Matrix(double)> Gamma;
  /// Structural flags are verified at this many points on [0, horizon].
  double check_horizon = 10.0;
  std::size_t check_samples = 101;
};

/// Constant A = c (W - I) with W a row-normalized nonnegative adjacency
/// (zero diagonal), g = diag(gamma) u, Dirac kernels, tau_ij = tau for
/// i != j and tau_ii = 0. Then a_ii = -c and sum_{j != i} a_ij = c, which
/// is the normalized-row convention scaled by the coupling strength.
struct Example3Params {
  NodeDynamics f;
  Matrix adjacency;
  double c = 1.0;
  Vector gamma;
  double tau = 0.0;
};

using ExampleParams = std::variant<Example1Params, Example2Params, Example3Params>;

namespace detail {

inline void require_dim(const Matrix& x, Eigen::Index r, Eigen::Index c, const char* what) {
  if (x.rows() != r || x.cols() != c)
    throw ModelError(std::string(what) + " has shape " + std::to_string(x.rows()) + "x" +
                     std::to_string(x.cols()) + ", expected " + std::to_string(r) + "x" +
                     std::to_string(c));
}

}  // namespace detail

inline NetworkModel make_example(const Example1Params& p) {
  const auto n = static_cast<Eigen::Index>(p.f.dim);
  const auto m = static_cast<Eigen::Index>(p.m);
  detail::require_dim(p.A, m, m, "A");
  detail::require_dim(p.Gamma, n, n, "Gamma");
  return NetworkModel(p.m, p.f, OutputFunction::linear(p.Gamma),
                      CouplingSchedule::constant(p.A, true, true), DelaySchedule::zero(),
                      DelayKernel::dirac());
}

inline NetworkModel make_example(const Example2Params& p) {
  if (!p.A || !p.Gamma) throw ModelError("example 2 needs A(t) and Gamma(t)");
  const auto n = static_cast<Eigen::Index>(p.f.dim);
  const auto m = static_cast<Eigen::Index>(p.m);
  CouplingSchedule a{p.A, true, true};
  const std::size_t samples = std::max<std::size_t>(p.check_samples, 2);
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = p.check_horizon * static_cast<double>(k) / static_cast<double>(samples - 1);
    detail::require_dim(p.A(t), m, m, "A(t)");
    detail::require_dim(p.Gamma(t), n, n, "Gamma(t)");
    a.require_flags(t);
  }
  return NetworkModel(p.m, p.f, OutputFunction::linear(p.Gamma), std::move(a),
                      DelaySchedule::zero(), DelayKernel::dirac());
}

inline NetworkModel make_example(const Example3Params& p) {
  const auto m = p.adjacency.rows();
  const auto n = static_cast<Eigen::Index>(p.f.dim);
  if (m == 0) throw ModelError("adjacency must be nonempty");
  detail::require_dim(p.adjacency, m, m, "adjacency");
  if (p.gamma.size() != n)
    throw ModelError("Gamma diagonal has length " + std::to_string(p.gamma.size()) +
                     ", expected " + std::to_string(n));
  if ((p.gamma.array() < 0.0).any()) throw ModelError("Gamma diagonal must be nonnegative");
  if (!(p.c >= 0.0)) throw ModelError("coupling strength c must be nonnegative");
  if (!(p.tau >= 0.0)) throw ModelError("delay tau must be nonnegative");
  Matrix w = p.adjacency;
  w.diagonal().setZero();
  if (m > 1) {
    for (Eigen::Index i = 0; i < m; ++i) {
      if ((w.row(i).array() < 0.0).any())
        throw ModelError("adjacency row " + std::to_string(i) + " has a negative entry");
      if (std::abs(w.row(i).sum() - 1.0) > 1e-12)
        throw ModelError("adjacency row " + std::to_string(i) + " must sum to 1");
    }
  }
  const Matrix a = p.c * (w - Matrix::Identity(m, m));
  return NetworkModel(static_cast<std::size_t>(m), p.f,
                      OutputFunction::linear(Matrix(p.gamma.asDiagonal())),
                      CouplingSchedule::constant(a, true, true),
                      DelaySchedule::uniform_offdiag(p.tau), DelayKernel::dirac());
}

inline NetworkModel make_example(const ExampleParams& p) {
  return std::visit([](const auto& x) { return make_example(x); }, p);
}

/// Row-normalized adjacency for a named topology; zero diagonal.
inline Matrix normalized_adjacency(const std::string& topology, std::size_t m) {
  const auto mi = static_cast<Eigen::Index>(m);
  Matrix w = Matrix::Zero(mi, mi);
  if (m < 2) return w;
  if (topology == "all-to-all") {
    w.setConstant(1.0 / static_cast<double>(m - 1));
    w.diagonal().setZero();
  } else if (topology == "ring") {
    for (Eigen::Index i = 0; i < mi; ++i) {
      w(i, (i + 1) % mi) += 0.5;
      w(i, (i + mi - 1) % mi) += 0.5;
    }
    w.diagonal().setZero();
    for (Eigen::Index i = 0; i < mi; ++i) w.row(i) /= w.row(i).sum();
  } else {
    throw ModelError("unknown topology '" + topology + "'");
  }
  return w;
}

// ---------------------------------------------------------------------------
// Assumption falsifiers

struct AssumptionFinding {
  std::string assumption;
  std::size_t probes = 0;
  bool violated = false;
  std::string detail;
  double t = 0.0;
  Vector u1;
  Vector u2;
};

struct AssumptionReport {
  std::vector<AssumptionFinding> findings;

  bool any_violation() const {
    for (const auto& f : findings)
      if (f.violated) return true;
    return false;
  }
  const AssumptionFinding& find(const std::string& id) const {
    for (const auto& f : findings)
      if (f.assumption == id) return f;
    throw std::out_of_range("no finding for " + id);
  }
};

struct AssumptionOptions {
  double box_radius = 10.0;
  /// Relative slack on Lipschitz inequalities, absorbing roundoff.
  double rel_slack = 1e-9;
};

namespace detail {

// Localizes a jump of F on [t0, t1] by bisection on the half with the larger
// increment. Returns the jump location when the increment does not shrink
// below `jump_tol` as the bracket collapses.
template <class F>
std::optional<double> locate_jump(const F& fn, double t0, double t1, double jump_tol) {
  Vector f0 = fn(t0), f1 = fn(t1);
  if ((f1 - f0).norm() <= jump_tol) return std::nullopt;
  for (int it = 0; it < 60 && t1 - t0 > 1e-13 * std::max(1.0, std::abs(t0)); ++it) {
    const double mid = 0.5 * (t0 + t1);
    const Vector fm = fn(mid);
    if ((fm - f0).norm() >= (f1 - fm).norm()) {
      t1 = mid;
      f1 = fm;
    } else {
      t0 = mid;
      f0 = fm;
    }
  }
  if ((f1 - f0).norm() > jump_tol) return t0;
  return std::nullopt;
}

// Grid scan plus bisection for discontinuities of fn on [0, horizon].
template <class F>
std::optional<double> scan_continuity(const F& fn, double horizon, std::size_t budget) {
  const std::size_t cells = std::max<std::size_t>(budget, 2);
  double scale = 0.0;
  for (std::size_t k = 0; k <= cells; k += std::max<std::size_t>(1, cells / 16))
    scale = std::max(scale, fn(horizon * static_cast<double>(k) / cells).cwiseAbs().maxCoeff());
  const double jump_tol = 1e-6 * (1.0 + scale);
  for (std::size_t k = 0; k < cells; ++k) {
    const double a = horizon * static_cast<double>(k) / static_cast<double>(cells);
    const double b = horizon * static_cast<double>(k + 1) / static_cast<double>(cells);
    if (auto at = locate_jump(fn, a, b, jump_tol)) return at;
  }
  return std::nullopt;
}

inline Vector random_box_point(std::mt19937_64& rng, std::size_t n, double r) {
  std::uniform_real_distribution<double> u(-r, r);
  Vector x(static_cast<Eigen::Index>(n));
  for (auto& v : x) v = u(rng);
  return x;
}

inline Vector flatten(const Matrix& a) {
  return Eigen::Map<const Vector>(a.data(), a.size());
}

}  // namespace detail

/// Randomized search for violations of the standing assumptions on f (A1),
/// A(t) (A2), g and kappa (A3) and tau (A4) over [0, horizon]. A clean
/// report means no witness was found, not that the assumption holds.
inline AssumptionReport check_assumptions(const NetworkModel& model, double horizon,
                                          std::size_t sample_budget, std::uint64_t seed,
                                          const AssumptionOptions& opts = {}) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  const std::size_t budget = std::max<std::size_t>(sample_budget, 1);
  const std::size_t n = model.node_dim();
  const std::size_t m = model.nodes();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(0.0, horizon);
  AssumptionReport report;

  // A1: Lipschitz in u against the declared hint, continuity in t.
  {
    AssumptionFinding a1{"A1"};
    const auto& f = model.f();
    const double lip = f.lipschitz_on_box ? f.lipschitz_on_box(opts.box_radius) : -1.0;
    for (std::size_t k = 0; k < budget && !a1.violated; ++k) {
      ++a1.probes;
      const double t = ut(rng);
      Vector u1 = detail::random_box_point(rng, n, opts.box_radius);
      Vector u2 = detail::random_box_point(rng, n, opts.box_radius);
      const Vector f1 = f(t, u1), f2 = f(t, u2);
      if (!f1.allFinite() || !f2.allFinite()) {
        a1 = {"A1", a1.probes, true, "f is not finite", t, u1, u2};
        break;
      }
      if (lip >= 0.0) {
        const double lhs = (f1 - f2).norm();
        const double bound = lip * (u1 - u2).norm();
        if (lhs > bound * (1.0 + opts.rel_slack) + 1e-300)
          a1 = {"A1", a1.probes, true,
                "||f(t,u1)-f(t,u2)|| = " + std::to_string(lhs) + " > L||u1-u2|| = " +
                    std::to_string(bound),
                t, u1, u2};
      }
    }
    if (!a1.violated) {
      const Vector u = detail::random_box_point(rng, n, opts.box_radius);
      auto ft = [&](double t) { return f(t, u); };
      if (auto at = detail::scan_continuity(ft, horizon, budget)) {
        a1.violated = true;
        a1.detail = "f(., u) jumps near t=" + std::to_string(*at);
        a1.t = *at;
        a1.u1 = u;
      }
      a1.probes += budget;
    }
    report.findings.push_back(std::move(a1));
  }

  // A2: continuity of A(t).
  {
    AssumptionFinding a2{"A2"};
    auto at_fn = [&](double t) { return detail::flatten(model.coupling()(t)); };
    if (auto at = detail::scan_continuity(at_fn, horizon, budget)) {
      a2.violated = true;
      a2.detail = "A(t) jumps near t=" + std::to_string(*at);
      a2.t = *at;
    }
    a2.probes = budget;
    report.findings.push_back(std::move(a2));
  }

  // A3: ||g(t,u1) - g(t,u2)|| <= kappa(t) ||u1 - u2||.
  {
    AssumptionFinding a3{"A3"};
    const auto& g = model.g();
    for (std::size_t k = 0; k < budget; ++k) {
      ++a3.probes;
      const double t = ut(rng);
      Vector u1 = detail::random_box_point(rng, n, opts.box_radius);
      Vector u2 = detail::random_box_point(rng, n, opts.box_radius);
      const double kappa = g.kappa(t);
      const double lhs = (g(t, u1) - g(t, u2)).norm();
      const double bound = kappa * (u1 - u2).norm();
      if (!(kappa >= 0.0) || !(lhs <= bound * (1.0 + opts.rel_slack) + 1e-300)) {
        a3.violated = true;
        a3.detail = kappa < 0.0 ? "kappa(t) < 0"
                                : "||g(t,u1)-g(t,u2)|| = " + std::to_string(lhs) +
                                      " > kappa(t)||u1-u2|| = " + std::to_string(bound);
        a3.t = t;
        a3.u1 = std::move(u1);
        a3.u2 = std::move(u2);
        break;
      }
    }
    report.findings.push_back(std::move(a3));
  }

  // A4: tau_ij(t) >= 0 on a grid and at random times.
  {
    AssumptionFinding a4{"A4"};
    for (std::size_t k = 0; k < 2 * budget && !a4.violated; ++k) {
      const double t = k < budget ? horizon * static_cast<double>(k) / static_cast<double>(budget)
                                  : ut(rng);
      for (std::size_t i = 0; i < m && !a4.violated; ++i)
        for (std::size_t j = 0; j < m && !a4.violated; ++j) {
          ++a4.probes;
          const double tau = model.delays()(i, j, t);
          if (!(tau >= 0.0) || !std::isfinite(tau)) {
            a4.violated = true;
            a4.t = t;
            a4.detail = "tau(" + std::to_string(i) + "," + std::to_string(j) +
                        ")(t=" + std::to_string(t) + ") = " + std::to_string(tau);
          }
        }
    }
    report.findings.push_back(std::move(a4));
  }
  return report;
}

}  // namespace delaynet
