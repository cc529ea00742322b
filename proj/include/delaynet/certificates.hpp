#pragma once

// QUAD(Delta, P) certificates: for all u1, u2 and t >= 0,
//
//   (u1 - u2)^T P { [f(t,u1) - f(t,u2)] - Delta (u1 - u2) } <= -eps (u1 - u2)^T (u1 - u2).
//
// Certificates can only be falsified by sampling, never proven here. This
// header also derives the constants of the exponential growth envelope.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include "delaynet/dynamics.hpp"
#include "delaynet/linalg.hpp"

namespace delaynet {

class CertificateError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class QuadCertificate {
 public:
  QuadCertificate(Matrix p, Vector delta, double epsilon)
      : p_(std::move(p)), delta_(std::move(delta)), epsilon_(epsilon) {
    try {
      require_spd(p_, "P");
    } catch (const MatrixError& e) {
      throw CertificateError(e.what());
    }
    if (delta_.size() != p_.rows())
      throw CertificateError("Delta has length " + std::to_string(delta_.size()) +
                             ", expected " + std::to_string(p_.rows()));
    if (!delta_.allFinite()) throw CertificateError("Delta must be finite");
    if (!(epsilon_ > 0.0) || !std::isfinite(epsilon_))
      throw CertificateError("epsilon must be positive");
  }

  const Matrix& P() const { return p_; }
  const Vector& Delta() const { return delta_; }
  double epsilon() const { return epsilon_; }
  std::size_t dim() const { return static_cast<std::size_t>(p_.rows()); }

 private:
  Matrix p_;
  Vector delta_;
  double epsilon_;
};

/// P = I, Delta = (L + eps) I: valid whenever f(t, .) is L-Lipschitz, since
/// d^T (f1 - f2) <= L |d|^2 by Cauchy-Schwarz.
inline QuadCertificate lipschitz_certificate(std::size_t n, double lipschitz, double epsilon) {
  const auto ni = static_cast<Eigen::Index>(n);
  return QuadCertificate(Matrix::Identity(ni, ni), Vector::Constant(ni, lipschitz + epsilon),
                         epsilon);
}

struct Box {
  Vector lower;
  Vector upper;

  static Box cube(std::size_t n, double r) {
    const auto ni = static_cast<Eigen::Index>(n);
    return {Vector::Constant(ni, -r), Vector::Constant(ni, r)};
  }
};

struct QuadCounterexample {
  std::size_t probe = 0;
  double t = 0.0;
  Vector u1;
  Vector u2;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct QuadCheckResult {
  bool pass = true;
  std::size_t probes = 0;
  std::optional<QuadCounterexample> counterexample;
};

struct QuadTerms {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;

  bool violated() const { return lhs > rhs + slack; }
};

/// Both sides of the QUAD inequality at (t, u1, u2). `slack` is a roundoff
/// allowance proportional to the magnitudes of the summed terms.
inline QuadTerms quad_terms(const NodeDynamics& f, const QuadCertificate& cert, double t,
                            const Vector& u1, const Vector& u2) {
  const Vector d = u1 - u2;
  const Vector pd = cert.P() * d;
  const double field = pd.dot(f(t, u1) - f(t, u2));
  const double shift = pd.dot(cert.Delta().cwiseProduct(d));
  const double dd = d.squaredNorm();
  QuadTerms q;
  q.lhs = field - shift;
  q.rhs = -cert.epsilon() * dd;
  q.slack = 1e-12 * (std::abs(field) + std::abs(shift) + std::abs(q.rhs));
  return q;
}

/// Uniform probes (t, u1, u2) over t_range x box x box; stops at the first
/// violation, so the reported counterexample is the lowest-indexed one.
inline QuadCheckResult check_quad(const NodeDynamics& f, const QuadCertificate& cert,
                                  const Box& box, std::pair<double, double> t_range,
                                  std::size_t budget, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(f.dim);
  if (cert.dim() != f.dim) throw CertificateError("certificate dimension differs from f");
  if (budget < 1) throw std::invalid_argument("probe budget must be >= 1");
  if (box.lower.size() != n || box.upper.size() != n || !(box.lower.array() < box.upper.array()).all())
    throw std::invalid_argument("probe box is degenerate or has the wrong dimension");
  if (!(t_range.first <= t_range.second)) throw std::invalid_argument("empty time range");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto point = [&] {
    Vector u(n);
    for (Eigen::Index i = 0; i < n; ++i)
      u(i) = box.lower(i) + unit(rng) * (box.upper(i) - box.lower(i));
    return u;
  };

  QuadCheckResult res;
  for (std::size_t k = 0; k < budget; ++k) {
    const double t = t_range.first + unit(rng) * (t_range.second - t_range.first);
    Vector u1 = point();
    Vector u2 = point();
    const QuadTerms q = quad_terms(f, cert, t, u1, u2);
    ++res.probes;
    if (q.violated() || !std::isfinite(q.lhs)) {
      res.pass = false;
      res.counterexample = QuadCounterexample{k, t, std::move(u1), std::move(u2), q.lhs, q.rhs};
      break;
    }
  }
  return res;
}

/// Floor applied to delta when the certificate implies a negative bound.
inline constexpr double kDeltaFloor = 1e-12;

/// delta with d^T P [f(u1) - f(u2)] <= delta |d|^2, from the certificate:
/// lambda_max(sym(P Delta)) - eps, floored at kDeltaFloor.
inline double delta_from_cert(const QuadCertificate& cert) {
  const Matrix pd = cert.P() * cert.Delta().asDiagonal();
  const Matrix sym = 0.5 * (pd + pd.transpose());
  const double lmax =
      Eigen::SelfAdjointEigenSolver<Matrix>(sym, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  return std::max(lmax - cert.epsilon(), kDeltaFloor);
}

struct EnvelopeConstants {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

/// alpha = max kappa(t), beta = max |a_ij(t)| and
/// gamma = max_i || f(t, x_i(0)) + sum_j a_ij(t) g(t, x_j(0)) int dK_ij ||
/// over `grid` equally spaced times on [0, horizon]. Kernel masses are
/// signed.
inline EnvelopeConstants estimate_envelope_constants(const NetworkModel& model, const Vector& x0,
                                                     double horizon, std::size_t grid) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (grid < 2) throw std::invalid_argument("grid must have at least 2 points");
  const std::size_t m = model.nodes();
  const auto n = static_cast<Eigen::Index>(model.node_dim());
  if (x0.size() != static_cast<Eigen::Index>(model.state_dim()))
    throw std::invalid_argument("x0 has the wrong dimension");

  EnvelopeConstants c;
  for (std::size_t k = 0; k < grid; ++k) {
    const double t = horizon * static_cast<double>(k) / static_cast<double>(grid - 1);
    c.alpha = std::max(c.alpha, model.g().kappa(t));
    const Matrix a = model.coupling()(t);
    c.beta = std::max(c.beta, a.cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < m; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      Vector v = model.f()(t, x0.segment(ii * n, n));
      for (std::size_t j = 0; j < m; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double mass = model.kernel(i, j).mass();
        if (a(ii, jj) == 0.0 || mass == 0.0) continue;
        v += a(ii, jj) * mass * model.g()(t, x0.segment(jj * n, n));
      }
      c.gamma = std::max(c.gamma, v.norm());
    }
  }
  return c;
}

/// eta = (2 delta + 2 alpha beta ||P|| K) / lambda_min(P)
///       + 2 m gamma ||P|| / sqrt(lambda_min(P)).
inline double compute_eta(double delta, double alpha, double beta, double gamma, std::size_t m,
                          const Matrix& P, double K) {
  require_spd(P);
  if (!(K >= 0.0)) throw std::invalid_argument("K must be nonnegative");
  if (m < 1) throw std::invalid_argument("m must be >= 1");
  const double lmin = lambda_min(P);
  const double normp = spectral_norm(P);
  const double eta = (2.0 * delta + 2.0 * alpha * beta * normp * K) / lmin +
                     2.0 * static_cast<double>(m) * gamma * normp / std::sqrt(lmin);
  if (!(eta > 0.0)) throw std::domain_error("eta must be positive, got " + std::to_string(eta));
  return eta;
}

struct ProofConstants {
  double delta = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double K = 0.0;
  double lambda_min = 0.0;
  double norm_P = 0.0;
  double eta = 0.0;
};

inline ProofConstants proof_constants(const NetworkModel& model, const QuadCertificate& cert,
                                      const Vector& x0, double horizon, std::size_t grid = 1001) {
  ProofConstants pc;
  pc.delta = delta_from_cert(cert);
  const auto env = estimate_envelope_constants(model, x0, horizon, grid);
  pc.alpha = env.alpha;
  pc.beta = env.beta;
  pc.gamma = env.gamma;
  pc.K = model.total_kernel_variation();
  pc.lambda_min = lambda_min(cert.P());
  pc.norm_P = spectral_norm(cert.P());
  pc.eta = compute_eta(pc.delta, pc.alpha, pc.beta, pc.gamma, model.nodes(), cert.P(), pc.K);
  return pc;
}

}  // namespace delaynet
