#pragma once

// Built-in node dynamics f(t, u). All are globally Lipschitz, so the
// Lipschitz rule yields a QUAD certificate for each of them.

#include <cmath>
#include <string>
#include <utility>

#include "delaynet/dynamics.hpp"
#include "delaynet/linalg.hpp"

namespace delaynet::nodes {

/// f(u) = B u.
inline NodeDynamics linear(Matrix b) {
  if (b.rows() == 0 || b.rows() != b.cols()) throw ModelError("linear node needs square B");
  const double lip = spectral_norm(b);
  const auto n = static_cast<std::size_t>(b.rows());
  return {n, [b = std::move(b)](double, const Vector& u) -> Vector { return b * u; },
          [lip](double) { return lip; }, "linear"};
}

/// Dimensionless Chua circuit with the piecewise-linear diode
///   h(x) = m1 x + (m0 - m1)/2 (|x + 1| - |x - 1|)
///   x' = alpha (y - x - h(x)),  y' = x - y + z,  z' = -beta y.
struct ChuaParams {
  double alpha = 15.6;
  double beta = 28.0;
  double m0 = -8.0 / 7.0;
  double m1 = -5.0 / 7.0;
};

inline double chua_diode(const ChuaParams& p, double x) {
  return p.m1 * x + 0.5 * (p.m0 - p.m1) * (std::abs(x + 1.0) - std::abs(x - 1.0));
}

/// Global Lipschitz constant of the Chua field: f is continuous and
/// piecewise linear, so L is the largest spectral norm over the two
/// Jacobians.
inline double chua_lipschitz(const ChuaParams& p) {
  double lip = 0.0;
  for (double slope : {p.m0, p.m1}) {
    Matrix j(3, 3);
    j << -p.alpha * (1.0 + slope), p.alpha, 0.0,
         1.0, -1.0, 1.0,
         0.0, -p.beta, 0.0;
    lip = std::max(lip, spectral_norm(j));
  }
  return lip;
}

inline NodeDynamics chua(const ChuaParams& p = {}) {
  const double lip = chua_lipschitz(p);
  return {3,
          [p](double, const Vector& u) -> Vector {
            Vector du(3);
            du(0) = p.alpha * (u(1) - u(0) - chua_diode(p, u(0)));
            du(1) = u(0) - u(1) + u(2);
            du(2) = -p.beta * u(1);
            return du;
          },
          [lip](double) { return lip; }, "chua"};
}

/// Hopfield-type node f(u) = -D u + W tanh(u) + bias, D diagonal.
inline NodeDynamics hopfield(Vector decay, Matrix w, Vector bias) {
  const auto n = decay.size();
  if (n == 0 || w.rows() != n || w.cols() != n || bias.size() != n)
    throw ModelError("hopfield node: decay, W and bias dimensions disagree");
  const double lip = decay.cwiseAbs().maxCoeff() + spectral_norm(w);
  return {static_cast<std::size_t>(n),
          [decay = std::move(decay), w = std::move(w), bias = std::move(bias)](
              double, const Vector& u) -> Vector {
            return -decay.cwiseProduct(u) + w * u.array().tanh().matrix() + bias;
          },
          [lip](double) { return lip; }, "hopfield"};
}

/// Componentwise f(u) = tanh(u); Lipschitz constant 1.
inline NodeDynamics tanh_field(std::size_t n) {
  return {n, [](double, const Vector& u) -> Vector { return u.array().tanh().matrix(); },
          [](double) { return 1.0; }, "tanh"};
}

}  // namespace delaynet::nodes
