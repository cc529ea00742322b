#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace delaynet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class MatrixError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// Throws unless P is square, symmetric to 1e-12 and positive definite.
inline void require_spd(const Matrix& P, const char* what = "P") {
  if (P.rows() == 0 || P.rows() != P.cols())
    throw MatrixError(std::string(what) + " must be a nonempty square matrix");
  if (!P.allFinite()) throw MatrixError(std::string(what) + " has non-finite entries");
  const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw MatrixError(std::string(what) + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(P, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw MatrixError(std::string(what) + " is not positive definite");
}

inline double lambda_min(const Matrix& P) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(P, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

/// Largest singular value.
inline double spectral_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(M).singularValues()(0);
}

/// sum_i x_i^T P x_i over the n-blocks of the stacked vector x.
inline double p_norm_squared_unchecked(const Vector& x, const Matrix& P) {
  const auto n = P.rows();
  const auto m = x.size() / n;
  double s = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto xi = x.segment(i * n, n);
    s += xi.dot(P * xi);
  }
  return std::max(0.0, s);
}

inline double p_norm_squared(const Vector& x, const Matrix& P) {
  require_spd(P);
  if (x.size() % P.rows() != 0)
    throw MatrixError("state length is not a multiple of P's dimension");
  return p_norm_squared_unchecked(x, P);
}

}  // namespace delaynet
