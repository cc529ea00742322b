#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "delaynet/diagnostics.hpp"

using namespace delaynet;

namespace {

Vector vec1(double v) { return Vector::Constant(1, v); }

Trajectory sampled(double (*x)(double), double horizon, int steps) {
  Trajectory tr(1, 1, HistoryFunction::constant(vec1(x(0.0))));
  for (int k = 1; k <= steps; ++k) {
    const double t = horizon * k / steps;
    tr.append(t, vec1(x(t)));
  }
  return tr;
}

}  // namespace

TEST(PNorm, Examples) {
  EXPECT_DOUBLE_EQ(p_norm(Vector::Ones(3), Matrix::Identity(3, 3)), std::sqrt(3.0));
  Matrix p(2, 2);
  p << 4.0, 0.0, 0.0, 9.0;
  Vector x(2);
  x << 1.0, 1.0;
  EXPECT_DOUBLE_EQ(p_norm(x, p), std::sqrt(13.0));
  EXPECT_THROW(p_norm(x, -p), MatrixError);
}

TEST(PNorm, EquivalentToEuclidean) {
  Matrix p(3, 3);
  p << 3.0, 0.5, 0.1, 0.5, 1.0, -0.3, 0.1, -0.3, 0.4;
  Eigen::SelfAdjointEigenSolver<Matrix> es(p);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 1000; ++k) {
    Vector x(3);
    for (auto& v : x) v = nd(rng);
    const double n = x.norm();
    const double pn = p_norm(x, p);
    EXPECT_GE(pn, std::sqrt(lmin) * n * (1.0 - 1e-12));
    EXPECT_LE(pn, std::sqrt(lmax) * n * (1.0 + 1e-12));
  }
}

TEST(Lyapunov, VAndMExamples) {
  Trajectory tr(1, 2, HistoryFunction::constant(Vector::Zero(2)));
  Vector x(2);
  x << 3.0, 4.0;
  tr.append(1.0, x);
  const Matrix I = Matrix::Identity(2, 2);
  EXPECT_DOUBLE_EQ(compute_V(tr, 1.0, I), 12.5);
  EXPECT_DOUBLE_EQ(compute_V(tr, 0.5, I), 3.125);
  EXPECT_DOUBLE_EQ(compute_M(tr, 0.0, I), 0.5);
  EXPECT_DOUBLE_EQ(compute_M(tr, 1.0, I), 12.5);
  EXPECT_THROW(compute_V(tr, 1.5, I), HistoryError);
}

TEST(Lyapunov, MIsMonotoneAndDominatesV) {
  const auto tr = sampled([](double t) { return 3.0 * std::sin(2.0 * t) * std::exp(-0.1 * t); },
                          20.0, 400);
  const Matrix P = 2.0 * Matrix::Identity(1, 1);
  double prev = 0.0;
  for (int k = 0; k <= 400; ++k) {
    const double t = 0.05 * k;
    const double m = compute_M(tr, t, P);
    EXPECT_GE(m, 0.5);
    EXPECT_GE(m, prev);
    EXPECT_GE(m, compute_V(tr, t, P));
    prev = m;
  }
}

TEST(Lyapunov, MIncludesInitialHistory) {
  const auto phi = HistoryFunction::segment(-1.0, [](double s) { return vec1(1.0 + 4.0 * s); });
  Trajectory tr(1, 1, phi);
  tr.append(1.0, vec1(1.0));
  // sup over s in [-1, 0] of 1/2 (4 s)^2 = 8.
  EXPECT_NEAR(compute_M(tr, 1.0, Matrix::Identity(1, 1)), 8.0, 1e-12);
}

TEST(Envelope, DecayingTrajectoryPasses) {
  const auto tr = sampled([](double t) { return std::exp(-t); }, 5.0, 500);
  const auto r = check_envelope(tr, 1.0, Matrix::Identity(1, 1), 1e-6);
  EXPECT_TRUE(r.pass());
  EXPECT_EQ(r.M0, 0.5);
  EXPECT_LE(r.max_violation, 0.0);
  ASSERT_EQ(r.times.size(), 501u);
  for (std::size_t k = 0; k < r.times.size(); ++k) EXPECT_LE(r.M[k], r.bound[k]);
}

TEST(Envelope, ConstantTrajectoryPassesWithZeroEta) {
  const auto tr = sampled([](double) { return 2.0; }, 1.0, 10);
  const auto r = check_envelope(tr, 0.0, Matrix::Identity(1, 1), 0.0);
  EXPECT_TRUE(r.envelope_ok);
  EXPECT_EQ(r.max_violation, 0.0);
  EXPECT_DOUBLE_EQ(r.state_bound, 3.0);
  EXPECT_TRUE(r.state_bound_ok);
}

TEST(Envelope, GrowthBeyondEtaIsReported) {
  const auto tr = sampled([](double t) { return 3.0 * t; }, 2.0, 100);
  const auto r = check_envelope(tr, 0.0, Matrix::Identity(1, 1), 1e-6);
  EXPECT_FALSE(r.envelope_ok);
  // Final M = 18 against a flat bound of 1/2.
  EXPECT_NEAR(r.max_violation, 35.0, 1e-9);
  EXPECT_FALSE(r.state_bound_ok);
}

TEST(Envelope, OverflowingBoundIsVacuous) {
  const auto tr = sampled([](double t) { return t; }, 10.0, 10);
  const auto r = check_envelope(tr, 500.0, Matrix::Identity(1, 1), 0.0);
  EXPECT_TRUE(std::isinf(r.state_bound));
  EXPECT_TRUE(r.pass());
}

TEST(Envelope, StrideKeepsLastSample) {
  const auto tr = sampled([](double t) { return t; }, 1.0, 10);
  const auto r = check_envelope(tr, 10.0, Matrix::Identity(1, 1), 0.0, 3);
  EXPECT_EQ(r.times, (std::vector<double>{0.0, 0.3, 0.6, 0.9, 1.0}));
  EXPECT_THROW(check_envelope(tr, -1.0, Matrix::Identity(1, 1), 0.0), std::invalid_argument);
}

TEST(Sync, IdenticalNodesHaveZeroDistance) {
  Vector x0(6);
  x0 << 1.0, 2.0, 3.0, 1.0, 2.0, 3.0;
  Trajectory tr(2, 3, HistoryFunction::constant(x0));
  for (int k = 1; k <= 10; ++k) tr.append(0.1 * k, x0 * std::cos(k));
  const auto r = sync_report(tr, 1e-3, 0.5);
  EXPECT_EQ(r.final_window_mean, 0.0);
  EXPECT_TRUE(r.synchronized);
  for (double d : r.distance) EXPECT_EQ(d, 0.0);
}

TEST(Sync, DistanceIsPermutationInvariant) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 100; ++trial) {
    Vector x(8);
    for (auto& v : x) v = nd(rng);
    Vector swapped(8);
    swapped << x.segment(6, 2), x.segment(2, 2), x.segment(0, 2), x.segment(4, 2);
    EXPECT_EQ(max_pairwise_distance(x, 4, 2), max_pairwise_distance(swapped, 4, 2));
  }
  Vector x(4);
  x << 0.0, 0.0, 3.0, 4.0;
  EXPECT_EQ(max_pairwise_distance(x, 2, 2), 5.0);
}

TEST(Sync, WindowMeanAndErrors) {
  Trajectory tr(2, 1, HistoryFunction::constant(Vector::Zero(2)));
  for (int k = 1; k <= 10; ++k) tr.append(k, (Vector(2) << 0.0, double(k)).finished());
  const auto r = sync_report(tr, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(r.final_window_mean, 9.0);
  EXPECT_FALSE(r.synchronized);

  Trajectory single(1, 1, HistoryFunction::constant(vec1(0.0)));
  single.append(1.0, vec1(0.0));
  EXPECT_THROW(sync_report(single, 1.0, 0.5), std::invalid_argument);
  EXPECT_THROW(sync_report(tr, 1.0, 20.0), std::invalid_argument);
}
