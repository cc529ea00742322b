#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "delaynet/history.hpp"

using namespace delaynet;

namespace {

Vector vec1(double v) { return Vector::Constant(1, v); }

}  // namespace

TEST(HistoryFunction, ConstantEvaluatesEverywhere) {
  const auto h = HistoryFunction::constant(vec1(1.0));
  EXPECT_EQ(h(-5.0)(0), 1.0);
  EXPECT_EQ(h(-1e9)(0), 1.0);
  EXPECT_EQ(h(0.0)(0), 1.0);
  EXPECT_THROW(h(0.1), HistoryError);
}

TEST(HistoryFunction, SegmentHasConstantTail) {
  const auto h = HistoryFunction::segment(-2.0, [](double s) { return vec1(s * s); });
  EXPECT_DOUBLE_EQ(h(-1.0)(0), 1.0);
  EXPECT_DOUBLE_EQ(h(-2.0)(0), 4.0);
  EXPECT_DOUBLE_EQ(h(-100.0)(0), 4.0);
  EXPECT_DOUBLE_EQ(h.limit()(0), 4.0);
}

TEST(HistoryFunction, RejectsBadInput) {
  EXPECT_THROW(HistoryFunction::constant(vec1(NAN)), HistoryError);
  EXPECT_THROW(HistoryFunction::segment(0.0, [](double) { return vec1(0.0); }), HistoryError);
  EXPECT_THROW(HistoryFunction::segment(-1.0, [](double s) { return vec1(1.0 / (s + 1.0)); }),
               HistoryError);
}

TEST(Trajectory, LinearInterpolationBetweenSamples) {
  Trajectory tr(1, 1, HistoryFunction::constant(vec1(0.0)));
  tr.append(1.0, vec1(2.0));
  EXPECT_DOUBLE_EQ(tr.eval(0.5)(0), 1.0);
  EXPECT_DOUBLE_EQ(tr.eval(-5.0)(0), 0.0);
}

TEST(Trajectory, RefusesExtrapolation) {
  Trajectory tr(1, 1, HistoryFunction::constant(vec1(0.0)));
  tr.append(1.0, vec1(2.0));
  EXPECT_THROW(tr.eval(1.1), HistoryError);
}

TEST(Trajectory, AppendContract) {
  Trajectory tr(1, 2, HistoryFunction::constant(Vector::Zero(2)));
  tr.append(1.0, Vector::Ones(2));
  Vector v(2);
  v << 3.0, -4.0;
  tr.append(1.1, v);
  EXPECT_EQ(tr.eval(1.1), v);
  EXPECT_THROW(tr.append(0.9, v), HistoryError);
  EXPECT_THROW(tr.append(1.1, v), HistoryError);
  Vector bad = v;
  bad(1) = NAN;
  EXPECT_THROW(tr.append(1.2, bad), HistoryError);
  EXPECT_THROW(tr.append(1.2, Vector::Ones(3)), HistoryError);
}

TEST(Trajectory, InitialStateAnchorsAtZero) {
  const auto h = HistoryFunction::segment(-1.0, [](double s) { return vec1(std::cos(s)); });
  Trajectory tr(1, 1, h);
  EXPECT_EQ(tr.state(0)(0), 1.0);
  tr.append(0.01, vec1(std::cos(0.01)));
  for (double eps : {1e-2, 1e-4, 1e-6, 1e-8}) {
    const double gap = std::abs(tr.eval(-eps)(0) - tr.eval(eps)(0));
    EXPECT_LT(gap, 2.0 * eps);
  }
}

TEST(Trajectory, StoredSamplesReproducedBitwise) {
  for (auto interp : {Interpolation::linear, Interpolation::cubic}) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Trajectory tr(2, 2, HistoryFunction::constant(Vector::Zero(4)), interp);
    double t = 0.0;
    for (int k = 0; k < 200; ++k) {
      t += 0.001 + 0.01 * std::abs(u(rng));
      Vector x(4);
      for (auto& v : x) v = u(rng);
      tr.append(t, x);
    }
    for (std::size_t k = 0; k < tr.size(); ++k)
      EXPECT_EQ(tr.eval(tr.times()[k]), tr.state(k));
  }
}

TEST(Trajectory, CubicIsExactForCubics) {
  auto p = [](double t) { return 1.0 - 2.0 * t + 0.5 * t * t + 0.25 * t * t * t; };
  Trajectory tr(1, 1, HistoryFunction::constant(vec1(p(0.0))), Interpolation::cubic);
  for (int k = 1; k <= 10; ++k) tr.append(0.1 * k, vec1(p(0.1 * k)));
  for (double t : {0.03, 0.15, 0.47, 0.91, 0.99}) EXPECT_NEAR(tr.eval(t)(0), p(t), 1e-13);
}

TEST(SupHistoryDeviation, ConstantEqualToAnchorIsZero) {
  const Vector x0 = Vector::Constant(4, 0.3);
  EXPECT_EQ(sup_history_deviation(HistoryFunction::constant(x0), x0, Matrix::Identity(2, 2)), 0.0);
}

TEST(SupHistoryDeviation, ConstantAtPDistance) {
  Matrix P(2, 2);
  P << 2.0, 0.5, 0.5, 1.0;
  Vector x0(2), phi(2);
  x0 << 1.0, -1.0;
  phi << 2.0, 0.5;
  const Vector d = phi - x0;
  const double d2 = d.dot(P * d);
  EXPECT_NEAR(sup_history_deviation(HistoryFunction::constant(phi), x0, P), 0.5 * d2, 1e-15);
}

TEST(SupHistoryDeviation, LinearSegmentPeaksAtLeftEnd) {
  // phi(s) = x0 + s e1 on [-1, 0]; max of s^2 / 2 is 1/2 at s = -1.
  Vector x0(2);
  x0 << 0.2, 0.7;
  const auto h = HistoryFunction::segment(-1.0, [x0](double s) {
    Vector v = x0;
    v(0) += s;
    return v;
  });
  const double sup = sup_history_deviation(h, x0, Matrix::Identity(2, 2));
  EXPECT_DOUBLE_EQ(sup, 0.5);

  // Dense-sampling cross-check.
  double dense = 0.0;
  for (int k = 0; k <= 100000; ++k) {
    const double s = -1.0 + k * 1e-5;
    dense = std::max(dense, 0.5 * (h(s) - x0).squaredNorm());
  }
  EXPECT_NEAR(sup, dense, 1e-12);
}

TEST(SupHistoryDeviation, InteriorPeakIsRefined) {
  // phi(s) = sin(7 s) on [-3, 0]; the sup of sin^2 / 2 is 1/2.
  const auto h = HistoryFunction::segment(-3.0, [](double s) { return vec1(std::sin(7.0 * s)); });
  EXPECT_NEAR(sup_history_deviation(h, vec1(0.0), Matrix::Identity(1, 1), 64), 0.5, 1e-12);
}

TEST(SupHistoryDeviation, ScalesQuadratically) {
  const Vector x0 = Vector::Constant(2, 1.0);
  auto make = [&](double lam) {
    return HistoryFunction::segment(-2.0, [x0, lam](double s) {
      Vector v(2);
      v << std::sin(s), s * std::cos(3.0 * s);
      return Vector(x0 + lam * v);
    });
  };
  Matrix P(2, 2);
  P << 1.5, 0.2, 0.2, 0.8;
  const double base = sup_history_deviation(make(1.0), x0, P);
  for (double lam : {1.5, 2.0, 10.0})
    EXPECT_NEAR(sup_history_deviation(make(lam), x0, P), lam * lam * base,
                1e-10 * lam * lam * base);
}

TEST(SupHistoryDeviation, RejectsIndefiniteP) {
  Matrix P(1, 1);
  P << -1.0;
  EXPECT_THROW(sup_history_deviation(HistoryFunction::constant(vec1(1.0)), vec1(0.0), P),
               MatrixError);
}
