#pragma once

// Initial functions on (-inf, 0] and the append-only solution record.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "delaynet/linalg.hpp"

namespace delaynet {

class HistoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bounded continuous function on (-inf, 0] with a limit at -inf.
///
/// Either a constant, or a closed-form segment on [t_left, 0] continued by
/// the constant value segment(t_left) for t < t_left.
class HistoryFunction {
 public:
  using Segment = std::function<Vector(double)>;

  static HistoryFunction constant(Vector value) {
    if (value.size() == 0 || !value.allFinite())
      throw HistoryError("constant history must be a nonempty finite vector");
    HistoryFunction h;
    h.limit_ = std::move(value);
    return h;
  }

  static HistoryFunction segment(double t_left, Segment f) {
    if (!(t_left < 0.0) || !std::isfinite(t_left))
      throw HistoryError("history segment needs a finite t_left < 0");
    if (!f) throw HistoryError("history segment evaluator is empty");
    HistoryFunction h;
    h.t_left_ = t_left;
    h.limit_ = f(t_left);
    const Vector at0 = f(0.0);
    if (h.limit_.size() == 0 || at0.size() != h.limit_.size() || !h.limit_.allFinite() ||
        !at0.allFinite())
      throw HistoryError("history segment must return finite vectors of fixed size");
    h.segment_ = std::make_shared<const Segment>(std::move(f));
    return h;
  }

  Vector operator()(double t) const {
    if (t > 0.0) throw HistoryError("history evaluated at t > 0");
    if (!segment_ || t <= t_left_) return limit_;
    return (*segment_)(t);
  }

  bool is_constant() const { return !segment_; }
  double t_left() const { return t_left_; }
  const Vector& limit() const { return limit_; }
  Eigen::Index dim() const { return limit_.size(); }

 private:
  HistoryFunction() = default;

  double t_left_ = 0.0;
  Vector limit_;
  std::shared_ptr<const Segment> segment_;
};

enum class Interpolation { linear, cubic };

/// Solution record: the initial history on (-inf, 0] plus samples on
/// [0, last]. Single writer; readers may evaluate between appends.
class Trajectory {
 public:
  Trajectory(std::size_t m, std::size_t n, HistoryFunction initial,
             Interpolation interp = Interpolation::linear)
      : m_(m), n_(n), initial_(std::move(initial)), interp_(interp) {
    if (m == 0 || n == 0) throw HistoryError("trajectory needs m >= 1 and n >= 1");
    if (static_cast<std::size_t>(initial_.dim()) != m * n)
      throw HistoryError("initial history has dimension " +
                         std::to_string(initial_.dim()) + ", expected " +
                         std::to_string(m * n));
    times_.push_back(0.0);
    states_.push_back(initial_(0.0));
  }

  std::size_t nodes() const { return m_; }
  std::size_t node_dim() const { return n_; }
  std::size_t size() const { return times_.size(); }
  double last_time() const { return times_.back(); }
  Interpolation interpolation() const { return interp_; }
  const HistoryFunction& initial() const { return initial_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<Vector>& states() const { return states_; }
  const Vector& state(std::size_t k) const { return states_[k]; }

  void append(double t, Vector x) {
    if (!(t > times_.back()))
      throw HistoryError("append at t=" + std::to_string(t) +
                         " is not after last sample " + std::to_string(times_.back()));
    if (static_cast<std::size_t>(x.size()) != m_ * n_)
      throw HistoryError("appended state has wrong dimension");
    if (!x.allFinite()) throw HistoryError("appended state is not finite");
    times_.push_back(t);
    states_.push_back(std::move(x));
  }

  /// x(t) for any t <= last_time(). Exact at stored sample times.
  Vector eval(double t) const {
    if (t <= 0.0) {
      if (t == 0.0) return states_.front();
      return initial_(t);
    }
    if (t > times_.back())
      throw HistoryError("refusing to extrapolate: t=" + std::to_string(t) +
                         " beyond last sample " + std::to_string(times_.back()));
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const auto k = static_cast<std::size_t>(it - times_.begin()) - 1;
    if (times_[k] == t) return states_[k];
    if (interp_ == Interpolation::cubic && times_.size() >= 4) return cubic(k, t);
    const double lam = (t - times_[k]) / (times_[k + 1] - times_[k]);
    return (1.0 - lam) * states_[k] + lam * states_[k + 1];
  }

  Vector operator()(double t) const { return eval(t); }

 private:
  // 4-point Lagrange interpolant on samples around [t_k, t_k+1], kept
  // inside [0, last] so the kink at t = 0 is never straddled.
  Vector cubic(std::size_t k, double t) const {
    std::size_t lo = k > 0 ? k - 1 : 0;
    lo = std::min(lo, times_.size() - 4);
    Vector out = Vector::Zero(static_cast<Eigen::Index>(m_ * n_));
    for (std::size_t a = lo; a < lo + 4; ++a) {
      double basis = 1.0;
      for (std::size_t b = lo; b < lo + 4; ++b)
        if (b != a) basis *= (t - times_[b]) / (times_[a] - times_[b]);
      out += basis * states_[a];
    }
    return out;
  }

  std::size_t m_;
  std::size_t n_;
  HistoryFunction initial_;
  Interpolation interp_;
  std::vector<double> times_;
  std::vector<Vector> states_;
};

/// sup over s in (-inf, 0] of (1/2) ||phi(s) - x0||_P^2.
///
/// The constant tail is exact. The compact segment is sampled on `samples`
/// intervals and the best sample is refined by golden-section search over
/// its two neighbouring intervals.
inline double sup_history_deviation(const HistoryFunction& phi, const Vector& x0,
                                    const Matrix& P, std::size_t samples = 4096) {
  require_spd(P);
  if (x0.size() != phi.dim() || phi.dim() % P.rows() != 0)
    throw MatrixError("dimension mismatch in sup_history_deviation");
  auto dev = [&](double s) { return 0.5 * p_norm_squared_unchecked(phi(s) - x0, P); };

  double best = 0.5 * p_norm_squared_unchecked(phi.limit() - x0, P);  // tail
  if (phi.is_constant()) return best;

  const double a = phi.t_left();
  samples = std::max<std::size_t>(samples, 2);
  const double h = -a / static_cast<double>(samples);
  std::size_t arg = 0;
  double sampled = -1.0;
  for (std::size_t k = 0; k <= samples; ++k) {
    const double s = k == samples ? 0.0 : a + static_cast<double>(k) * h;
    const double v = dev(s);
    if (v > sampled) {
      sampled = v;
      arg = k;
    }
  }
  best = std::max(best, sampled);

  double lo = a + static_cast<double>(arg == 0 ? 0 : arg - 1) * h;
  double hi = std::min(0.0, a + static_cast<double>(arg + 1) * h);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = dev(c), fd = dev(d);
  for (int it = 0; it < 80 && hi - lo > 1e-14 * std::max(1.0, -a); ++it) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = dev(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = dev(d);
    }
  }
  return std::max({best, fc, fd});
}

inline double sup_history_deviation(const Trajectory& traj, const Vector& x0,
                                    const Matrix& P) {
  return sup_history_deviation(traj.initial(), x0, P);
}

}  // namespace delaynet
