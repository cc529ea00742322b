#pragma once

// Lyapunov-type quantities along a finished trajectory:
//
//   V(t) = 1/2 ||x(t) - x(0)||_P^2
//   M(t) = max[1/2, sup_{s <= t} 1/2 ||x(s) - x(0)||_P^2]
//
// the exponential envelope M(t) <= M(0) e^{eta t}, the state bound derived
// from it, and the max pairwise node distance used to judge
// synchronization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "delaynet/history.hpp"
#include "delaynet/integrator.hpp"
#include "delaynet/linalg.hpp"

namespace delaynet {

inline double p_norm(const Vector& x, const Matrix& P) { return std::sqrt(p_norm_squared(x, P)); }

inline double compute_V(const Trajectory& traj, double t, const Matrix& P) {
  if (t < 0.0 || t > traj.last_time()) throw HistoryError("V(t) requested outside [0, last]");
  require_spd(P);
  return 0.5 * p_norm_squared_unchecked(traj.eval(t) - traj.state(0), P);
}

/// M(t) on the sample grid: the floor 1/2, the sup over the initial
/// history, the running max of V at samples in [0, t], and V(t) itself.
inline double compute_M(const Trajectory& traj, double t, const Matrix& P) {
  if (t < 0.0 || t > traj.last_time()) throw HistoryError("M(t) requested outside [0, last]");
  const Vector& x0 = traj.state(0);
  double m = std::max(0.5, sup_history_deviation(traj.initial(), x0, P));
  const auto& times = traj.times();
  for (std::size_t k = 0; k < times.size() && times[k] <= t; ++k)
    m = std::max(m, 0.5 * p_norm_squared_unchecked(traj.state(k) - x0, P));
  return std::max(m, compute_V(traj, t, P));
}

struct EnvelopeReport {
  std::vector<double> times;
  std::vector<double> V;
  std::vector<double> M;
  /// M(0) e^{eta t}; may overflow to +inf for large eta t.
  std::vector<double> bound;
  std::vector<double> state_norm;
  /// (||x(0)||_P + sqrt(2 M(0) e^{eta T})) / sqrt(lambda_min(P)), T = horizon.
  double state_bound = 0.0;
  /// max over samples of M(t) / (M(0) e^{eta t}) - 1, computed in log space.
  double max_violation = -1.0;
  double min_state_margin = std::numeric_limits<double>::infinity();
  double eta = 0.0;
  double M0 = 0.5;
  double rel_tol = 0.0;
  bool envelope_ok = true;
  bool state_bound_ok = true;

  bool pass() const { return envelope_ok && state_bound_ok; }
};

/// Checks M(t) <= M(0) e^{eta t} (1 + rel_tol) at every trajectory sample
/// and the state bound at every sample; per-sample arrays are recorded at
/// the given output stride.
inline EnvelopeReport check_envelope(const Trajectory& traj, double eta, const Matrix& P,
                                     double rel_tol, std::size_t stride = 1) {
  if (!(eta >= 0.0)) throw std::invalid_argument("eta must be nonnegative");
  if (!(rel_tol >= 0.0)) throw std::invalid_argument("rel_tol must be nonnegative");
  require_spd(P);

  EnvelopeReport r;
  r.eta = eta;
  r.rel_tol = rel_tol;
  const Vector& x0 = traj.state(0);
  r.M0 = std::max(0.5, sup_history_deviation(traj.initial(), x0, P));
  const double log_m0 = std::log(r.M0);
  const double lmin = lambda_min(P);
  const double horizon = traj.last_time();
  const double p0 = std::sqrt(p_norm_squared_unchecked(x0, P));
  r.state_bound = (p0 + std::sqrt(2.0 * r.M0 * std::exp(eta * horizon))) / std::sqrt(lmin);

  const auto out = output_indices(traj, stride);
  std::size_t next_out = 0;
  double running = r.M0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double t = traj.times()[k];
    const double v = 0.5 * p_norm_squared_unchecked(traj.state(k) - x0, P);
    running = std::max(running, v);
    const double violation = std::expm1(std::log(running) - log_m0 - eta * t);
    r.max_violation = std::max(r.max_violation, violation);
    if (violation > rel_tol) r.envelope_ok = false;
    const double xn = traj.state(k).norm();
    r.min_state_margin = std::min(r.min_state_margin, r.state_bound - xn);
    if (!(xn <= r.state_bound)) r.state_bound_ok = false;
    if (next_out < out.size() && out[next_out] == k) {
      ++next_out;
      r.times.push_back(t);
      r.V.push_back(v);
      r.M.push_back(running);
      r.bound.push_back(r.M0 * std::exp(eta * t));
      r.state_norm.push_back(xn);
    }
  }
  return r;
}

/// max_{i,j} ||x_i - x_j|| over the m node blocks of a stacked state.
inline double max_pairwise_distance(const Vector& x, std::size_t m, std::size_t n) {
  const auto ni = static_cast<Eigen::Index>(n);
  double d = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      d = std::max(d, (x.segment(static_cast<Eigen::Index>(i * n), ni) -
                       x.segment(static_cast<Eigen::Index>(j * n), ni))
                          .norm());
  return d;
}

struct SyncReport {
  std::vector<double> times;
  std::vector<double> distance;
  double window = 0.0;
  double threshold = 0.0;
  double final_window_mean = 0.0;
  bool synchronized = false;
};

/// Synchronized iff the mean of d(t) over output samples with
/// t >= last - window is below threshold.
inline SyncReport sync_report(const Trajectory& traj, double threshold, double window,
                              std::size_t stride = 1) {
  if (traj.nodes() < 2) throw std::invalid_argument("synchronization needs at least two nodes");
  if (!(threshold > 0.0)) throw std::invalid_argument("threshold must be positive");
  if (!(window > 0.0) || window > traj.last_time())
    throw std::invalid_argument("window must lie in (0, horizon]");
  SyncReport r;
  r.window = window;
  r.threshold = threshold;
  const double start = traj.last_time() - window;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k : output_indices(traj, stride)) {
    const double t = traj.times()[k];
    const double d = max_pairwise_distance(traj.state(k), traj.nodes(), traj.node_dim());
    r.times.push_back(t);
    r.distance.push_back(d);
    if (t >= start) {
      sum += d;
      ++count;
    }
  }
  r.final_window_mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
  r.synchronized = r.final_window_mean < threshold;
  return r;
}

}  // namespace delaynet
