#pragma once

// Fixed-step explicit integration of the delayed network, by the method of
// steps: every delayed argument is read back from the trajectory built so
// far.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "delaynet/dynamics.hpp"
#include "delaynet/history.hpp"

namespace delaynet {

enum class Method { euler, rk4 };

struct IntegratorConfig {
  Method method = Method::rk4;
  double step = 1e-3;
  double horizon = 1.0;
  std::size_t output_stride = 1;
  Interpolation interpolation = Interpolation::linear;

  void validate() const {
    if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("step must be positive");
    if (!(horizon >= step) || !std::isfinite(horizon))
      throw std::invalid_argument("horizon must be at least one step");
    if (output_stride < 1) throw std::invalid_argument("output_stride must be >= 1");
  }
};

enum class IntegrationStatus { completed, blow_up };

struct IntegrationResult {
  Trajectory trajectory;
  IntegrationStatus status = IntegrationStatus::completed;
  /// First time at which a non-finite or oversized state appeared.
  double failure_time = 0.0;
  std::string message;
  /// Stage lookups that fell strictly between the last accepted state and
  /// the stage time, served by linear blending with the stage predictor.
  std::size_t extrapolated_lookups = 0;

  bool ok() const { return status == IntegrationStatus::completed; }
};

/// Any component above this magnitude halts integration as a blow-up.
inline constexpr double kBlowUpThreshold = 1e12;

namespace detail {

inline bool state_ok(const Vector& x) {
  return x.allFinite() && x.cwiseAbs().maxCoeff() <= kBlowUpThreshold;
}

// History seen by one RK stage at time `ts` with stage vector `y`: accepted
// samples up to `tn`, the stage vector itself at ts, and a linear blend of
// x(tn) and y in between.
struct StageHistory {
  const Trajectory& traj;
  double tn;
  const Vector& xn;
  double ts;
  const Vector& y;
  std::size_t& blended;

  Vector operator()(double q) const {
    if (q == ts) return y;
    if (q <= tn) return traj.eval(q);
    if (q > ts)
      throw HistoryError("lookup at t=" + std::to_string(q) + " after stage time " +
                         std::to_string(ts) + " (negative delay?)");
    ++blended;
    const double lam = (q - tn) / (ts - tn);
    return (1.0 - lam) * xn + lam * y;
  }
};

}  // namespace detail

inline std::size_t step_count(const IntegratorConfig& cfg) {
  return static_cast<std::size_t>(std::ceil(cfg.horizon / cfg.step - 1e-9));
}

inline IntegrationResult integrate(const NetworkModel& model, const HistoryFunction& initial,
                                   const IntegratorConfig& cfg) {
  cfg.validate();
  IntegrationResult res{Trajectory(model.nodes(), model.node_dim(), initial, cfg.interpolation)};
  Trajectory& traj = res.trajectory;
  if (!detail::state_ok(traj.state(0))) {
    res.status = IntegrationStatus::blow_up;
    res.message = "initial state is not finite or exceeds the blow-up threshold";
    return res;
  }

  const std::size_t steps = step_count(cfg);
  for (std::size_t k = 0; k < steps; ++k) {
    const double tn = traj.last_time();
    const double tn1 = (k + 1 == steps) ? cfg.horizon : static_cast<double>(k + 1) * cfg.step;
    const double h = tn1 - tn;
    const Vector xn = traj.state(traj.size() - 1);
    Vector next;
    try {
      auto stage = [&](double ts, const Vector& y) {
        return rhs(model, ts, detail::StageHistory{traj, tn, xn, ts, y, res.extrapolated_lookups});
      };
      if (cfg.method == Method::euler) {
        next = xn + h * stage(tn, xn);
      } else {
        const Vector k1 = stage(tn, xn);
        const Vector y2 = xn + 0.5 * h * k1;
        const Vector k2 = stage(tn + 0.5 * h, y2);
        const Vector y3 = xn + 0.5 * h * k2;
        const Vector k3 = stage(tn + 0.5 * h, y3);
        const Vector y4 = xn + h * k3;
        const Vector k4 = stage(tn1, y4);
        next = xn + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
    } catch (const RhsError& e) {
      res.status = IntegrationStatus::blow_up;
      res.failure_time = e.time();
      res.message = e.what();
      return res;
    }
    if (!detail::state_ok(next)) {
      res.status = IntegrationStatus::blow_up;
      res.failure_time = tn1;
      res.message = "state left the finite range at t=" + std::to_string(tn1);
      return res;
    }
    traj.append(tn1, std::move(next));
  }
  return res;
}

/// Sample indices emitted at the given stride; the final sample is always
/// included.
inline std::vector<std::size_t> output_indices(const Trajectory& traj, std::size_t stride) {
  stride = std::max<std::size_t>(stride, 1);
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < traj.size(); k += stride) idx.push_back(k);
  if (idx.back() != traj.size() - 1) idx.push_back(traj.size() - 1);
  return idx;
}

}  // namespace delaynet
