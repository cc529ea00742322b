#pragma once

// CSV and text serialization of trajectories and reports. Numbers are
// written in shortest round-trip decimal form.

#include <charconv>
#include <ostream>
#include <string>
#include <system_error>

#include "delaynet/certificates.hpp"
#include "delaynet/diagnostics.hpp"
#include "delaynet/history.hpp"
#include "delaynet/integrator.hpp"

namespace delaynet::io {

inline std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc{}) return "nan";
  return std::string(buf, res.ptr);
}

/// Header `t,x1_1,..,x1_n,...,xm_1,..,xm_n`, one row per output sample.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, std::size_t stride = 1) {
  os << 't';
  for (std::size_t i = 1; i <= traj.nodes(); ++i)
    for (std::size_t c = 1; c <= traj.node_dim(); ++c) os << ",x" << i << '_' << c;
  os << '\n';
  for (std::size_t k : output_indices(traj, stride)) {
    os << num(traj.times()[k]);
    for (double v : traj.state(k)) os << ',' << num(v);
    os << '\n';
  }
}

/// Summary block as `# key: value` lines, then per-sample columns.
inline void write_envelope_csv(std::ostream& os, const EnvelopeReport& r) {
  os << "# eta: " << num(r.eta) << '\n'
     << "# M0: " << num(r.M0) << '\n'
     << "# max_violation: " << num(r.max_violation) << '\n'
     << "# rel_tol: " << num(r.rel_tol) << '\n'
     << "# state_bound: " << num(r.state_bound) << '\n'
     << "# min_state_margin: " << num(r.min_state_margin) << '\n'
     << "# verdict: " << (r.pass() ? "pass" : "fail") << '\n';
  os << "t,V,M,bound,state_norm\n";
  for (std::size_t k = 0; k < r.times.size(); ++k)
    os << num(r.times[k]) << ',' << num(r.V[k]) << ',' << num(r.M[k]) << ',' << num(r.bound[k])
       << ',' << num(r.state_norm[k]) << '\n';
}

inline void write_sync_csv(std::ostream& os, const SyncReport& r, bool expected = true) {
  os << "# threshold: " << num(r.threshold) << '\n'
     << "# window: " << num(r.window) << '\n'
     << "# final_window_mean: " << num(r.final_window_mean) << '\n'
     << "# synchronized: " << (r.synchronized ? "true" : "false") << '\n'
     << "# expected: " << (expected ? "true" : "false") << '\n'
     << "# verdict: " << (r.synchronized == expected ? "pass" : "fail") << '\n';
  os << "t,max_pairwise_distance\n";
  for (std::size_t k = 0; k < r.times.size(); ++k)
    os << num(r.times[k]) << ',' << num(r.distance[k]) << '\n';
}

inline std::string vec(const Vector& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += num(v(i));
  }
  return s + "]";
}

inline void write_certificate_report(std::ostream& os, const QuadCertificate& cert,
                                     const QuadCheckResult& check, const ProofConstants* pc) {
  os << "verdict: " << (check.pass ? "pass" : "fail") << '\n'
     << "probes: " << check.probes << '\n'
     << "epsilon: " << num(cert.epsilon()) << '\n'
     << "Delta: " << vec(cert.Delta()) << '\n';
  if (check.counterexample) {
    const auto& c = *check.counterexample;
    os << "counterexample.probe: " << c.probe << '\n'
       << "counterexample.t: " << num(c.t) << '\n'
       << "counterexample.u1: " << vec(c.u1) << '\n'
       << "counterexample.u2: " << vec(c.u2) << '\n'
       << "counterexample.lhs: " << num(c.lhs) << '\n'
       << "counterexample.rhs: " << num(c.rhs) << '\n';
  }
  if (pc) {
    os << "delta: " << num(pc->delta) << '\n'
       << "alpha: " << num(pc->alpha) << '\n'
       << "beta: " << num(pc->beta) << '\n'
       << "gamma: " << num(pc->gamma) << '\n'
       << "K: " << num(pc->K) << '\n'
       << "lambda_min: " << num(pc->lambda_min) << '\n'
       << "norm_P: " << num(pc->norm_P) << '\n'
       << "eta: " << num(pc->eta) << '\n';
  }
}

}  // namespace delaynet::io
