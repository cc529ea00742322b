// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "delaynet/scenario.hpp"

using namespace delaynet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%s criterion %d: %s [%s] (%.2fs)\n", o.pass ? "PASS" : "FAIL", id, title,
              o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Vector one(double v) { return Vector::Constant(1, v); }

NetworkModel scalar_model(double b, double a, double tau) {
  return NetworkModel(1, nodes::linear(Matrix::Constant(1, 1, b)),
                      OutputFunction::linear(Matrix(Matrix::Identity(1, 1))),
                      CouplingSchedule::constant(Matrix::Constant(1, 1, a)),
                      DelaySchedule{[tau](std::size_t, std::size_t, double) { return tau; }},
                      DelayKernel::dirac());
}

double decay_error(Method method, double h) {
  const auto r = integrate(scalar_model(-1.0, 0.0, 0.0), HistoryFunction::constant(one(1.0)),
                           {method, h, 1.0, 1});
  return std::abs(r.trajectory.eval(1.0)(0) - std::exp(-1.0));
}

NetworkModel chua_network(double c) {
  return make_example(
      Example3Params{nodes::chua(), normalized_adjacency("all-to-all", 3), c, Vector::Ones(3), 0.01});
}

Vector chua_x0() {
  Vector x0(9);
  x0 << 0.1, 0.0, -0.1, -0.2, 0.1, 0.3, 0.4, -0.1, 0.0;
  return x0;
}

// Shared state for criteria 7, 8 and 10.
struct ChuaRun {
  IntegrationResult result;
  QuadCertificate cert;
  QuadCheckResult quad;
  ProofConstants pc;
  EnvelopeReport env;
};

ChuaRun run_chua_envelope() {
  const auto model = chua_network(10.0);
  const double radius = 10.0;
  auto cert = lipschitz_certificate(3, model.f().lipschitz_on_box(radius), 0.1);
  auto quad = check_quad(model.f(), cert, Box::cube(3, radius), {0.0, 10.0}, 20000, 7);
  auto result = integrate(model, HistoryFunction::constant(chua_x0()), {Method::rk4, 1e-3, 10.0, 1});
  const auto pc = proof_constants(model, cert, chua_x0(), 10.0);
  auto env = check_envelope(result.trajectory, pc.eta, cert.P(), 1e-6);
  return ChuaRun{std::move(result), std::move(cert), std::move(quad), pc, std::move(env)};
}

double sync_mean(double c) {
  const auto r = integrate(chua_network(c), HistoryFunction::constant(chua_x0()),
                           {Method::rk4, 1e-3, 50.0, 1});
  if (!r.ok()) throw std::runtime_error("integration failed: " + r.message);
  return sync_report(r.trajectory, 1e-3, 10.0).final_window_mean;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + DELAYNET_CLI + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

int main() {
  criterion(1, "ODE oracle x' = -x", [] {
    const auto start = std::chrono::steady_clock::now();
    const double rk4 = decay_error(Method::rk4, 1e-3);
    const double euler = decay_error(Method::euler, 1e-3);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return Outcome{rk4 < 1e-9 && euler < 1e-3 && secs < 1.0,
                   "rk4 err " + fmt(rk4) + ", euler err " + fmt(euler)};
  });

  criterion(2, "DDE oracle x' = -x(t-1)", [] {
    const auto start = std::chrono::steady_clock::now();
    const auto r = integrate(scalar_model(0.0, -1.0, 1.0), HistoryFunction::constant(one(1.0)),
                             {Method::rk4, 1e-3, 2.0, 1});
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double e1 = std::abs(r.trajectory.eval(1.0)(0));
    const double e2 = std::abs(r.trajectory.eval(2.0)(0) + 0.5);
    return Outcome{r.ok() && e1 < 1e-6 && e2 < 1e-6 && secs < 1.0,
                   "err(1) " + fmt(e1) + ", err(2) " + fmt(e2)};
  });

  criterion(3, "convergence order", [] {
    const double rk4 = decay_error(Method::rk4, 0.1) / decay_error(Method::rk4, 0.05);
    const double euler = decay_error(Method::euler, 0.01) / decay_error(Method::euler, 0.005);
    return Outcome{rk4 >= 12.0 && rk4 <= 20.0 && euler >= 1.8 && euler <= 2.2,
                   "rk4 ratio " + fmt(rk4) + ", euler ratio " + fmt(euler)};
  });

  criterion(4, "exponential kernel quadrature", [] {
    const auto plan = build_quadrature(DelayKernel::exponential(1.0, 1.0), 1e-10, 1e-3);
    auto past = [](double q) { return one(std::sin(q)); };
    auto g = [](double, const Vector& u) { return u; };
    const double t = 5.0;
    const long points = 10'000'000;
    const double upper = 40.0, ds = upper / static_cast<double>(points);
    double oracle = 0.0;
    for (long k = 0; k < points; ++k) {
      const double s = (static_cast<double>(k) + 0.5) * ds;
      oracle += std::sin(t - s) * std::exp(-s);
    }
    oracle *= ds;
    const double rel = std::abs(convolve(plan, g, past, t, 0.0)(0) - oracle) / std::abs(oracle);
    return Outcome{rel < 1e-6, "relative error " + fmt(rel)};
  });

  criterion(5, "reduction equivalence", [] {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-2.0, 2.0), ut(0.0, 10.0), u01(0.0, 1.0);
    const Eigen::Index m = 3, n = 3;
    auto random_past = [&]() {
      Vector b(m * n), w(m * n), p(m * n);
      for (Eigen::Index c = 0; c < m * n; ++c) {
        b(c) = u(rng);
        w(c) = u(rng);
        p(c) = u(rng);
      }
      return [b, w, p](double q) -> Vector { return b + (w * q + p).array().sin().matrix(); };
    };
    const auto f = nodes::chua();
    Matrix a(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < m; ++j)
        if (i != j) s += a(i, j) = u01(rng);
      a(i, i) = -s;
    }
    Matrix gamma(n, n);
    gamma << 0.5, -0.3, 0.1, 0.2, 1.0, -0.7, 0.0, 0.4, 0.9;
    const auto ex1 = make_example(Example1Params{3, f, a, gamma});
    const Matrix w = normalized_adjacency("ring", 3);
    Vector gd(3);
    gd << 1.0, 0.5, 0.0;
    const double c = 4.0, tau = 0.37;
    const auto ex3 = make_example(Example3Params{f, w, c, gd, tau});
    double worst = 0.0;
    for (int probe = 0; probe < 100; ++probe) {
      const auto past = random_past();
      const double t = ut(rng);
      const Vector now = past(t), lag = past(t - tau);
      const Vector g1 = rhs(ex1, t, past), g3 = rhs(ex3, t, past);
      for (Eigen::Index i = 0; i < m; ++i) {
        Vector w1 = f(t, now.segment(i * n, n));
        Vector w3 = w1;
        for (Eigen::Index j = 0; j < m; ++j) {
          w1 += a(i, j) * gamma * now.segment(j * n, n);
          if (j != i) w3 += c * w(i, j) * gd.cwiseProduct(lag.segment(j * n, n) - now.segment(i * n, n));
        }
        worst = std::max(worst, (g1.segment(i * n, n) - w1).cwiseAbs().maxCoeff());
        worst = std::max(worst, (g3.segment(i * n, n) - w3).cwiseAbs().maxCoeff());
      }
    }
    return Outcome{worst < 1e-12, "max abs difference " + fmt(worst)};
  });

  criterion(6, "QUAD checker soundness", [] {
    const QuadCertificate cert(Matrix::Identity(2, 2), Vector::Zero(2), 1.0);
    const auto grow = check_quad(nodes::linear(Matrix::Identity(2, 2)),
                                 QuadCertificate(Matrix::Identity(2, 2), Vector::Zero(2), 1e-3),
                                 Box::cube(2, 10.0), {0.0, 1.0}, 1000, 1);
    const auto decay = check_quad(nodes::linear(-Matrix::Identity(2, 2)), cert, Box::cube(2, 10.0),
                                  {0.0, 1.0}, 100000, 1);
    bool explicit_ce = false;
    std::string where = "none";
    if (grow.counterexample) {
      const auto& ce = *grow.counterexample;
      const Vector d = ce.u1 - ce.u2;
      explicit_ce = ce.lhs > ce.rhs && std::abs(ce.lhs - d.squaredNorm()) <= 1e-9 * d.squaredNorm();
      where = "probe " + std::to_string(ce.probe);
    }
    return Outcome{!grow.pass && explicit_ce && decay.pass && decay.probes == 100000,
                   "f=u counterexample at " + where + ", f=-u " + (decay.pass ? "passes" : "fails") +
                       " " + std::to_string(decay.probes) + " probes"};
  });

  std::optional<ChuaRun> run;
  bool chua_ok = false;
  criterion(7, "envelope M(t) <= M(0) e^{eta t}", [&] {
    run = run_chua_envelope();
    const auto& chua = *run;
    chua_ok = chua.result.ok();
    return Outcome{chua.quad.pass && chua.result.ok() && chua.env.envelope_ok,
                   std::string("quad ") + (chua.quad.pass ? "pass" : "fail") + ", eta " +
                       fmt(chua.pc.eta) + ", max violation " + fmt(chua.env.max_violation)};
  });

  criterion(8, "state bound", [&] {
    if (!chua_ok) return Outcome{false, "criterion 7 run unavailable"};
    const auto& chua = *run;
    return Outcome{chua.env.state_bound_ok, "bound " + fmt(chua.env.state_bound) +
                                                ", min margin " + fmt(chua.env.min_state_margin)};
  });

  criterion(9, "synchronization c=10 vs c=0", [] {
    const double synced = sync_mean(10.0);
    const double free = sync_mean(0.0);
    return Outcome{synced < 1e-3 && free > 0.1,
                   "c=10 mean " + fmt(synced) + ", c=0 mean " + fmt(free)};
  });

  criterion(10, "invariant suites", [&] {
    std::ostringstream why;
    bool ok = chua_ok;
    if (!chua_ok) why << "no trajectory; ";
    if (chua_ok) {
      const auto& chua = *run;
      const auto& tr = chua.result.trajectory;
      const Matrix& P = chua.cert.P();
      double prev = 0.0;
      bool mono = true, floor = true, dominated = true;
      for (std::size_t k = 0; k < tr.size(); k += 50) {
        const double t = tr.times()[k];
        const double mt = compute_M(tr, t, P);
        mono = mono && mt >= prev;
        floor = floor && mt >= 0.5;
        dominated = dominated && compute_V(tr, t, P) <= mt;
        prev = mt;
      }
      if (!mono) why << "M decreased; ";
      if (!floor) why << "M below 1/2; ";
      if (!dominated) why << "V above M; ";
      ok = ok && mono && floor && dominated;

      const auto again =
          integrate(chua_network(10.0), HistoryFunction::constant(chua_x0()), {Method::rk4, 1e-3, 10.0, 1});
      bool same = again.trajectory.size() == tr.size();
      for (std::size_t k = 0; same && k < tr.size(); ++k)
        same = again.trajectory.state(k) == tr.state(k) && again.trajectory.times()[k] == tr.times()[k];
      if (!same) why << "rerun differs; ";
      ok = ok && same;
    }

    Matrix p(3, 3);
    p << 3.0, 0.5, 0.1, 0.5, 1.0, -0.3, 0.1, -0.3, 0.4;
    Eigen::SelfAdjointEigenSolver<Matrix> es(p);
    std::mt19937_64 rng(10);
    std::normal_distribution<double> nd;
    bool equiv = true;
    for (int k = 0; k < 1000; ++k) {
      Vector x(3);
      for (auto& v : x) v = nd(rng);
      const double pn = p_norm(x, p), n2 = x.norm();
      equiv = equiv && pn >= std::sqrt(es.eigenvalues().minCoeff()) * n2 * (1 - 1e-12) &&
              pn <= std::sqrt(es.eigenvalues().maxCoeff()) * n2 * (1 + 1e-12);
    }
    if (!equiv) why << "P-norm equivalence; ";
    ok = ok && equiv;

    const fs::path out = fs::temp_directory_path() / "delaynet_acceptance";
    std::size_t count = 0;
    for (const auto& e : fs::directory_iterator(fs::path(DELAYNET_SOURCE_DIR) / "scenarios")) {
      if (e.path().extension() != ".json") continue;
      ++count;
      const std::string file = "\"" + e.path().string() + "\"";
      const int v = run_cli("validate " + file);
      const int r = run_cli("run " + file + " --quiet --out \"" +
                            (out / e.path().stem()).string() + "\"");
      if (v != 0 || r != 0) {
        why << e.path().filename().string() << " exit " << v << "/" << r << "; ";
        ok = false;
      }
    }
    fs::remove_all(out);
    why << count << " bundled scenarios";
    return Outcome{ok && count > 0, why.str()};
  });

  std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
