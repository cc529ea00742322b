#pragma once

// Declarative JSON scenarios: model, initial history, integrator,
// optional certificate and diagnostics. The accepted document shape is
// published as schemas/scenario.json; load_scenario() enforces the same
// rules and reports every problem with a JSON pointer and source line.

#include <cctype>
#include <cstring>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "delaynet/certificates.hpp"
#include "delaynet/diagnostics.hpp"
#include "delaynet/dynamics.hpp"
#include "delaynet/integrator.hpp"
#include "delaynet/io.hpp"
#include "delaynet/kernels.hpp"
#include "delaynet/nodes.hpp"

namespace delaynet {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

struct ValidationError {
  std::string pointer;
  int line = 0;
  std::string message;

  std::string to_string() const {
    return (line > 0 ? "line " + std::to_string(line) + ": " : std::string()) +
           (pointer.empty() ? "/" : pointer) + ": " + message;
  }
};

class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(std::vector<ValidationError> errors)
      : std::runtime_error(join(errors)), errors_(std::move(errors)) {}
  const std::vector<ValidationError>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<ValidationError>& errs) {
    std::string s;
    for (const auto& e : errs) s += (s.empty() ? "" : "\n") + e.to_string();
    return s;
  }
  std::vector<ValidationError> errors_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CertificateSection {
  QuadCertificate cert;
  double box_radius = 10.0;
  std::size_t probes = 10000;
  std::size_t constants_grid = 1001;
};

struct SyncSection {
  double threshold = 1e-3;
  double window = 1.0;
  bool expect_synchronized = true;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  NetworkModel model;
  HistoryFunction initial;
  IntegratorConfig integrator;
  std::optional<CertificateSection> certificate;
  double envelope_rel_tol = 1e-6;
  std::optional<SyncSection> sync;
  std::string output_dir = "out";
};

namespace detail {

// Maps JSON pointers to the 1-based line where the value starts.
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) : s_(text) {
    try {
      skip();
      value("");
    } catch (...) {
      // malformed input is reported by the real parser
    }
  }

  int line_of(std::string pointer) const {
    while (true) {
      if (auto it = lines_.find(pointer); it != lines_.end()) return it->second;
      if (pointer.empty()) return 0;
      pointer.erase(pointer.rfind('/'));
    }
  }

 private:
  void skip() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) {
      if (s_[i_] == '\n') ++line_;
      ++i_;
    }
  }
  std::string str() {
    std::string out;
    ++i_;
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\') out += s_[i_++];
      out += s_[i_++];
    }
    ++i_;
    return out;
  }
  static std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) out += c == '~' ? "~0" : c == '/' ? "~1" : std::string(1, c);
    return out;
  }
  void value(const std::string& ptr) {
    lines_.emplace(ptr, line_);
    if (i_ >= s_.size()) throw std::out_of_range("eof");
    const char c = s_[i_];
    if (c == '{') {
      ++i_;
      skip();
      while (i_ < s_.size() && s_[i_] != '}') {
        const std::string key = str();
        skip();
        ++i_;  // ':'
        skip();
        value(ptr + "/" + escape(key));
        skip();
        if (i_ < s_.size() && s_[i_] == ',') ++i_;
        skip();
      }
      ++i_;
    } else if (c == '[') {
      ++i_;
      skip();
      std::size_t k = 0;
      while (i_ < s_.size() && s_[i_] != ']') {
        value(ptr + "/" + std::to_string(k++));
        skip();
        if (i_ < s_.size() && s_[i_] == ',') ++i_;
        skip();
      }
      ++i_;
    } else if (c == '"') {
      str();
    } else {
      while (i_ < s_.size() && !std::strchr(",}] \t\r\n", s_[i_])) ++i_;
    }
  }

  const std::string& s_;
  std::size_t i_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;
};

// Collects errors while reading a scenario document.
class Reader {
 public:
  explicit Reader(const LineIndex* lines) : lines_(lines) {}

  void error(const std::string& ptr, const std::string& msg) {
    errors_.push_back({ptr, lines_ ? lines_->line_of(ptr) : 0, msg});
  }
  bool ok() const { return errors_.empty(); }
  std::vector<ValidationError>& errors() { return errors_; }

  const json* object(const json& parent, const std::string& key, const std::string& ptr,
                     bool required) {
    if (!parent.contains(key)) {
      if (required) error(ptr, "missing required key '" + key + "'");
      return nullptr;
    }
    const json& v = parent.at(key);
    if (!v.is_object()) {
      error(ptr + "/" + key, "expected an object");
      return nullptr;
    }
    return &v;
  }

  void allow(const json& obj, const std::string& ptr, std::initializer_list<const char*> keys) {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, _] : obj.items())
      if (!ok.count(k)) error(ptr + "/" + k, "unknown key '" + k + "'");
  }

  std::optional<double> number(const json& obj, const std::string& key, const std::string& ptr,
                               std::optional<double> fallback = std::nullopt) {
    if (!obj.contains(key)) {
      if (!fallback) error(ptr, "missing required key '" + key + "'");
      return fallback;
    }
    const json& v = obj.at(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
      error(ptr + "/" + key, "expected a finite number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  std::optional<std::int64_t> integer(const json& obj, const std::string& key,
                                      const std::string& ptr,
                                      std::optional<std::int64_t> fallback = std::nullopt,
                                      std::int64_t minimum = 0) {
    if (!obj.contains(key)) {
      if (!fallback) error(ptr, "missing required key '" + key + "'");
      return fallback;
    }
    const json& v = obj.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < minimum) {
      error(ptr + "/" + key, "expected an integer >= " + std::to_string(minimum));
      return std::nullopt;
    }
    return v.get<std::int64_t>();
  }

  std::optional<std::string> string(const json& obj, const std::string& key,
                                    const std::string& ptr,
                                    std::optional<std::string> fallback = std::nullopt) {
    if (!obj.contains(key)) {
      if (!fallback) error(ptr, "missing required key '" + key + "'");
      return fallback;
    }
    if (!obj.at(key).is_string()) {
      error(ptr + "/" + key, "expected a string");
      return std::nullopt;
    }
    return obj.at(key).get<std::string>();
  }

  std::optional<Vector> vector(const json& v, const std::string& ptr,
                               std::optional<Eigen::Index> len = std::nullopt) {
    if (!v.is_array() || v.empty()) {
      error(ptr, "expected a nonempty array of numbers");
      return std::nullopt;
    }
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!v[k].is_number() || !std::isfinite(v[k].get<double>())) {
        error(ptr + "/" + std::to_string(k), "expected a finite number");
        return std::nullopt;
      }
      out(static_cast<Eigen::Index>(k)) = v[k].get<double>();
    }
    if (len && out.size() != *len) {
      error(ptr, "dimension mismatch: length " + std::to_string(out.size()) + ", expected " +
                     std::to_string(*len));
      return std::nullopt;
    }
    return out;
  }

  std::optional<Matrix> matrix(const json& v, const std::string& ptr,
                               std::optional<Eigen::Index> rows = std::nullopt,
                               std::optional<Eigen::Index> cols = std::nullopt) {
    if (!v.is_array() || v.empty() || !v[0].is_array()) {
      error(ptr, "expected a row-major matrix (array of arrays)");
      return std::nullopt;
    }
    const auto r = static_cast<Eigen::Index>(v.size());
    const auto c = static_cast<Eigen::Index>(v[0].size());
    Matrix out(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      const std::string rp = ptr + "/" + std::to_string(i);
      auto row = vector(v[static_cast<std::size_t>(i)], rp, c);
      if (!row) return std::nullopt;
      out.row(i) = row->transpose();
    }
    if ((rows && r != *rows) || (cols && c != *cols)) {
      error(ptr, "dimension mismatch: shape " + std::to_string(r) + "x" + std::to_string(c) +
                     ", expected " + std::to_string(rows.value_or(r)) + "x" +
                     std::to_string(cols.value_or(c)));
      return std::nullopt;
    }
    return out;
  }

 private:
  const LineIndex* lines_;
  std::vector<ValidationError> errors_;
};

inline std::optional<DelayKernel> read_kernel(Reader& rd, const json& v, const std::string& ptr) {
  if (!v.is_object()) {
    rd.error(ptr, "expected a kernel object");
    return std::nullopt;
  }
  const auto type = rd.string(v, "type", ptr);
  if (!type) return std::nullopt;
  try {
    if (*type == "dirac") {
      rd.allow(v, ptr, {"type", "location", "weight"});
      auto loc = rd.number(v, "location", ptr, 0.0);
      auto w = rd.number(v, "weight", ptr, 1.0);
      if (loc && *loc < 0.0) {
        rd.error(ptr + "/location", "atom location must be nonnegative");
        return std::nullopt;
      }
      if (loc && w) return DelayKernel::dirac(*loc, *w);
    } else if (*type == "exponential") {
      rd.allow(v, ptr, {"type", "rate", "weight"});
      auto rate = rd.number(v, "rate", ptr);
      auto w = rd.number(v, "weight", ptr, 1.0);
      if (rate && *rate <= 0.0) {
        rd.error(ptr + "/rate", "exponential rate must be positive");
        return std::nullopt;
      }
      if (rate && w) return DelayKernel::exponential(*rate, *w);
    } else if (*type == "uniform") {
      rd.allow(v, ptr, {"type", "a", "b", "weight"});
      auto a = rd.number(v, "a", ptr);
      auto b = rd.number(v, "b", ptr);
      auto w = rd.number(v, "weight", ptr, 1.0);
      if (a && b && !(*a >= 0.0 && *a < *b)) {
        rd.error(ptr, "uniform kernel requires 0 <= a < b");
        return std::nullopt;
      }
      if (a && b && w) return DelayKernel::uniform(*a, *b, *w);
    } else if (*type == "mixture") {
      rd.allow(v, ptr, {"type", "components"});
      if (!v.contains("components") || !v["components"].is_array() || v["components"].empty()) {
        rd.error(ptr + "/components", "mixture needs a nonempty 'components' array");
        return std::nullopt;
      }
      std::vector<DelayKernel> parts;
      for (std::size_t k = 0; k < v["components"].size(); ++k) {
        auto part = read_kernel(rd, v["components"][k], ptr + "/components/" + std::to_string(k));
        if (!part) return std::nullopt;
        parts.push_back(std::move(*part));
      }
      return DelayKernel::mixture(parts);
    } else {
      rd.error(ptr + "/type", "unknown kernel type '" + *type + "'");
    }
  } catch (const KernelError& e) {
    rd.error(ptr, e.what());
  }
  return std::nullopt;
}

inline std::optional<NodeDynamics> read_node(Reader& rd, const json& v, const std::string& ptr) {
  const auto type = rd.string(v, "type", ptr);
  if (!type) return std::nullopt;
  try {
    if (*type == "linear") {
      rd.allow(v, ptr, {"type", "B"});
      if (!v.contains("B")) {
        rd.error(ptr, "missing required key 'B'");
        return std::nullopt;
      }
      auto b = rd.matrix(v["B"], ptr + "/B");
      if (!b) return std::nullopt;
      if (b->rows() != b->cols()) {
        rd.error(ptr + "/B", "dimension mismatch: B must be square");
        return std::nullopt;
      }
      return nodes::linear(*b);
    }
    if (*type == "chua") {
      rd.allow(v, ptr, {"type", "alpha", "beta", "m0", "m1"});
      nodes::ChuaParams p;
      auto a = rd.number(v, "alpha", ptr, p.alpha);
      auto b = rd.number(v, "beta", ptr, p.beta);
      auto m0 = rd.number(v, "m0", ptr, p.m0);
      auto m1 = rd.number(v, "m1", ptr, p.m1);
      if (!a || !b || !m0 || !m1) return std::nullopt;
      return nodes::chua({*a, *b, *m0, *m1});
    }
    if (*type == "hopfield") {
      rd.allow(v, ptr, {"type", "decay", "W", "bias"});
      if (!v.contains("decay") || !v.contains("W")) {
        rd.error(ptr, "hopfield node needs 'decay' and 'W'");
        return std::nullopt;
      }
      auto d = rd.vector(v["decay"], ptr + "/decay");
      if (!d) return std::nullopt;
      auto w = rd.matrix(v["W"], ptr + "/W", d->size(), d->size());
      std::optional<Vector> bias = Vector(Vector::Zero(d->size()));
      if (v.contains("bias")) bias = rd.vector(v["bias"], ptr + "/bias", d->size());
      if (!w || !bias) return std::nullopt;
      return nodes::hopfield(*d, *w, *bias);
    }
    if (*type == "tanh") {
      rd.allow(v, ptr, {"type", "dim"});
      auto n = rd.integer(v, "dim", ptr, std::nullopt, 1);
      if (!n) return std::nullopt;
      return nodes::tanh_field(static_cast<std::size_t>(*n));
    }
    rd.error(ptr + "/type", "unknown node type '" + *type + "'");
  } catch (const ModelError& e) {
    rd.error(ptr, e.what());
  }
  return std::nullopt;
}

struct ModelPieces {
  std::optional<NodeDynamics> f;
  std::optional<OutputFunction> g;
  std::optional<CouplingSchedule> a;
  std::optional<DelaySchedule> tau;
  std::vector<DelayKernel> kernels;
  QuadratureOptions quad;
};

inline std::optional<NetworkModel> read_model(Reader& rd, const json& v, const std::string& ptr) {
  rd.allow(v, ptr, {"nodes", "node", "coupling", "output", "delays", "kernels", "quadrature"});
  const auto m_opt = rd.integer(v, "nodes", ptr, std::nullopt, 1);
  const json* node = rd.object(v, "node", ptr, true);
  if (!m_opt || !node) return std::nullopt;
  const auto m = static_cast<std::size_t>(*m_opt);
  const auto mi = static_cast<Eigen::Index>(m);
  ModelPieces pc;
  pc.f = read_node(rd, *node, ptr + "/node");
  if (!pc.f) return std::nullopt;
  const auto n = static_cast<Eigen::Index>(pc.f->dim);

  // coupling
  if (const json* c = rd.object(v, "coupling", ptr, true)) {
    const std::string cp = ptr + "/coupling";
    rd.allow(*c, cp, {"matrix", "topology", "strength", "zero_row_sums", "nonneg_off_diagonal",
                      "modulation"});
    std::optional<Matrix> a0;
    bool zero_rows = false, nonneg = false;
    if (c->contains("matrix") == c->contains("topology")) {
      rd.error(cp, "give exactly one of 'matrix' or 'topology'");
    } else if (c->contains("matrix")) {
      a0 = rd.matrix((*c)["matrix"], cp + "/matrix", mi, mi);
      zero_rows = c->value("zero_row_sums", false);
      nonneg = c->value("nonneg_off_diagonal", false);
    } else {
      const auto topo = rd.string(*c, "topology", cp);
      const auto strength = rd.number(*c, "strength", cp);
      if (strength && *strength < 0.0) rd.error(cp + "/strength", "strength must be >= 0");
      if (topo && strength && *strength >= 0.0) {
        if (*topo != "ring" && *topo != "all-to-all") {
          rd.error(cp + "/topology", "unknown topology '" + *topo + "'");
        } else {
          a0 = *strength * (normalized_adjacency(*topo, m) - Matrix::Identity(mi, mi));
          zero_rows = nonneg = true;
        }
      }
    }
    double amp = 0.0, freq = 0.0;
    if (const json* mod = rd.object(*c, "modulation", cp, false)) {
      rd.allow(*mod, cp + "/modulation", {"amplitude", "frequency"});
      auto a = rd.number(*mod, "amplitude", cp + "/modulation");
      auto w = rd.number(*mod, "frequency", cp + "/modulation", 1.0);
      if (a && std::abs(*a) > 1.0)
        rd.error(cp + "/modulation/amplitude", "amplitude must lie in [-1, 1]");
      if (a && w) {
        amp = *a;
        freq = *w;
      }
    }
    if (a0) {
      if (amp == 0.0) {
        try {
          pc.a = CouplingSchedule::constant(*a0, zero_rows, nonneg);
        } catch (const ModelError& e) {
          rd.error(cp + "/matrix", e.what());
        }
      } else {
        pc.a = CouplingSchedule{
            [a0 = *a0, amp, freq](double t) -> Matrix { return (1.0 + amp * std::sin(freq * t)) * a0; },
            zero_rows, nonneg};
        try {
          pc.a->require_flags(0.0);
        } catch (const ModelError& e) {
          rd.error(cp, e.what());
        }
      }
    }
  }

  // output g(t, u) = Gamma u
  {
    Matrix gamma = Matrix::Identity(n, n);
    if (const json* o = rd.object(v, "output", ptr, false)) {
      const std::string op = ptr + "/output";
      rd.allow(*o, op, {"Gamma", "Gamma_diag"});
      if (o->contains("Gamma") && o->contains("Gamma_diag")) {
        rd.error(op, "give at most one of 'Gamma' or 'Gamma_diag'");
      } else if (o->contains("Gamma")) {
        if (auto g = rd.matrix((*o)["Gamma"], op + "/Gamma", n, n)) gamma = *g;
      } else if (o->contains("Gamma_diag")) {
        if (auto g = rd.vector((*o)["Gamma_diag"], op + "/Gamma_diag", n))
          gamma = g->asDiagonal();
      }
    }
    pc.g = OutputFunction::linear(gamma);
  }

  // delays
  {
    pc.tau = DelaySchedule::zero();
    if (const json* d = rd.object(v, "delays", ptr, false)) {
      const std::string dp = ptr + "/delays";
      rd.allow(*d, dp, {"matrix", "offdiag", "diag"});
      if (d->contains("matrix")) {
        if (auto t = rd.matrix((*d)["matrix"], dp + "/matrix", mi, mi)) {
          if ((t->array() < 0.0).any())
            rd.error(dp + "/matrix", "delays must be nonnegative (assumption A4)");
          else
            pc.tau = DelaySchedule::constant(*t);
        }
      } else {
        auto off = rd.number(*d, "offdiag", dp, 0.0);
        auto diag = rd.number(*d, "diag", dp, 0.0);
        if (off && *off < 0.0) rd.error(dp + "/offdiag", "delays must be nonnegative (assumption A4)");
        if (diag && *diag < 0.0) rd.error(dp + "/diag", "delays must be nonnegative (assumption A4)");
        if (off && diag && *off >= 0.0 && *diag >= 0.0) {
          const double o = *off, dg = *diag;
          pc.tau = DelaySchedule{
              [o, dg](std::size_t i, std::size_t j, double) { return i == j ? dg : o; }};
        }
      }
    }
  }

  // kernels
  {
    DelayKernel diag_k = DelayKernel::dirac(), off_k = DelayKernel::dirac();
    if (const json* k = rd.object(v, "kernels", ptr, false)) {
      const std::string kp = ptr + "/kernels";
      rd.allow(*k, kp, {"default", "diag", "offdiag"});
      if (k->contains("default"))
        if (auto d = read_kernel(rd, (*k)["default"], kp + "/default")) diag_k = off_k = *d;
      if (k->contains("diag"))
        if (auto d = read_kernel(rd, (*k)["diag"], kp + "/diag")) diag_k = *d;
      if (k->contains("offdiag"))
        if (auto d = read_kernel(rd, (*k)["offdiag"], kp + "/offdiag")) off_k = *d;
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) pc.kernels.push_back(i == j ? diag_k : off_k);
  }

  if (const json* q = rd.object(v, "quadrature", ptr, false)) {
    const std::string qp = ptr + "/quadrature";
    rd.allow(*q, qp, {"tail_tol", "node_spacing"});
    auto tol = rd.number(*q, "tail_tol", qp, pc.quad.tail_tol);
    auto sp = rd.number(*q, "node_spacing", qp, pc.quad.node_spacing);
    if (tol && *tol <= 0.0) rd.error(qp + "/tail_tol", "must be positive");
    if (sp && *sp <= 0.0) rd.error(qp + "/node_spacing", "must be positive");
    if (tol && sp && *tol > 0.0 && *sp > 0.0) pc.quad = {*tol, *sp};
  }

  if (!rd.ok() || !pc.a) return std::nullopt;
  try {
    return NetworkModel(m, *pc.f, *pc.g, *pc.a, *pc.tau, pc.kernels, pc.quad);
  } catch (const std::exception& e) {
    rd.error(ptr, e.what());
  }
  return std::nullopt;
}

inline std::optional<HistoryFunction> read_initial(Reader& rd, const json& v,
                                                   const std::string& ptr, std::size_t m,
                                                   std::size_t n) {
  const auto type = rd.string(v, "type", ptr);
  if (!type) return std::nullopt;
  const auto mi = static_cast<Eigen::Index>(m), ni = static_cast<Eigen::Index>(n);
  auto stacked = [&](const char* key) -> std::optional<Vector> {
    if (!v.contains(key)) {
      rd.error(ptr, std::string("missing required key '") + key + "'");
      return std::nullopt;
    }
    auto mat = rd.matrix(v[key], ptr + "/" + key, mi, ni);
    if (!mat) return std::nullopt;
    Vector x(mi * ni);
    for (Eigen::Index i = 0; i < mi; ++i) x.segment(i * ni, ni) = mat->row(i).transpose();
    return x;
  };
  if (*type == "constant") {
    rd.allow(v, ptr, {"type", "nodes"});
    auto x = stacked("nodes");
    if (!x) return std::nullopt;
    return HistoryFunction::constant(*x);
  }
  if (*type == "sinusoid") {
    rd.allow(v, ptr, {"type", "base", "amplitude", "frequency", "t_left"});
    auto base = stacked("base");
    auto amp = stacked("amplitude");
    auto freq = rd.number(v, "frequency", ptr, 1.0);
    auto left = rd.number(v, "t_left", ptr, -1.0);
    if (left && *left >= 0.0) rd.error(ptr + "/t_left", "t_left must be negative");
    if (!base || !amp || !freq || !left || *left >= 0.0) return std::nullopt;
    const double w = *freq;
    return HistoryFunction::segment(*left, [b = *base, a = *amp, w](double s) -> Vector {
      return b + std::sin(w * s) * a;
    });
  }
  rd.error(ptr + "/type", "unknown initial history type '" + *type + "'");
  return std::nullopt;
}

inline std::optional<IntegratorConfig> read_integrator(Reader& rd, const json& v,
                                                       const std::string& ptr) {
  rd.allow(v, ptr, {"method", "step", "horizon", "output_stride", "interpolation"});
  IntegratorConfig cfg;
  const auto method = rd.string(v, "method", ptr, "rk4");
  const auto step = rd.number(v, "step", ptr);
  const auto horizon = rd.number(v, "horizon", ptr);
  const auto stride = rd.integer(v, "output_stride", ptr, 1, 1);
  const auto interp = rd.string(v, "interpolation", ptr, "linear");
  bool good = method && step && horizon && stride && interp;
  if (method && *method != "rk4" && *method != "euler") {
    rd.error(ptr + "/method", "method must be 'rk4' or 'euler'");
    good = false;
  }
  if (interp && *interp != "linear" && *interp != "cubic") {
    rd.error(ptr + "/interpolation", "interpolation must be 'linear' or 'cubic'");
    good = false;
  }
  if (step && *step <= 0.0) {
    rd.error(ptr + "/step", "step must be positive");
    good = false;
  }
  if (step && horizon && *horizon < *step) {
    rd.error(ptr + "/horizon", "horizon must be at least one step");
    good = false;
  }
  if (!good) return std::nullopt;
  cfg.method = *method == "rk4" ? Method::rk4 : Method::euler;
  cfg.step = *step;
  cfg.horizon = *horizon;
  cfg.output_stride = static_cast<std::size_t>(*stride);
  cfg.interpolation = *interp == "cubic" ? Interpolation::cubic : Interpolation::linear;
  return cfg;
}

inline std::optional<CertificateSection> read_certificate(Reader& rd, const json& v,
                                                          const std::string& ptr,
                                                          const NodeDynamics& f) {
  rd.allow(v, ptr, {"rule", "P", "Delta", "epsilon", "box_radius", "probes", "constants_grid"});
  const auto n = static_cast<Eigen::Index>(f.dim);
  const auto eps = rd.number(v, "epsilon", ptr);
  const auto radius = rd.number(v, "box_radius", ptr, 10.0);
  const auto probes = rd.integer(v, "probes", ptr, 10000, 1);
  const auto grid = rd.integer(v, "constants_grid", ptr, 1001, 2);
  if (radius && *radius <= 0.0) rd.error(ptr + "/box_radius", "must be positive");
  if (eps && *eps <= 0.0) rd.error(ptr + "/epsilon", "epsilon must be positive");
  if (!eps || !radius || !probes || !grid || *eps <= 0.0 || *radius <= 0.0) return std::nullopt;
  try {
    if (v.contains("rule")) {
      const auto rule = rd.string(v, "rule", ptr);
      if (!rule) return std::nullopt;
      if (*rule != "lipschitz") {
        rd.error(ptr + "/rule", "unknown certificate rule '" + *rule + "'");
        return std::nullopt;
      }
      if (v.contains("P") || v.contains("Delta")) {
        rd.error(ptr, "'rule' excludes explicit 'P' and 'Delta'");
        return std::nullopt;
      }
      if (!f.lipschitz_on_box) {
        rd.error(ptr + "/rule", "node type declares no Lipschitz constant");
        return std::nullopt;
      }
      return CertificateSection{
          lipschitz_certificate(f.dim, f.lipschitz_on_box(*radius), *eps), *radius,
          static_cast<std::size_t>(*probes), static_cast<std::size_t>(*grid)};
    }
    if (!v.contains("P") || !v.contains("Delta")) {
      rd.error(ptr, "certificate needs 'P' and 'Delta' (or 'rule')");
      return std::nullopt;
    }
    auto p = rd.matrix(v["P"], ptr + "/P", n, n);
    auto d = rd.vector(v["Delta"], ptr + "/Delta", n);
    if (!p || !d) return std::nullopt;
    return CertificateSection{QuadCertificate(*p, *d, *eps), *radius,
                              static_cast<std::size_t>(*probes), static_cast<std::size_t>(*grid)};
  } catch (const CertificateError& e) {
    rd.error(ptr, e.what());
  }
  return std::nullopt;
}

}  // namespace detail

/// Validates and builds a scenario from JSON text. Throws ScenarioError
/// with every problem found.
inline Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1;
    for (std::size_t k = 0; k < std::min(e.byte, text.size()); ++k)
      if (text[k] == '\n') ++line;
    throw ScenarioError({{"", line, std::string("malformed JSON: ") + e.what()}});
  }
  detail::LineIndex lines(text);
  detail::Reader rd(&lines);
  if (!doc.is_object()) {
    rd.error("", "scenario must be a JSON object");
    throw ScenarioError(rd.errors());
  }
  rd.allow(doc, "", {"name", "seed", "model", "initial", "integrator", "certificate",
                     "diagnostics", "output"});
  const auto name = rd.string(doc, "name", "", "scenario");
  const auto seed = rd.integer(doc, "seed", "", 0, 0);

  std::optional<NetworkModel> model;
  if (const json* mv = rd.object(doc, "model", "", true)) model = detail::read_model(rd, *mv, "/model");

  std::optional<HistoryFunction> initial;
  const json* iv = rd.object(doc, "initial", "", true);
  if (iv && model) initial = detail::read_initial(rd, *iv, "/initial", model->nodes(), model->node_dim());

  std::optional<IntegratorConfig> cfg;
  if (const json* gv = rd.object(doc, "integrator", "", true))
    cfg = detail::read_integrator(rd, *gv, "/integrator");

  std::optional<CertificateSection> cert;
  if (const json* cv = rd.object(doc, "certificate", "", false); cv && model)
    cert = detail::read_certificate(rd, *cv, "/certificate", model->f());

  double rel_tol = 1e-6;
  std::optional<SyncSection> sync;
  if (const json* dv = rd.object(doc, "diagnostics", "", false)) {
    rd.allow(*dv, "/diagnostics", {"envelope_rel_tol", "sync"});
    if (auto r = rd.number(*dv, "envelope_rel_tol", "/diagnostics", 1e-6)) {
      if (*r < 0.0)
        rd.error("/diagnostics/envelope_rel_tol", "must be nonnegative");
      else
        rel_tol = *r;
    }
    if (const json* sv = rd.object(*dv, "sync", "/diagnostics", false)) {
      const std::string sp = "/diagnostics/sync";
      rd.allow(*sv, sp, {"threshold", "window", "expect"});
      auto thr = rd.number(*sv, "threshold", sp);
      auto win = rd.number(*sv, "window", sp);
      auto expect = rd.string(*sv, "expect", sp, "synchronized");
      if (thr && *thr <= 0.0) rd.error(sp + "/threshold", "must be positive");
      if (win && *win <= 0.0) rd.error(sp + "/window", "must be positive");
      if (win && cfg && *win > cfg->horizon) rd.error(sp + "/window", "window exceeds horizon");
      if (expect && *expect != "synchronized" && *expect != "not_synchronized")
        rd.error(sp + "/expect", "expect must be 'synchronized' or 'not_synchronized'");
      if (model && model->nodes() < 2) rd.error(sp, "synchronization needs at least two nodes");
      if (thr && win && expect) sync = SyncSection{*thr, *win, *expect == "synchronized"};
    }
  }

  std::string out_dir = "out";
  if (const json* ov = rd.object(doc, "output", "", false)) {
    rd.allow(*ov, "/output", {"directory"});
    if (auto d = rd.string(*ov, "directory", "/output", "out")) out_dir = *d;
  }

  if (!rd.ok() || !model || !initial || !cfg || !name || !seed) {
    if (rd.ok()) rd.error("", "scenario is incomplete");
    throw ScenarioError(rd.errors());
  }
  return Scenario{*name, static_cast<std::uint64_t>(*seed), std::move(*model), std::move(*initial),
                  *cfg, std::move(cert), rel_tol, std::move(sync), out_dir};
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitCheckFailed = 3,
  kExitBlowUp = 4,
  kExitIo = 5,
};

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
};

struct RunSummary {
  int exit_code = kExitOk;
  std::string scenario;
  bool integrated = false;
  bool blow_up = false;
  double final_time = 0.0;
  std::size_t blended_lookups = 0;
  std::optional<bool> quad_pass;
  std::optional<bool> envelope_pass;
  std::optional<bool> sync_pass;
  std::optional<ProofConstants> constants;
  std::optional<double> max_violation;
  std::optional<double> sync_mean;
  std::vector<std::filesystem::path> artifacts;
  std::string message;

  void print(std::ostream& os) const {
    auto verdict = [](const std::optional<bool>& b) {
      return !b ? "skipped" : *b ? "pass" : "fail";
    };
    os << "scenario: " << scenario << '\n';
    if (integrated)
      os << "integration: " << (blow_up ? "blow-up" : "completed") << " at t="
         << io::num(final_time) << '\n';
    if (blended_lookups) os << "blended stage lookups: " << blended_lookups << '\n';
    os << "quad: " << verdict(quad_pass) << '\n'
       << "envelope: " << verdict(envelope_pass);
    if (constants) os << " (eta=" << io::num(constants->eta) << ")";
    if (max_violation) os << " max_violation=" << io::num(*max_violation);
    os << '\n' << "sync: " << verdict(sync_pass);
    if (sync_mean) os << " (final window mean " << io::num(*sync_mean) << ")";
    os << '\n';
    for (const auto& a : artifacts) os << "wrote " << a.string() << '\n';
    if (!message.empty()) os << message << '\n';
    os << "exit: " << exit_code << '\n';
  }
};

namespace detail {

template <class Writer>
void write_file(const std::filesystem::path& p, RunSummary& s, Writer&& w) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + p.string());
  w(os);
  os.flush();
  if (!os) throw IoError("failed writing " + p.string());
  s.artifacts.push_back(p);
}

inline std::filesystem::path prepare_dir(const Scenario& sc, const RunOptions& opts) {
  const std::filesystem::path dir = opts.out_dir.value_or(sc.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

}  // namespace detail

/// Runs only the QUAD check and writes certificate.txt.
inline RunSummary check_quad_scenario(const Scenario& sc, const RunOptions& opts = {}) {
  RunSummary s;
  s.scenario = sc.name;
  if (!sc.certificate) {
    s.exit_code = kExitValidation;
    s.message = "scenario has no certificate section";
    return s;
  }
  try {
    const auto dir = detail::prepare_dir(sc, opts);
    const auto& cs = *sc.certificate;
    const auto check =
        check_quad(sc.model.f(), cs.cert, Box::cube(sc.model.node_dim(), cs.box_radius),
                   {0.0, sc.integrator.horizon}, cs.probes, opts.seed.value_or(sc.seed));
    s.quad_pass = check.pass;
    detail::write_file(dir / "certificate.txt", s, [&](std::ostream& os) {
      io::write_certificate_report(os, cs.cert, check, nullptr);
    });
    s.exit_code = check.pass ? kExitOk : kExitCheckFailed;
  } catch (const IoError& e) {
    s.exit_code = kExitIo;
    s.message = e.what();
  }
  return s;
}

/// Integrates the scenario and writes trajectory.csv, plus
/// certificate.txt and envelope.csv when a certificate is given and
/// sync.csv when synchronization is requested.
inline RunSummary run_scenario(const Scenario& sc, const RunOptions& opts = {}) {
  RunSummary s;
  s.scenario = sc.name;
  try {
    const auto dir = detail::prepare_dir(sc, opts);
    const auto result = integrate(sc.model, sc.initial, sc.integrator);
    const Trajectory& traj = result.trajectory;
    const std::size_t stride = sc.integrator.output_stride;
    s.integrated = true;
    s.final_time = traj.last_time();
    s.blended_lookups = result.extrapolated_lookups;
    detail::write_file(dir / "trajectory.csv", s,
                       [&](std::ostream& os) { io::write_trajectory_csv(os, traj, stride); });
    if (!result.ok()) {
      s.blow_up = true;
      s.exit_code = kExitBlowUp;
      s.message = "blow-up: " + result.message + " (first bad time " +
                  io::num(result.failure_time) + ")";
      return s;
    }

    bool all_ok = true;
    if (sc.certificate) {
      const auto& cs = *sc.certificate;
      const auto check =
          check_quad(sc.model.f(), cs.cert, Box::cube(sc.model.node_dim(), cs.box_radius),
                     {0.0, sc.integrator.horizon}, cs.probes, opts.seed.value_or(sc.seed));
      s.quad_pass = check.pass;
      const auto pc = proof_constants(sc.model, cs.cert, traj.state(0), sc.integrator.horizon,
                                      cs.constants_grid);
      s.constants = pc;
      detail::write_file(dir / "certificate.txt", s, [&](std::ostream& os) {
        io::write_certificate_report(os, cs.cert, check, &pc);
      });
      const auto env = check_envelope(traj, pc.eta, cs.cert.P(), sc.envelope_rel_tol, stride);
      s.envelope_pass = env.pass();
      s.max_violation = env.max_violation;
      detail::write_file(dir / "envelope.csv", s,
                         [&](std::ostream& os) { io::write_envelope_csv(os, env); });
      all_ok = all_ok && check.pass && env.pass();
    }
    if (sc.sync) {
      const auto rep = sync_report(traj, sc.sync->threshold, sc.sync->window, stride);
      s.sync_pass = rep.synchronized == sc.sync->expect_synchronized;
      s.sync_mean = rep.final_window_mean;
      detail::write_file(dir / "sync.csv", s, [&](std::ostream& os) {
        io::write_sync_csv(os, rep, sc.sync->expect_synchronized);
      });
      all_ok = all_ok && *s.sync_pass;
    }
    s.exit_code = all_ok ? kExitOk : kExitCheckFailed;
  } catch (const IoError& e) {
    s.exit_code = kExitIo;
    s.message = e.what();
  }
  return s;
}

}  // namespace delaynet
