#pragma once

// Scenario configuration, presets for the published simulations, and the
// CSV / PGM writers used by the command-line front end.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "padicnn/analysis.hpp"
#include "padicnn/evolution.hpp"
#include "padicnn/kernel.hpp"
#include "padicnn/network.hpp"
#include "padicnn/padic.hpp"

namespace padicnn {

namespace fs = std::filesystem;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitBlowUp = 3, kExitIo = 4 };

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

inline std::string format_complex(Complex z) {
  if (z.imag() == 0.0) return format_number(z.real());
  std::string im = format_number(z.imag());
  if (im.front() != '-') im.insert(im.begin(), '+');
  return format_number(z.real()) + im + "i";
}

// --- configuration ---------------------------------------------------------

enum class CouplingVariant { zero, constant, matrix };

struct CouplingConfig {
  CouplingVariant variant = CouplingVariant::zero;
  Complex value{0.0, 0.0};
  /// CSV path for the matrix variant; empty selects the bundled synthetic
  /// hierarchical 64x64 stand-in for the cat-cortex matrix.
  std::string path;
  double scale = 1.0;
  friend bool operator==(const CouplingConfig&, const CouplingConfig&) = default;
};

struct OperatorConfig {
  OperatorKind kind = OperatorKind::convolution;
  std::string edges;  // graph kind only
  friend bool operator==(const OperatorConfig&, const OperatorConfig&) = default;
};

struct PlanConfig {
  double t_end = 1.0;
  double dt = 1e-3;
  std::uint64_t snapshot_stride = 100;
  friend bool operator==(const PlanConfig&, const PlanConfig&) = default;
};

struct OutputConfig {
  std::string dir = "out";
  std::string norms = "norms.csv";
  std::string field = "field.csv";
  std::optional<std::string> heatmap = "heatmap.pgm";
  std::optional<std::string> states;
  friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct ScenarioConfig {
  std::string name = "scenario";
  int p = 2;
  int l = 1;
  double alpha = 2.5;
  NetworkMode mode = NetworkMode::quantum;
  ActivationKind activation = ActivationKind::saturation;
  OperatorConfig op;
  CouplingConfig w;
  BiasSignal z;
  InitialStateSpec initial = ZeroState{};
  PlanConfig plan;
  OutputConfig output;
  /// Relative paths are resolved against this directory. Not serialized.
  std::string base_dir;

  friend bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
    return a.name == b.name && a.p == b.p && a.l == b.l && a.alpha == b.alpha && a.mode == b.mode &&
           a.activation == b.activation && a.op == b.op && a.w == b.w && a.z == b.z && a.initial == b.initial &&
           a.plan == b.plan && a.output == b.output;
  }

  fs::path resolve(const std::string& p_rel) const {
    fs::path path(p_rel);
    if (path.is_absolute() || base_dir.empty()) return path;
    return fs::path(base_dir) / path;
  }
};

inline const char* to_string(NetworkMode m) { return m == NetworkMode::quantum ? "quantum" : "classical"; }

inline const char* to_string(ActivationKind k) {
  switch (k) {
    case ActivationKind::saturation:
      return "saturation";
    case ActivationKind::paper_literal:
      return "paper-literal";
    case ActivationKind::identity:
      return "identity";
    case ActivationKind::custom:
      return "custom";
  }
  return "?";
}

inline const char* to_string(CouplingVariant v) {
  switch (v) {
    case CouplingVariant::zero:
      return "zero";
    case CouplingVariant::constant:
      return "constant";
    case CouplingVariant::matrix:
      return "matrix";
  }
  return "?";
}

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> known) {
  if (!obj.is_object()) throw ConfigError(where.empty() ? "config must be an object" : where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw ConfigError("unknown key \"" + (where.empty() ? key : where + "." + key) + "\"");
  }
}

inline std::string key_path(const std::string& where, const char* key) {
  return where.empty() ? std::string(key) : where + "." + key;
}

inline double get_number(const json& obj, const std::string& where, const char* key, std::optional<double> def = {}) {
  if (!obj.contains(key)) {
    if (def) return *def;
    throw ConfigError("missing key \"" + key_path(where, key) + "\"");
  }
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError("\"" + key_path(where, key) + "\" must be a number");
  return v.get<double>();
}

inline std::int64_t get_integer(const json& obj, const std::string& where, const char* key,
                                std::optional<std::int64_t> def = {}) {
  if (!obj.contains(key)) {
    if (def) return *def;
    throw ConfigError("missing key \"" + key_path(where, key) + "\"");
  }
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError("\"" + key_path(where, key) + "\" must be an integer");
  return v.get<std::int64_t>();
}

inline std::string get_string(const json& obj, const std::string& where, const char* key,
                              std::optional<std::string> def = {}) {
  if (!obj.contains(key)) {
    if (def) return *def;
    throw ConfigError("missing key \"" + key_path(where, key) + "\"");
  }
  const auto& v = obj.at(key);
  if (!v.is_string()) throw ConfigError("\"" + key_path(where, key) + "\" must be a string");
  return v.get<std::string>();
}

inline std::optional<std::string> get_optional_string(const json& obj, const std::string& where, const char* key,
                                                      std::optional<std::string> def) {
  if (!obj.contains(key)) return def;
  if (obj.at(key).is_null()) return std::nullopt;
  return get_string(obj, where, key);
}

inline Complex get_complex(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key)) throw ConfigError("missing key \"" + key_path(where, key) + "\"");
  const auto& v = obj.at(key);
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw ConfigError("\"" + key_path(where, key) + "\" must be a number or a [re, im] pair");
}

inline json complex_to_json(Complex z) {
  if (z.imag() == 0.0) return z.real();
  return json::array({z.real(), z.imag()});
}

inline BallSpec parse_ball(const json& obj, const std::string& where) {
  reject_unknown(obj, where, {"center", "level"});
  const auto center = get_integer(obj, where, "center");
  const auto level = get_integer(obj, where, "level");
  if (center < 0 || center > std::numeric_limits<std::uint32_t>::max())
    throw ConfigError("\"" + where + ".center\" out of range");
  return BallSpec{CellIndex(static_cast<std::uint32_t>(center)), static_cast<int>(level)};
}

inline json ball_to_json(const BallSpec& b) { return json{{"center", b.center.value}, {"level", b.level}}; }

inline std::pair<int, int> line_and_column(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

/// Structural and range validation; file references are checked by load_config.
inline void validate_config(const ScenarioConfig& c) {
  if (!is_prime(c.p)) throw ConfigError("p must be prime (got " + std::to_string(c.p) + ")");
  if (c.l < 1) throw ConfigError("l must be a positive integer");
  std::optional<GroupScheme> s;
  try {
    s.emplace(c.p, c.l);
  } catch (const SchemeError& e) {
    throw ConfigError(e.what());
  }
  if (c.op.kind == OperatorKind::convolution && c.alpha == 1.0) throw ConfigError("alpha must differ from 1");
  if (!std::isfinite(c.alpha)) throw ConfigError("alpha must be finite");
  if (c.op.kind == OperatorKind::graph && c.op.edges.empty()) throw ConfigError("operator.edges is required for graph operators");
  if (c.activation == ActivationKind::custom) throw ConfigError("activation \"custom\" is only available through the library API");
  if (!(c.plan.t_end > 0.0) || !std::isfinite(c.plan.t_end)) throw ConfigError("plan.t_end must be positive");
  if (!(c.plan.dt > 0.0) || !std::isfinite(c.plan.dt)) throw ConfigError("plan.dt must be positive");
  if (c.plan.snapshot_stride == 0) throw ConfigError("plan.snapshot_stride must be positive");
  if (!std::isfinite(c.w.scale)) throw ConfigError("W.scale must be finite");
  for (std::size_t k = 0; k < c.z.terms.size(); ++k) {
    const auto& t = c.z.terms[k];
    if (!(t.t_end > t.t_start)) throw ConfigError("Z[" + std::to_string(k) + "] window must satisfy start < end");
    if (t.mask) {
      try {
        t.mask->validate(*s);
      } catch (const std::exception& e) {
        throw ConfigError("Z[" + std::to_string(k) + "].mask: " + e.what());
      }
    }
  }
  if (const auto* b = std::get_if<BallState>(&c.initial)) {
    try {
      b->ball.validate(*s);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("initial: ") + e.what());
    }
  }
}

inline ScenarioConfig config_from_json(const nlohmann::json& j) {
  using detail::get_integer;
  using detail::get_number;
  using detail::get_string;
  detail::reject_unknown(j, "", {"name", "p", "l", "alpha", "mode", "activation", "operator", "W", "Z", "initial", "plan", "output"});

  ScenarioConfig c;
  c.name = get_string(j, "", "name", std::string("scenario"));
  c.p = static_cast<int>(get_integer(j, "", "p"));
  c.l = static_cast<int>(get_integer(j, "", "l"));
  c.alpha = get_number(j, "", "alpha", 2.5);

  const auto mode = get_string(j, "", "mode", std::string("quantum"));
  if (mode == "quantum") c.mode = NetworkMode::quantum;
  else if (mode == "classical") c.mode = NetworkMode::classical;
  else throw ConfigError("\"mode\" must be \"quantum\" or \"classical\"");

  const auto act = get_string(j, "", "activation", std::string("saturation"));
  if (act == "saturation") c.activation = ActivationKind::saturation;
  else if (act == "paper-literal") c.activation = ActivationKind::paper_literal;
  else if (act == "identity") c.activation = ActivationKind::identity;
  else throw ConfigError("\"activation\" must be one of saturation, paper-literal, identity");

  if (j.contains("operator")) {
    const auto& o = j.at("operator");
    detail::reject_unknown(o, "operator", {"kind", "edges"});
    const auto kind = get_string(o, "operator", "kind", std::string("convolution"));
    if (kind == "convolution") c.op.kind = OperatorKind::convolution;
    else if (kind == "graph") c.op.kind = OperatorKind::graph;
    else throw ConfigError("\"operator.kind\" must be \"convolution\" or \"graph\"");
    c.op.edges = get_string(o, "operator", "edges", std::string());
  }

  if (j.contains("W")) {
    const auto& w = j.at("W");
    detail::reject_unknown(w, "W", {"variant", "value", "path", "scale"});
    const auto variant = get_string(w, "W", "variant");
    if (variant == "zero") {
      c.w.variant = CouplingVariant::zero;
    } else if (variant == "constant") {
      c.w.variant = CouplingVariant::constant;
      c.w.value = detail::get_complex(w, "W", "value");
    } else if (variant == "matrix") {
      c.w.variant = CouplingVariant::matrix;
      c.w.path = get_string(w, "W", "path", std::string());
      c.w.scale = get_number(w, "W", "scale", 1.0);
    } else {
      throw ConfigError("\"W.variant\" must be zero, constant or matrix");
    }
  }

  if (j.contains("Z")) {
    const auto& z = j.at("Z");
    if (!z.is_array()) throw ConfigError("\"Z\" must be an array of terms");
    for (std::size_t k = 0; k < z.size(); ++k) {
      const std::string where = "Z[" + std::to_string(k) + "]";
      const auto& t = z[k];
      detail::reject_unknown(t, where, {"amplitude", "omega", "start", "end", "mask", "offset"});
      BiasTerm term;
      term.amplitude = get_number(t, where, "amplitude", 0.0);
      term.omega = get_number(t, where, "omega", 0.0);
      term.t_start = get_number(t, where, "start", 0.0);
      if (t.contains("end") && !t.at("end").is_null()) term.t_end = get_number(t, where, "end");
      if (t.contains("mask") && !t.at("mask").is_null()) term.mask = detail::parse_ball(t.at("mask"), where + ".mask");
      term.offset = get_number(t, where, "offset", 0.0);
      c.z.terms.push_back(term);
    }
  }

  if (j.contains("initial")) {
    const auto& i = j.at("initial");
    detail::reject_unknown(i, "initial", {"kind", "center", "level", "value"});
    const auto kind = get_string(i, "initial", "kind");
    if (kind == "ball") {
      c.initial = BallState{detail::parse_ball(nlohmann::json{{"center", i.value("center", nlohmann::json())},
                                                              {"level", i.value("level", nlohmann::json())}},
                                               "initial")};
    } else if (kind == "uniform") {
      c.initial = UniformState{detail::get_complex(i, "initial", "value")};
    } else if (kind == "zero") {
      c.initial = ZeroState{};
    } else {
      throw ConfigError("\"initial.kind\" must be ball, uniform or zero");
    }
  }

  if (!j.contains("plan")) throw ConfigError("missing key \"plan\"");
  {
    const auto& pl = j.at("plan");
    detail::reject_unknown(pl, "plan", {"t_end", "dt", "snapshot_stride"});
    c.plan.t_end = get_number(pl, "plan", "t_end");
    c.plan.dt = get_number(pl, "plan", "dt", 1e-3);
    const auto stride = get_integer(pl, "plan", "snapshot_stride", 100);
    if (stride <= 0) throw ConfigError("plan.snapshot_stride must be positive");
    c.plan.snapshot_stride = static_cast<std::uint64_t>(stride);
  }

  c.output.dir = "out/" + c.name;
  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::reject_unknown(o, "output", {"dir", "norms", "field", "heatmap", "states"});
    c.output.dir = get_string(o, "output", "dir", c.output.dir);
    c.output.norms = get_string(o, "output", "norms", c.output.norms);
    c.output.field = get_string(o, "output", "field", c.output.field);
    c.output.heatmap = detail::get_optional_string(o, "output", "heatmap", c.output.heatmap);
    c.output.states = detail::get_optional_string(o, "output", "states", c.output.states);
  }

  validate_config(c);
  return c;
}

inline nlohmann::json config_to_json(const ScenarioConfig& c) {
  using nlohmann::json;
  json j;
  j["name"] = c.name;
  j["p"] = c.p;
  j["l"] = c.l;
  j["alpha"] = c.alpha;
  j["mode"] = to_string(c.mode);
  j["activation"] = to_string(c.activation);
  j["operator"] = json{{"kind", c.op.kind == OperatorKind::graph ? "graph" : "convolution"}};
  if (c.op.kind == OperatorKind::graph) j["operator"]["edges"] = c.op.edges;

  json w{{"variant", to_string(c.w.variant)}};
  if (c.w.variant == CouplingVariant::constant) w["value"] = detail::complex_to_json(c.w.value);
  if (c.w.variant == CouplingVariant::matrix) {
    if (!c.w.path.empty()) w["path"] = c.w.path;
    w["scale"] = c.w.scale;
  }
  j["W"] = w;

  json z = json::array();
  for (const auto& t : c.z.terms) {
    json term{{"amplitude", t.amplitude}, {"omega", t.omega}, {"start", t.t_start}, {"offset", t.offset}};
    term["end"] = std::isinf(t.t_end) ? json(nullptr) : json(t.t_end);
    term["mask"] = t.mask ? detail::ball_to_json(*t.mask) : json(nullptr);
    z.push_back(term);
  }
  j["Z"] = z;

  if (const auto* b = std::get_if<BallState>(&c.initial)) {
    j["initial"] = json{{"kind", "ball"}, {"center", b->ball.center.value}, {"level", b->ball.level}};
  } else if (const auto* u = std::get_if<UniformState>(&c.initial)) {
    j["initial"] = json{{"kind", "uniform"}, {"value", json::array({u->value.real(), u->value.imag()})}};
  } else {
    j["initial"] = json{{"kind", "zero"}};
  }

  j["plan"] = json{{"t_end", c.plan.t_end}, {"dt", c.plan.dt}, {"snapshot_stride", c.plan.snapshot_stride}};
  j["output"] = json{{"dir", c.output.dir},
                     {"norms", c.output.norms},
                     {"field", c.output.field},
                     {"heatmap", c.output.heatmap ? json(*c.output.heatmap) : json(nullptr)},
                     {"states", c.output.states ? json(*c.output.states) : json(nullptr)}};
  return j;
}

inline std::string save_config(const ScenarioConfig& c) { return config_to_json(c).dump(2) + "\n"; }

/// Parses config text. `origin` names the source in error messages.
inline ScenarioConfig parse_config(const std::string& text, const std::string& origin = "<config>") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_and_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": parse error: " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  ScenarioConfig c = parse_config(buf.str(), path);
  c.base_dir = fs::path(path).parent_path().string();
  if (c.w.variant == CouplingVariant::matrix && !c.w.path.empty() && !fs::exists(c.resolve(c.w.path)))
    throw ConfigError(path + ": W.path refers to missing file " + c.resolve(c.w.path).string());
  if (c.op.kind == OperatorKind::graph && !fs::exists(c.resolve(c.op.edges)))
    throw ConfigError(path + ": operator.edges refers to missing file " + c.resolve(c.op.edges).string());
  return c;
}

// --- coupling matrices -------------------------------------------------------

/// Deterministic 64x64 stand-in for the p-adic cat-cortex approximation
/// (p = 2, l = 6). Connection strength grows with the depth of the smallest
/// common ball: 0 across the top split, 1 for ord(I - K) in {1, 2}, 2 for 3,
/// 3 for 4 and 5; no self-connections.
inline Eigen::MatrixXcd synthetic_cat_matrix() {
  const GroupScheme s(2, 6);
  static constexpr double kByValuation[] = {0.0, 1.0, 1.0, 2.0, 3.0, 3.0};
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXcd w = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k) {
      if (i == k) continue;
      const auto v = valuation(CellIndex(static_cast<std::uint32_t>(i)), CellIndex(static_cast<std::uint32_t>(k)), s);
      w(i, k) = kByValuation[v.value()];
    }
  return w;
}

inline constexpr const char* kSyntheticCatProvenance = "synthetic-hierarchical-64";

struct IngestedMatrix {
  Eigen::MatrixXcd matrix;
  double asymmetry = 0.0;  // max |W - W^T|
};

/// Reads a p^l x p^l coupling CSV. Asymmetric input is accepted and reported.
inline IngestedMatrix ingest_matrix(const std::string& path, const GroupScheme& s) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open coupling matrix " + path);
  IngestedMatrix out;
  try {
    out.matrix = read_coupling_csv(in, static_cast<Eigen::Index>(s.size()));
  } catch (const MatrixFormatError& e) {
    throw ConfigError(path + ": " + e.what() + " (p=" + std::to_string(s.p()) + ", l=" + std::to_string(s.l()) +
                      " expects " + std::to_string(s.size()) + "x" + std::to_string(s.size()) + ")");
  }
  out.asymmetry = out.matrix.size() ? (out.matrix - out.matrix.transpose()).cwiseAbs().maxCoeff() : 0.0;
  return out;
}

// --- building ------------------------------------------------------------

inline Activation make_activation(ActivationKind k) {
  switch (k) {
    case ActivationKind::saturation:
      return Activation::saturation();
    case ActivationKind::paper_literal:
      return Activation::paper_literal();
    case ActivationKind::identity:
      return Activation::identity();
    case ActivationKind::custom:
      break;
  }
  throw ConfigError("custom activations cannot be built from a config");
}

struct BuiltScenario {
  NetworkSystem system;
  IntegrationPlan plan;
  std::string coupling_provenance;
  std::vector<std::string> warnings;
};

inline BuiltScenario build_scenario(const ScenarioConfig& c) {
  validate_config(c);
  const GroupScheme s(c.p, c.l);
  std::vector<std::string> warnings;

  CouplingOperator op = [&] {
    try {
      if (c.op.kind == OperatorKind::graph)
        return build_graph_operator(read_edge_list_file(c.resolve(c.op.edges).string()), s);
      return build_convolution_operator(c.alpha, s);
    } catch (const KernelError& e) {
      throw ConfigError(e.what());
    }
  }();

  CouplingSpec w = ZeroCoupling{};
  std::string provenance = "none";
  if (c.w.variant == CouplingVariant::constant) {
    w = ConstantCoupling{c.w.value};
    provenance = "constant";
  } else if (c.w.variant == CouplingVariant::matrix) {
    MatrixCoupling m;
    m.scale = c.w.scale;
    if (c.w.path.empty()) {
      if (c.p != 2 || c.l != 6)
        throw ConfigError("the synthetic cat-cortex matrix needs p=2, l=6; supply W.path for other schemes");
      m.matrix = synthetic_cat_matrix();
      m.provenance = kSyntheticCatProvenance;
    } else {
      auto ingested = ingest_matrix(c.resolve(c.w.path).string(), s);
      if (ingested.asymmetry > 0.0)
        warnings.push_back("coupling matrix is asymmetric (max |W - W^T| = " + format_number(ingested.asymmetry) + ")");
      m.matrix = std::move(ingested.matrix);
      m.provenance = "file:" + c.w.path;
    }
    provenance = m.provenance;
    w = std::move(m);
  }

  StateVector init = initial_state(c.initial, s);
  IntegrationPlan plan{c.plan.t_end, c.plan.dt, c.plan.snapshot_stride, IntegrationMethod::rk4, c.output.states.has_value()};
  if (auto warn = stability_warning(plan, op); !warn.empty()) warnings.push_back(warn);
  NetworkSystem sys(std::move(op), c.mode, std::move(w), c.z, make_activation(c.activation), std::move(init));
  return BuiltScenario{std::move(sys), plan, provenance, std::move(warnings)};
}

// --- presets --------------------------------------------------------------

enum class Horizon { paper, desk };

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"sim1",   "sim2",   "sim3-1", "sim3-2", "sim3-3", "sim4-1",
                                                 "sim4-2", "sim4-3", "sim5-1", "sim6-1", "sim6-2", "sim6-3"};
  return names;
}

namespace detail {

inline BiasTerm pulse(double omega, double start, double end, std::optional<BallSpec> mask = std::nullopt) {
  return BiasTerm{1.0, omega, start, end, mask, 0.0};
}
inline BiasTerm step_from(double value, double start) {
  return BiasTerm{0.0, 0.0, start, std::numeric_limits<double>::infinity(), std::nullopt, value};
}

inline BallSpec ball(std::uint32_t center, int level) { return BallSpec{CellIndex(center), level}; }

}  // namespace detail

/// The published simulation parameters. The desk horizon shortens t_end only.
/// `cat_matrix` replaces the synthetic stand-in wherever W_cat appears.
inline ScenarioConfig make_preset(const std::string& name, Horizon horizon = Horizon::desk,
                                  const std::string& cat_matrix = {}) {
  using detail::ball;
  using detail::pulse;
  using detail::step_from;

  ScenarioConfig c;
  c.name = name;
  c.alpha = 2.5;
  c.plan.dt = 1e-3;
  c.plan.snapshot_stride = 100;
  const BallSpec psi0_ball = ball(4, 2);
  auto cat = [&](double scale) { return CouplingConfig{CouplingVariant::matrix, {0.0, 0.0}, cat_matrix, scale}; };
  double paper_t = 0.0, desk_t = 0.0;

  if (name == "sim1") {
    c.p = 3, c.l = 6;
    c.initial = BallState{psi0_ball};
    paper_t = 400, desk_t = 50;
  } else if (name == "sim2") {
    c.p = 3, c.l = 6;
    c.z.terms = {pulse(0.01, 25, 50), pulse(0.01, 200, 225)};
    c.initial = BallState{psi0_ball};
    paper_t = 600, desk_t = 60;
  } else if (name == "sim3-1") {
    c.p = 3, c.l = 6;
    c.z = BiasSignal::constant(10.0);
    c.initial = BallState{psi0_ball};
    paper_t = 100, desk_t = 20;
  } else if (name == "sim3-2") {
    c.p = 2, c.l = 6;
    c.w = cat(0.1);
    c.z = BiasSignal::constant(10.0);
    c.initial = BallState{psi0_ball};
    paper_t = 600, desk_t = 20;
  } else if (name == "sim3-3") {
    c.p = 3, c.l = 6;
    c.w = CouplingConfig{CouplingVariant::constant, {50.0, 0.0}, {}, 1.0};
    c.initial = UniformState{{0.5, 0.3}};
    paper_t = 400, desk_t = 20;
  } else if (name == "sim4-1") {
    c.p = 2, c.l = 6, c.alpha = 1.6;
    c.w = cat(0.1);
    c.z.terms = {pulse(0.1, 25, 50, ball(3, 2)), pulse(0.1, 200, 225, ball(0, 2))};
    c.initial = ZeroState{};
    paper_t = 600, desk_t = 60;
  } else if (name == "sim4-2" || name == "sim4-3") {
    c.p = 2, c.l = 6, c.alpha = 1.6;
    c.w = cat(name == "sim4-2" ? 0.1 : 1.0);
    c.z.terms = {pulse(0.1, 25, 50), pulse(1.0, 200, 225), pulse(10.0, 800, 1225), step_from(0.1, 1225)};
    c.initial = BallState{psi0_ball};
    paper_t = 1500, desk_t = 60;
  } else if (name == "sim5-1") {
    c.p = 2, c.l = 6, c.alpha = 1.6;
    c.w = cat(10.0);
    c.z.terms = {pulse(0.1, 25, 50), pulse(0.1, 200, 225), step_from(0.5, 225)};
    c.initial = ZeroState{};
    paper_t = 600, desk_t = 60;
  } else if (name == "sim6-1" || name == "sim6-2") {
    c.p = 2, c.l = 6;
    c.mode = NetworkMode::classical;
    if (name == "sim6-2") c.w = cat(0.05);
    c.z.terms = {pulse(0.01, 2, 10)};
    c.initial = ZeroState{};
    paper_t = name == "sim6-1" ? 100 : 400;
    desk_t = name == "sim6-1" ? 20 : 40;
  } else if (name == "sim6-3") {
    c.p = 2, c.l = 6;
    c.mode = NetworkMode::classical;
    c.w = cat(0.1);
    c.z.terms = {pulse(0.01, 25, 50), pulse(0.01, 200, 225), step_from(0.5, 225)};
    c.initial = ZeroState{};
    paper_t = 600, desk_t = 60;
  } else {
    throw ConfigError("unknown preset \"" + name + "\"");
  }
  c.plan.t_end = horizon == Horizon::paper ? paper_t : desk_t;
  c.output.dir = "out/" + name;
  validate_config(c);
  return c;
}

/// Flat key=value listing of every parameter that shapes the dynamics.
inline std::string effective_parameters(const ScenarioConfig& c) {
  std::ostringstream os;
  os << "name=" << c.name << '\n'
     << "p=" << c.p << '\n'
     << "l=" << c.l << '\n'
     << "alpha=" << format_number(c.alpha) << '\n'
     << "mode=" << to_string(c.mode) << '\n'
     << "activation=" << to_string(c.activation) << '\n'
     << "operator=" << (c.op.kind == OperatorKind::graph ? "graph:" + c.op.edges : std::string("convolution")) << '\n';
  os << "W=";
  switch (c.w.variant) {
    case CouplingVariant::zero:
      os << "zero";
      break;
    case CouplingVariant::constant:
      os << "constant(" << format_complex(c.w.value) << ")";
      break;
    case CouplingVariant::matrix:
      os << format_number(c.w.scale) << "*"
         << (c.w.path.empty() ? std::string("W_cat[") + kSyntheticCatProvenance + "]" : "W_cat[file:" + c.w.path + "]");
      break;
  }
  os << '\n' << "Z.terms=" << c.z.terms.size() << '\n';
  for (std::size_t k = 0; k < c.z.terms.size(); ++k) {
    const auto& t = c.z.terms[k];
    os << "Z." << k << "=" << format_number(t.amplitude) << "*sin(" << format_number(t.omega) << "*pi*t)+"
       << format_number(t.offset) << " on [" << format_number(t.t_start) << "," << format_number(t.t_end) << ")";
    if (t.mask) os << " ball(" << t.mask->center.value << "," << t.mask->level << ")";
    else os << " all";
    os << '\n';
  }
  os << "initial=";
  if (const auto* b = std::get_if<BallState>(&c.initial)) os << "ball(" << b->ball.center.value << "," << b->ball.level << ")";
  else if (const auto* u = std::get_if<UniformState>(&c.initial)) os << "uniform(" << format_complex(u->value) << ")";
  else os << "zero";
  os << '\n' << "t_end=" << format_number(c.plan.t_end) << '\n' << "dt=" << format_number(c.plan.dt) << '\n';
  return os.str();
}

// --- outputs ----------------------------------------------------------------

struct EmitResult {
  std::vector<fs::path> files;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::ofstream open_output(const fs::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw OutputError("cannot write " + path.string());
  return out;
}

inline void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw OutputError("write failed for " + path.string());
}

}  // namespace detail

/// 8-bit binary PGM: one row per snapshot, one column per cell, gray linear
/// in density from 0 to the trajectory maximum. An all-zero trajectory is
/// black; a constant positive density has no contrast and is drawn mid-gray.
inline void write_heatmap(const fs::path& path, const Trajectory& tr) {
  const std::size_t rows = tr.snapshots.size();
  const std::size_t cols = rows ? static_cast<std::size_t>(tr.snapshots.front().density.size()) : 0;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& s : tr.snapshots) {
    if (s.density.size() == 0) continue;
    lo = std::min(lo, s.density.minCoeff());
    hi = std::max(hi, s.density.maxCoeff());
  }
  auto out = detail::open_output(path, true);
  out << "P5\n" << cols << " " << rows << "\n255\n";
  std::vector<unsigned char> row(cols);
  for (const auto& s : tr.snapshots) {
    for (std::size_t k = 0; k < cols; ++k) {
      const double d = s.density[static_cast<Eigen::Index>(k)];
      if (hi <= 0.0) row[k] = 0;
      else if (lo == hi) row[k] = 128;
      else row[k] = static_cast<unsigned char>(std::lround(255.0 * std::clamp(d / hi, 0.0, 1.0)));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  detail::finish(out, path);
}

/// Writes the norms CSV, the field CSV, and the optional heatmap and state
/// CSV into config.output.dir. A failure marker line closes the norms CSV of
/// an interrupted run.
inline EmitResult emit_outputs(const Trajectory& tr, const ScenarioConfig& c, std::size_t cells,
                               const std::optional<std::string>& failure = std::nullopt) {
  EmitResult result;
  const fs::path dir = c.resolve(c.output.dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw OutputError("cannot create output directory " + dir.string() + ": " + ec.message());
  if (tr.times.empty()) result.warnings.push_back("trajectory is empty; writing headers only");

  {
    const fs::path path = dir / c.output.norms;
    auto out = detail::open_output(path);
    out << "t,norm_sq\n";
    for (std::size_t k = 0; k < tr.times.size(); ++k)
      out << format_number(tr.times[k]) << ',' << format_number(tr.norm_sq[k]) << '\n';
    if (failure) out << "# FAILED: " << *failure << '\n';
    detail::finish(out, path);
    result.files.push_back(path);
  }
  {
    const fs::path path = dir / c.output.field;
    auto out = detail::open_output(path);
    out << 't';
    for (std::size_t k = 0; k < cells; ++k) out << ",cell_" << k;
    out << '\n';
    for (const auto& s : tr.snapshots) {
      out << format_number(s.time);
      for (double d : s.density) out << ',' << format_number(d);
      out << '\n';
    }
    detail::finish(out, path);
    result.files.push_back(path);
  }
  if (c.output.states) {
    const fs::path path = dir / *c.output.states;
    auto out = detail::open_output(path);
    out << 't';
    for (std::size_t k = 0; k < cells; ++k) out << ",re_" << k;
    for (std::size_t k = 0; k < cells; ++k) out << ",im_" << k;
    out << '\n';
    for (const auto& s : tr.snapshots) {
      if (!s.state) continue;
      out << format_number(s.time);
      for (const auto& z : *s.state) out << ',' << format_number(z.real());
      for (const auto& z : *s.state) out << ',' << format_number(z.imag());
      out << '\n';
    }
    detail::finish(out, path);
    result.files.push_back(path);
  }
  if (c.output.heatmap) {
    if (tr.snapshots.empty()) {
      result.warnings.push_back("no snapshots; heatmap skipped");
    } else {
      const fs::path path = dir / *c.output.heatmap;
      write_heatmap(path, tr);
      result.files.push_back(path);
    }
  }
  return result;
}

struct RunReport {
  int exit_code = kExitOk;
  std::string message;
  std::string coupling_provenance;
  double final_norm_sq = 0.0;
  double min_density = 0.0;
  double max_density = 0.0;
  double max_abs_imag = 0.0;
  double wall_seconds = 0.0;
  std::vector<std::string> warnings;
  std::vector<fs::path> files;

  std::string summary() const {
    std::ostringstream os;
    os << "status=" << (exit_code == kExitOk ? "ok" : "error") << '\n' << "exit_code=" << exit_code << '\n';
    if (!message.empty()) os << "message=" << message << '\n';
    os << "coupling=" << coupling_provenance << '\n'
       << "final_norm_sq=" << format_number(final_norm_sq) << '\n'
       << "min_density=" << format_number(min_density) << '\n'
       << "max_density=" << format_number(max_density) << '\n'
       << "max_abs_imag=" << format_number(max_abs_imag) << '\n'
       << "wall_seconds=" << std::fixed << std::setprecision(3) << wall_seconds << '\n';
    for (const auto& w : warnings) os << "warning=" << w << '\n';
    return os.str();
  }
};

namespace detail {

inline void summarize(RunReport& r, const Trajectory& tr) {
  if (!tr.norm_sq.empty()) r.final_norm_sq = tr.norm_sq.back();
  bool first = true;
  for (const auto& s : tr.snapshots) {
    if (s.density.size() == 0) continue;
    r.min_density = first ? s.density.minCoeff() : std::min(r.min_density, s.density.minCoeff());
    r.max_density = first ? s.density.maxCoeff() : std::max(r.max_density, s.density.maxCoeff());
    first = false;
    if (s.state) r.max_abs_imag = std::max(r.max_abs_imag, s.state->imag().cwiseAbs().maxCoeff());
  }
  if (tr.final_state.size()) r.max_abs_imag = std::max(r.max_abs_imag, tr.final_state.imag().cwiseAbs().maxCoeff());
}

}  // namespace detail

/// Build, evolve and write outputs. Never throws; failures map to exit codes.
inline RunReport run_scenario(const ScenarioConfig& c) {
  RunReport r;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  std::optional<BuiltScenario> built;
  try {
    built.emplace(build_scenario(c));
  } catch (const ConfigError& e) {
    r.exit_code = kExitConfig;
    r.message = e.what();
    return r;
  } catch (const std::exception& e) {
    r.exit_code = kExitConfig;
    r.message = std::string("invalid scenario: ") + e.what();
    return r;
  }
  r.coupling_provenance = built->coupling_provenance;
  r.warnings = built->warnings;
  const std::size_t cells = built->system.scheme().size();

  Trajectory tr;
  std::optional<std::string> failure;
  try {
    tr = evolve(built->system, built->plan);
  } catch (const BlowUpError& e) {
    if (e.partial()) tr = *e.partial();
    failure = e.what();
    r.exit_code = kExitBlowUp;
    r.message = e.what();
  }
  detail::summarize(r, tr);

  try {
    auto emitted = emit_outputs(tr, c, cells, failure);
    r.files = std::move(emitted.files);
    r.warnings.insert(r.warnings.end(), emitted.warnings.begin(), emitted.warnings.end());
  } catch (const std::exception& e) {
    r.exit_code = kExitIo;
    r.message = e.what();
  }
  r.wall_seconds = elapsed();
  return r;
}

}  // namespace padicnn
