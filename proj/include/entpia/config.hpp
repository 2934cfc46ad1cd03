#pragma once

// Experiment configuration: TOML (or JSON) input, normalized with every default made
// explicit so the echoed copy fully describes a run.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <toml.hpp>

#include "entpia/mcoracle.hpp"
#include "entpia/pia.hpp"
#include "entpia/problem.hpp"

namespace entpia {

/// Malformed configuration; line and column are 0 when unknown.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(const std::string& msg, std::size_t line = 0, std::size_t column = 0)
      : InvalidArgument(line ? msg + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"
                             : msg),
        line_(line),
        column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_, column_;
};

inline constexpr const char* kToolVersion = "entpia 1.0.0";

struct ExperimentConfig {
  json problem;              // resolved definition
  std::string problem_file;  // empty when inline
  // discretization
  std::optional<Box> box;
  int n = 129;
  double core_fraction = 0.5;
  int action_nodes = 8;
  DriftScheme scheme = DriftScheme::hybrid;
  BcKind bc = BcKind::linear_extrapolation;
  SolverOptions solver;
  // pia
  int max_iters = 40;
  double delta_tol = 1e-8;
  std::string v0 = "zero";  // "zero" or a field binary path
  bool reference = false;   // fine-grid reference for error columns
  // analysis
  double alpha = 0.5;
  std::vector<double> rho_sweep;
  std::vector<double> eps_sweep;
  double eps_rho = 10.0;
  // mc
  McOptions mc;
  std::vector<Vec> mc_points;
  double mc_constant = 1.0;
  // output
  std::string out = "out";

  json echo() const;
};

namespace detail {

inline json toml_to_json(const std::string& text, const std::string& source) {
  try {
    const toml::table tbl = toml::parse(text, source);
    std::ostringstream os;
    os << toml::json_formatter{tbl};
    return json::parse(os.str());
  } catch (const toml::parse_error& e) {
    throw ConfigError(std::string("TOML parse error: ") + std::string(e.description()), e.source().begin.line,
                      e.source().begin.column);
  }
}

inline json parse_json_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') ++line, col = 1;
      else ++col;
    }
    throw ConfigError(std::string("JSON parse error: ") + e.what(), line, col);
  }
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw ConfigError("cannot read file '" + p.string() + "'");
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

inline json parse_config_text(const std::string& text, const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".json") return parse_json_text(text);
  return toml_to_json(text, path.string());
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("invalid value for '") + key + "'");
  }
}

inline void reject_unknown(const json& j, const char* section, std::initializer_list<const char*> keys) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(std::string("unknown key '") + it.key() + "' in [" + section + "]");
  }
}

inline DriftScheme parse_scheme(const std::string& s) {
  if (s == "hybrid") return DriftScheme::hybrid;
  if (s == "upwind") return DriftScheme::upwind;
  if (s == "central") return DriftScheme::central;
  throw ConfigError("unknown drift scheme '" + s + "'");
}

inline std::vector<double> number_list(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  if (!j[key].is_array()) throw ConfigError(std::string("'") + key + "' must be an array of numbers");
  std::vector<double> v;
  for (const auto& e : j[key]) {
    if (!e.is_number()) throw ConfigError(std::string("'") + key + "' must be an array of numbers");
    v.push_back(e.get<double>());
  }
  return v;
}

}  // namespace detail

/// Builds a config from a parsed document. Relative file references resolve
/// against `base_dir`; referenced files must exist.
inline ExperimentConfig config_from_json(const json& doc, const std::filesystem::path& base_dir = ".") {
  if (!doc.is_object()) throw ConfigError("configuration must be a table");
  detail::reject_unknown(doc, "root", {"problem", "discretization", "pia", "analysis", "mc", "output"});
  ExperimentConfig c;
  if (!doc.contains("problem")) throw ConfigError("missing [problem] section");
  json prob = doc["problem"];
  if (prob.contains("file")) {
    std::filesystem::path f = prob["file"].get<std::string>();
    if (f.is_relative()) f = base_dir / f;
    if (!std::filesystem::exists(f)) throw ConfigError("problem file '" + f.string() + "' does not exist");
    c.problem_file = f.string();
    json loaded = detail::parse_config_text(detail::read_text(f), f);
    if (loaded.contains("problem")) loaded = loaded["problem"];
    for (auto it = prob.begin(); it != prob.end(); ++it)
      if (it.key() != "file") loaded[it.key()] = it.value();
    prob = loaded;
  }
  c.problem = prob;

  const json d = doc.value("discretization", json::object());
  detail::reject_unknown(d, "discretization",
                         {"box", "n", "core_fraction", "action_nodes", "scheme", "bc", "rel_tol", "krylov_tol",
                          "max_krylov_iters"});
  if (d.contains("box")) {
    const json& bx = d["box"];
    if (!bx.is_array() || bx.empty() || bx.size() > kMaxDim) throw ConfigError("box must list [lo, hi] per axis");
    Box b;
    b.dim = static_cast<int>(bx.size());
    for (int k = 0; k < b.dim; ++k) {
      if (!bx[k].is_array() || bx[k].size() != 2) throw ConfigError("box must list [lo, hi] per axis");
      b.lo[k] = bx[k][0].get<double>();
      b.hi[k] = bx[k][1].get<double>();
    }
    c.box = b;
  }
  c.n = detail::get_or(d, "n", c.n);
  c.core_fraction = detail::get_or(d, "core_fraction", c.core_fraction);
  c.action_nodes = detail::get_or(d, "action_nodes", c.action_nodes);
  c.scheme = detail::parse_scheme(detail::get_or<std::string>(d, "scheme", "hybrid"));
  try {
    c.bc = parse_bc(detail::get_or<std::string>(d, "bc", "linear-extrapolation"));
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (c.bc == BcKind::prescribed) throw ConfigError("prescribed boundary values are not configurable");
  c.solver.rel_tol = detail::get_or(d, "rel_tol", c.solver.rel_tol);
  c.solver.krylov_tol = detail::get_or(d, "krylov_tol", c.solver.krylov_tol);
  c.solver.max_krylov_iters = detail::get_or(d, "max_krylov_iters", c.solver.max_krylov_iters);

  const json p = doc.value("pia", json::object());
  detail::reject_unknown(p, "pia", {"max_iters", "delta_tol", "v0", "reference"});
  c.max_iters = detail::get_or(p, "max_iters", c.max_iters);
  c.delta_tol = detail::get_or(p, "delta_tol", c.delta_tol);
  c.v0 = detail::get_or(p, "v0", c.v0);
  c.reference = detail::get_or(p, "reference", c.reference);
  if (c.v0 != "zero") {
    std::filesystem::path f = c.v0;
    if (f.is_relative()) f = base_dir / f;
    if (!std::filesystem::exists(f)) throw ConfigError("initial field '" + f.string() + "' does not exist");
    c.v0 = f.string();
  }
  if (c.max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (!(c.delta_tol > 0.0)) throw ConfigError("delta_tol must be positive");

  const json a = doc.value("analysis", json::object());
  detail::reject_unknown(a, "analysis", {"alpha", "rho_sweep", "eps_sweep", "eps_rho"});
  c.alpha = detail::get_or(a, "alpha", c.alpha);
  c.rho_sweep = detail::number_list(a, "rho_sweep");
  c.eps_sweep = detail::number_list(a, "eps_sweep");
  c.eps_rho = detail::get_or(a, "eps_rho", c.eps_rho);
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");

  const json m = doc.value("mc", json::object());
  detail::reject_unknown(m, "mc", {"npaths", "dt", "T", "seed", "points", "max_exit_fraction", "constant"});
  c.mc.npaths = detail::get_or<std::size_t>(m, "npaths", c.mc.npaths);
  c.mc.dt = detail::get_or(m, "dt", c.mc.dt);
  c.mc.T = detail::get_or(m, "T", c.mc.T);
  c.mc.seed = detail::get_or<std::uint64_t>(m, "seed", c.mc.seed);
  c.mc.max_exit_fraction = detail::get_or(m, "max_exit_fraction", c.mc.max_exit_fraction);
  c.mc_constant = detail::get_or(m, "constant", c.mc_constant);
  if (m.contains("points")) {
    if (!m["points"].is_array()) throw ConfigError("mc.points must be an array of points");
    for (const auto& pt : m["points"]) {
      Vec x{};
      if (pt.is_number()) x[0] = pt.get<double>();
      else if (pt.is_array() && !pt.empty() && pt.size() <= kMaxDim)
        for (std::size_t k = 0; k < pt.size(); ++k) x[k] = pt[k].get<double>();
      else throw ConfigError("mc.points entries must be numbers or coordinate arrays");
      c.mc_points.push_back(x);
    }
  }

  const json o = doc.value("output", json::object());
  detail::reject_unknown(o, "output", {"dir"});
  c.out = detail::get_or(o, "dir", c.out);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file '" + path.string() + "' does not exist");
  const json doc = detail::parse_config_text(detail::read_text(path), path);
  return config_from_json(doc, path.parent_path().empty() ? "." : path.parent_path());
}

inline json ExperimentConfig::echo() const {
  json j;
  j["problem"] = problem;
  if (!problem_file.empty()) j["problem"]["file"] = problem_file;
  json d = {{"n", n},
            {"core_fraction", core_fraction},
            {"action_nodes", action_nodes},
            {"scheme", to_string(scheme)},
            {"bc", to_string(bc)},
            {"rel_tol", solver.rel_tol},
            {"krylov_tol", solver.krylov_tol},
            {"max_krylov_iters", solver.max_krylov_iters}};
  if (box) {
    json bx = json::array();
    for (int k = 0; k < box->dim; ++k) bx.push_back({box->lo[k], box->hi[k]});
    d["box"] = bx;
  } else {
    d["box"] = "default [-4,4]^d";
  }
  j["discretization"] = d;
  j["pia"] = {{"max_iters", max_iters}, {"delta_tol", delta_tol}, {"v0", v0}, {"reference", reference}};
  j["analysis"] = {{"alpha", alpha}, {"rho_sweep", rho_sweep}, {"eps_sweep", eps_sweep}, {"eps_rho", eps_rho}};
  json pts = json::array();
  for (const auto& x : mc_points) pts.push_back({x[0], x[1]});
  j["mc"] = {{"npaths", mc.npaths},
             {"dt", mc.dt},
             {"T", mc.T},
             {"seed", mc.seed},
             {"max_exit_fraction", mc.max_exit_fraction},
             {"constant", mc_constant},
             {"points", pts}};
  j["output"] = {{"dir", out}};
  return j;
}

/// Problem instance described by the config.
inline ControlProblem make_problem(const ExperimentConfig& c) {
  try {
    return problem_from_json(c.problem);
  } catch (const ParseError& e) {
    throw ConfigError(std::string("problem expression: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
}

inline Discretization make_discretization(const ExperimentConfig& c, const ControlProblem& cp) {
  Discretization d;
  Box b = c.box.value_or(Box::cube(cp.state_dim, -4.0, 4.0));
  if (b.dim != cp.state_dim) throw ConfigError("box dimension does not match the problem");
  try {
    d.grid = build_grid(b, c.n, c.core_fraction);
    d.quad = build_action_quadrature(cp.action_dim, c.action_nodes);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("discretization: ") + e.what());
  }
  d.scheme = c.scheme;
  d.bc.kind = c.bc;
  d.bc.growth = cp.growth;
  d.solver = c.solver;
  return d;
}

}  // namespace entpia
