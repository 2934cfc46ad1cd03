#pragma once

// Control problem definitions: built-in families, expression-defined problems,
// and sampled validation of the standing assumptions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "entpia/core.hpp"
#include "entpia/expr.hpp"

namespace entpia {

using json = nlohmann::json;

/// Growth constants: |r| <= A1(1+|x|^N), |b| <= A2(1+|x|), |sigma| <= A3(1+|x|).
struct Growth {
  double N = 1.0;
  double A1 = 1.0;
  double A2 = 1.0;
  double A3 = 1.0;
};

/// Axis-aligned box [lo_k, hi_k] per state axis.
struct Box {
  int dim = 1;
  Vec lo{};
  Vec hi{};

  Vec center() const {
    Vec c{};
    for (int k = 0; k < dim; ++k) c[k] = 0.5 * (lo[k] + hi[k]);
    return c;
  }
  bool contains(const Vec& x) const {
    for (int k = 0; k < dim; ++k)
      if (x[k] < lo[k] || x[k] > hi[k]) return false;
    return true;
  }
  /// Box scaled by `s` about its center.
  Box scaled(double s) const {
    Box b = *this;
    const Vec c = center();
    for (int k = 0; k < dim; ++k) {
      b.lo[k] = c[k] + s * (lo[k] - c[k]);
      b.hi[k] = c[k] + s * (hi[k] - c[k]);
    }
    return b;
  }
  static Box cube(int dim, double lo, double hi) {
    Box b;
    b.dim = dim;
    for (int k = 0; k < dim; ++k) {
      b.lo[k] = lo;
      b.hi[k] = hi;
    }
    return b;
  }
};

/// Full specification of an entropy-regularized control problem on R^d with
/// action set U = [0,1]^L (unit volume).
struct ControlProblem {
  std::string family = "expressions";
  int state_dim = 1;
  int action_dim = 1;
  int noise_dim = 1;

  std::function<double(const Vec& x, const Vec& u)> reward;
  std::function<Vec(const Vec& x, const Vec& u)> drift;
  std::function<VolMatrix(const Vec& x, const Vec& u)> vol;
  bool vol_action_dependent = false;

  /// Optional action-independent baseline diffusion used for the smallness report.
  std::function<Sym(const Vec& x)> sigma0;

  double lambda = 1.0;
  double rho = 1.0;
  Growth growth;
  /// C0 with sigma sigma^T >= I / C0.
  double ellipticity = 1.0;
  /// Bounded-coefficient class: the discount threshold for unbounded growth does not apply.
  bool bounded_coefficients = false;
  /// Region used for sampling-based validation.
  Box sample_box = Box::cube(1, -4.0, 4.0);
  /// Parameters as resolved at construction, for config echoes.
  json params = json::object();

  Sym covariance(const Vec& x, const Vec& u) const { return vol(x, u).covariance(); }

  /// Right-hand side of the discount threshold 4(N+1)(A2 + N A3).
  double discount_threshold() const {
    return 4.0 * (growth.N + 1.0) * (growth.A2 + growth.N * growth.A3);
  }
  /// Growth barrier 2 A1 rho^{-1} (1+|x|^2)^{N/2}.
  double barrier(const Vec& x) const {
    const double r2 = norm2(x, state_dim) * norm2(x, state_dim);
    return 2.0 * growth.A1 / rho * std::pow(1.0 + r2, 0.5 * growth.N);
  }
};

namespace detail {

inline double param(const json& p, const char* key, double fallback) {
  if (!p.contains(key)) return fallback;
  if (!p[key].is_number()) throw InvalidArgument(std::string("parameter '") + key + "' must be a number");
  return p[key].get<double>();
}

inline int int_param(const json& p, const char* key, int fallback) {
  const double v = param(p, key, fallback);
  if (v != std::floor(v)) throw InvalidArgument(std::string("parameter '") + key + "' must be an integer");
  return static_cast<int>(v);
}

inline void check_dims(int d, int L) {
  if (d < 1 || d > kMaxDim) throw InvalidArgument("state dimension must be 1 or 2");
  if (L < 1 || L > kMaxDim) throw InvalidArgument("action dimension must be 1 or 2");
}

inline void check_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be positive");
}

/// sign(s)|s|^gamma; gamma = 1 reproduces s.
inline double signed_power(double s, double gamma) {
  if (gamma == 1.0) return s;
  return std::copysign(std::pow(std::abs(s), gamma), s);
}

}  // namespace detail

/// Instantiates a built-in problem family.
///
/// Families:
///  - "bounded-trig": r = u1 * mean_k sin(x_k), b_k = cos(x_k) + u_k/2, sigma = sqrt(2) I.
///    Optional `holder` in (0,1] replaces sin by sign(sin)|sin|^holder.
///  - "small-diffusion": bounded-trig reward/drift with Sigma = Sigma0 + eps0 * Mhat,
///    Sigma0 = 2I, Mhat(x,u) = (2u1-1)(3+cos x1)/4 I, so sup |Mhat| = 1.
///  - "linear-growth": r = A1(1+|x|^N), b_k = A2 x_k (2u1-1), sigma = A3 sqrt(1+|x|^2) I.
///  - "lq-like": r = -q|x|^2 - c(u1-1/2)^2, b_k = -a x_k + beta(2u1-1), sigma = s I.
inline ControlProblem builtin_problem(const std::string& family, const json& params) {
  using detail::param;
  const json p = params.is_null() ? json::object() : params;
  if (!p.is_object()) throw InvalidArgument("family parameters must be a key-value map");
  ControlProblem cp;
  cp.family = family;
  const int d = detail::int_param(p, "d", 1);
  const int L = detail::int_param(p, "L", 1);
  detail::check_dims(d, L);
  cp.state_dim = d;
  cp.action_dim = L;
  cp.noise_dim = d;
  cp.lambda = param(p, "lambda", 1.0);
  detail::check_positive(cp.lambda, "lambda");
  cp.sample_box = Box::cube(d, -4.0, 4.0);

  if (family == "bounded-trig" || family == "small-diffusion") {
    cp.rho = param(p, "rho", 10.0);
    const double gamma = param(p, "holder", 1.0);
    if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArgument("holder exponent must lie in (0,1]");
    cp.reward = [d, gamma](const Vec& x, const Vec& u) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += detail::signed_power(std::sin(x[k]), gamma);
      return u[0] * s / d;
    };
    cp.drift = [d, L](const Vec& x, const Vec& u) {
      Vec b{};
      for (int k = 0; k < d; ++k) b[k] = std::cos(x[k]) + 0.5 * u[std::min(k, L - 1)];
      return b;
    };
    cp.bounded_coefficients = true;
    cp.growth = {1.0, 1.0, 1.5, std::numbers::sqrt2};
    if (family == "bounded-trig") {
      cp.vol = [d](const Vec&, const Vec&) {
        VolMatrix s;
        for (int k = 0; k < d; ++k) s.a[k][k] = std::numbers::sqrt2;
        return s;
      };
      cp.ellipticity = 0.5;
      cp.params = {{"d", d}, {"L", L}, {"lambda", cp.lambda}, {"rho", cp.rho}, {"holder", gamma}};
    } else {
      const double eps0 = param(p, "eps0", 0.05);
      if (!(eps0 >= 0.0)) throw InvalidArgument("eps0 must be non-negative");
      if (!(eps0 < 1.0)) throw InvalidArgument("eps0 must be below 1");
      cp.vol = [d, eps0](const Vec& x, const Vec& u) {
        const double m = (2.0 * u[0] - 1.0) * (3.0 + std::cos(x[0])) / 4.0;
        VolMatrix s;
        for (int k = 0; k < d; ++k) s.a[k][k] = std::sqrt(2.0 + eps0 * m);
        return s;
      };
      cp.vol_action_dependent = eps0 > 0.0;
      cp.sigma0 = [](const Vec&) { return Sym{2.0, 0.0, 2.0}; };
      cp.ellipticity = 1.0 / (2.0 - eps0);
      cp.growth.A3 = std::sqrt(2.0 + eps0);
      cp.params = {{"d", d}, {"L", L}, {"lambda", cp.lambda}, {"rho", cp.rho}, {"holder", gamma}, {"eps0", eps0}};
    }
  } else if (family == "linear-growth") {
    const double N = param(p, "N", 2.0);
    const double A1 = param(p, "A1", 1.0);
    const double A2 = param(p, "A2", 1.0);
    const double A3 = param(p, "A3", 1.0);
    if (!(N > 0.0)) throw InvalidArgument("N must be positive");
    detail::check_positive(A1, "A1");
    detail::check_positive(A2, "A2");
    detail::check_positive(A3, "A3");
    cp.growth = {N, A1, A2, A3};
    cp.rho = param(p, "rho", 2.0 * cp.discount_threshold());
    cp.reward = [d, N, A1](const Vec& x, const Vec&) {
      const double r = norm2(x, d);
      return A1 * (1.0 + std::pow(r, N));
    };
    cp.drift = [d, A2](const Vec& x, const Vec& u) {
      Vec b{};
      for (int k = 0; k < d; ++k) b[k] = A2 * x[k] * (2.0 * u[0] - 1.0);
      return b;
    };
    cp.vol = [d, A3](const Vec& x, const Vec&) {
      const double r = norm2(x, d);
      VolMatrix s;
      for (int k = 0; k < d; ++k) s.a[k][k] = A3 * std::sqrt(1.0 + r * r);
      return s;
    };
    cp.ellipticity = 1.0 / (A3 * A3);
    cp.bounded_coefficients = false;
    cp.params = {{"d", d}, {"L", L}, {"lambda", cp.lambda}, {"rho", cp.rho},
                 {"N", N},  {"A1", A1}, {"A2", A2},         {"A3", A3}};
  } else if (family == "lq-like") {
    const double a = param(p, "a", 1.0);
    const double beta = param(p, "beta", 1.0);
    const double s = param(p, "s", 1.0);
    const double q = param(p, "q", 1.0);
    const double c = param(p, "c", 1.0);
    detail::check_positive(s, "s");
    if (a < 0 || beta < 0 || q < 0 || c < 0) throw InvalidArgument("lq-like parameters must be non-negative");
    cp.growth = {2.0, std::max({1.0, q, c / 4.0}), std::max({1.0, a, beta}), s};
    cp.rho = param(p, "rho", 2.0 * cp.discount_threshold());
    cp.reward = [d, q, c](const Vec& x, const Vec& u) {
      const double r = norm2(x, d);
      return -q * r * r - c * (u[0] - 0.5) * (u[0] - 0.5);
    };
    cp.drift = [d, a, beta](const Vec& x, const Vec& u) {
      Vec b{};
      for (int k = 0; k < d; ++k) b[k] = -a * x[k] + beta * (2.0 * u[0] - 1.0);
      return b;
    };
    cp.vol = [d, s](const Vec&, const Vec&) {
      VolMatrix m;
      for (int k = 0; k < d; ++k) m.a[k][k] = s;
      return m;
    };
    cp.ellipticity = 1.0 / (s * s);
    cp.bounded_coefficients = false;
    cp.params = {{"d", d}, {"L", L}, {"lambda", cp.lambda}, {"rho", cp.rho}, {"a", a},
                 {"beta", beta}, {"s", s}, {"q", q}, {"c", c}};
  } else {
    throw InvalidArgument("unknown problem family '" + family + "'");
  }
  detail::check_positive(cp.rho, "rho");
  return cp;
}

namespace detail {

inline std::vector<std::string> coefficient_vars(int d, int L) {
  std::vector<std::string> v;
  for (int k = 0; k < d; ++k) v.push_back("x" + std::to_string(k + 1));
  for (int k = 0; k < L; ++k) v.push_back("u" + std::to_string(k + 1));
  return v;
}

/// Packs (x, u) into the argument order of `coefficient_vars`.
inline std::array<double, 2 * kMaxDim> pack(const Vec& x, const Vec& u, int d, int L) {
  std::array<double, 2 * kMaxDim> a{};
  for (int k = 0; k < d; ++k) a[k] = x[k];
  for (int k = 0; k < L; ++k) a[d + k] = u[k];
  return a;
}

inline std::string as_expr_text(const json& j, const char* what) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number()) {
    std::ostringstream os;
    os.precision(17);
    os << j.get<double>();
    return os.str();
  }
  throw InvalidArgument(std::string(what) + " must be an expression string or a number");
}

}  // namespace detail

/// Builds a problem from a definition object: either {family, params} or
/// {expressions: {r, b[], sigma[][]}} plus lambda, rho, growth, ellipticity,
/// optional sigma0 (matrix of expressions in x) and optional box.
inline ControlProblem problem_from_json(const json& def) {
  if (!def.is_object()) throw InvalidArgument("problem definition must be an object");
  ControlProblem cp;
  if (def.contains("family")) {
    json params = def.value("params", json::object());
    for (const char* k : {"lambda", "rho"})
      if (def.contains(k)) params[k] = def[k];
    cp = builtin_problem(def["family"].get<std::string>(), params);
  } else if (def.contains("expressions")) {
    const json& e = def["expressions"];
    if (!e.contains("r") || !e.contains("b") || !e.contains("sigma"))
      throw InvalidArgument("expressions require keys r, b, sigma");
    if (!e["b"].is_array() || !e["sigma"].is_array()) throw InvalidArgument("b and sigma must be arrays");
    const int d = static_cast<int>(e["b"].size());
    const int L = def.value("action_dim", 1);
    detail::check_dims(d, L);
    if (static_cast<int>(e["sigma"].size()) != d) throw InvalidArgument("sigma must have one row per state axis");
    const int m = static_cast<int>(e["sigma"][0].size());
    if (m < 1 || m > kMaxDim) throw InvalidArgument("sigma must have 1 or 2 columns");
    const auto vars = detail::coefficient_vars(d, L);
    auto r = std::make_shared<Expression>(detail::as_expr_text(e["r"], "r"), vars);
    auto b = std::make_shared<std::vector<Expression>>();
    for (const auto& bk : e["b"]) b->emplace_back(detail::as_expr_text(bk, "b"), vars);
    auto sig = std::make_shared<std::vector<Expression>>();
    for (const auto& row : e["sigma"]) {
      if (!row.is_array() || static_cast<int>(row.size()) != m) throw InvalidArgument("sigma rows must have equal length");
      for (const auto& s : row) sig->emplace_back(detail::as_expr_text(s, "sigma"), vars);
    }
    cp.family = "expressions";
    cp.state_dim = d;
    cp.action_dim = L;
    cp.noise_dim = m;
    cp.reward = [r, d, L](const Vec& x, const Vec& u) {
      const auto a = detail::pack(x, u, d, L);
      return (*r)(std::span<const double>(a.data(), d + L));
    };
    cp.drift = [b, d, L](const Vec& x, const Vec& u) {
      const auto a = detail::pack(x, u, d, L);
      Vec out{};
      for (int k = 0; k < d; ++k) out[k] = (*b)[k](std::span<const double>(a.data(), d + L));
      return out;
    };
    cp.vol = [sig, d, L, m](const Vec& x, const Vec& u) {
      const auto a = detail::pack(x, u, d, L);
      VolMatrix s;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < m; ++j) s.a[i][j] = (*sig)[i * m + j](std::span<const double>(a.data(), d + L));
      return s;
    };
    for (const auto& s : *sig)
      for (int k = 0; k < L; ++k) cp.vol_action_dependent = cp.vol_action_dependent || s.uses(d + k);
    if (def.contains("sigma0")) {
      const json& s0 = def["sigma0"];
      if (!s0.is_array() || static_cast<int>(s0.size()) != d) throw InvalidArgument("sigma0 must be a d x d matrix");
      const auto xvars = detail::coefficient_vars(d, 0);
      auto ex = std::make_shared<std::vector<Expression>>();
      for (const auto& row : s0) {
        if (!row.is_array() || static_cast<int>(row.size()) != d) throw InvalidArgument("sigma0 must be a d x d matrix");
        for (const auto& s : row) ex->emplace_back(detail::as_expr_text(s, "sigma0"), xvars);
      }
      cp.sigma0 = [ex, d](const Vec& x) {
        std::span<const double> a(x.data(), d);
        Sym out;
        out.xx = (*ex)[0](a);
        if (d == 2) {
          out.xy = (*ex)[1](a);
          out.yy = (*ex)[3](a);
        }
        return out;
      };
    }
    cp.lambda = def.value("lambda", 1.0);
    cp.rho = def.value("rho", 1.0);
    detail::check_positive(cp.lambda, "lambda");
    detail::check_positive(cp.rho, "rho");
    if (def.contains("growth")) {
      const json& g = def["growth"];
      cp.growth = {g.value("N", 1.0), g.value("A1", 1.0), g.value("A2", 1.0), g.value("A3", 1.0)};
    }
    cp.ellipticity = def.value("ellipticity", 1.0);
    cp.bounded_coefficients = def.value("bounded", false);
    cp.sample_box = Box::cube(d, -4.0, 4.0);
    cp.params = def;
  } else {
    throw InvalidArgument("problem definition needs 'family' or 'expressions'");
  }
  if (def.contains("box")) {
    const json& bx = def["box"];
    if (!bx.is_array() || static_cast<int>(bx.size()) != cp.state_dim)
      throw InvalidArgument("box must list one [lo, hi] pair per state axis");
    for (int k = 0; k < cp.state_dim; ++k) {
      cp.sample_box.lo[k] = bx[k].at(0).get<double>();
      cp.sample_box.hi[k] = bx[k].at(1).get<double>();
      if (!(cp.sample_box.hi[k] > cp.sample_box.lo[k])) throw InvalidArgument("degenerate sampling box");
    }
  }
  return cp;
}

// ---------------------------------------------------------------------------
// Validation

enum class CheckStatus { satisfied, violated, not_applicable };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::satisfied: return "satisfied";
    case CheckStatus::violated: return "violated";
    case CheckStatus::not_applicable: return "not-applicable";
  }
  return "?";
}

struct AssumptionCheck {
  std::string name;
  CheckStatus status = CheckStatus::not_applicable;
  std::string detail;
  std::optional<Vec> witness_x;
  std::optional<Vec> witness_u;
};

/// Distance of the controlled diffusion from an action-independent baseline.
struct SmallnessReport {
  std::string sigma0;          // description of the baseline
  double eps0 = 0.0;           // sup_u |Sigma - Sigma0|_inf
  double eps1 = 0.0;           // sampled lower bound of sup_u [Sigma - Sigma0]_{0,alpha}
  std::size_t pair_samples = 0;
  std::array<bool, 3> cond3{};  // rho >= A^{2/(1-alpha)}, eps0 A rho^{alpha/2} <= 1, eps1 A <= 1
};

struct ValidationReport {
  std::vector<AssumptionCheck> checks;
  std::optional<SmallnessReport> smallness;
  std::size_t samples = 0;

  const AssumptionCheck& at(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw InvalidArgument("no check named " + name);
  }
  bool any_violated() const {
    for (const auto& c : checks)
      if (c.status == CheckStatus::violated) return true;
    return false;
  }
  json to_json(int dim, int action_dim) const {
    json j;
    j["samples"] = samples;
    j["checks"] = json::array();
    for (const auto& c : checks) {
      json e = {{"name", c.name}, {"status", to_string(c.status)}, {"detail", c.detail}};
      if (c.witness_x) e["witness_x"] = std::vector<double>(c.witness_x->begin(), c.witness_x->begin() + dim);
      if (c.witness_u) e["witness_u"] = std::vector<double>(c.witness_u->begin(), c.witness_u->begin() + action_dim);
      j["checks"].push_back(e);
    }
    if (smallness) {
      j["smallness"] = {{"sigma0", smallness->sigma0},       {"eps0", smallness->eps0},
                        {"eps1", smallness->eps1},           {"eps1_is_lower_bound", true},
                        {"pair_samples", smallness->pair_samples},
                        {"cond3", smallness->cond3}};
    }
    return j;
  }
};

struct ValidationOptions {
  /// Sampling region; defaults to the problem's sample box.
  std::optional<Box> box;
  /// Regularity constant standing in for the uniform C^{2,alpha} bound in the smallness thresholds.
  double regularity_bound = 1.0;
  std::uint64_t seed = 0;
  double tol = 1e-9;
  /// Nested sampling stops once the shrunken box is narrower than this.
  double min_level_width = 0.5;
};

namespace detail {

inline double radical_inverse(std::uint64_t i, unsigned base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

struct Sample {
  Vec x{};
  Vec u{};
};

/// Quasi-random (Halton) samples of box x [0,1]^L on dyadically nested boxes
/// (box, box/2, box/4, ... about the center), each level with `budget` points plus
/// anchors at the level center and the action-cube vertices.
inline std::vector<Sample> nested_samples(const Box& box, int L, std::size_t budget, std::uint64_t seed,
                                          double min_width) {
  static constexpr unsigned primes[] = {2, 3, 5, 7};
  const int d = box.dim;
  double width = 0.0;
  for (int k = 0; k < d; ++k) width = std::max(width, box.hi[k] - box.lo[k]);
  std::vector<Sample> out;
  Box level = box;
  for (int lev = 0;; ++lev) {
    const Vec c = level.center();
    // anchors
    const int nv = 1 << L;
    for (int v = 0; v <= nv; ++v) {
      Sample s;
      s.x = c;
      for (int k = 0; k < L; ++k) s.u[k] = v == nv ? 0.5 : ((v >> k) & 1);
      out.push_back(s);
    }
    for (std::size_t i = 0; i < budget; ++i) {
      const std::uint64_t idx = seed + i + 1;
      Sample s;
      for (int k = 0; k < d; ++k)
        s.x[k] = level.lo[k] + radical_inverse(idx, primes[k]) * (level.hi[k] - level.lo[k]);
      for (int k = 0; k < L; ++k) s.u[k] = radical_inverse(idx, primes[d + k]);
      out.push_back(s);
    }
    width *= 0.5;
    if (width < min_width) break;
    level = level.scaled(0.5);
  }
  return out;
}

}  // namespace detail

/// Checks cond1 (ellipticity), cond2/cond3 (smallness, when a baseline is known),
/// c.3 (growth) and c.4 (discount threshold) by sampling. Coefficient evaluation
/// errors propagate with the offending point.
inline ValidationReport validate_problem(const ControlProblem& cp, double alpha, std::size_t sample_budget,
                                         const ValidationOptions& opt = {}) {
  if (sample_budget < 1000) throw InvalidArgument("sample_budget must be at least 1000");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0,1)");
  const int d = cp.state_dim;
  const int L = cp.action_dim;
  const Box box = opt.box.value_or(cp.sample_box);
  const auto samples = detail::nested_samples(box, L, sample_budget, opt.seed, opt.min_level_width);

  ValidationReport rep;
  rep.samples = samples.size();

  // cond1: Sigma >= I/C0.
  {
    AssumptionCheck c{"cond1"};
    double worst = std::numeric_limits<double>::infinity();
    const detail::Sample* wit = nullptr;
    for (const auto& s : samples) {
      const double e = cp.covariance(s.x, s.u).min_eigenvalue(d);
      if (e < worst) {
        worst = e;
        wit = &s;
      }
    }
    const double need = 1.0 / cp.ellipticity;
    c.status = worst >= need - opt.tol ? CheckStatus::satisfied : CheckStatus::violated;
    c.detail = "min eigenvalue of sigma sigma^T = " + std::to_string(worst) + ", required >= 1/C0 = " +
               std::to_string(need);
    if (c.status == CheckStatus::violated) {
      c.witness_x = wit->x;
      c.witness_u = wit->u;
    }
    rep.checks.push_back(c);
  }

  // cond2 / cond3: smallness relative to Sigma0.
  {
    AssumptionCheck c2{"cond2"};
    AssumptionCheck c3{"cond3"};
    const bool have_baseline = cp.sigma0 || !cp.vol_action_dependent;
    if (have_baseline) {
      auto base = [&](const Vec& x, const Vec& u) -> Sym {
        if (cp.sigma0) return cp.sigma0(x);
        return cp.covariance(x, u);  // action-independent: Sigma0 = Sigma
      };
      auto M = [&](const Vec& x, const Vec& u) { return cp.covariance(x, u) - base(x, u); };
      SmallnessReport sm;
      sm.sigma0 = cp.sigma0 ? "configured" : "sigma sigma^T (action-independent)";
      static constexpr double steps[] = {1.0, 0.5, 0.25, 0.1, 0.03, 0.01};
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const Sym m = M(s.x, s.u);
        sm.eps0 = std::max(sm.eps0, m.max_abs(d));
        const double t = steps[i % std::size(steps)];
        Vec dir{};
        double nrm = 0.0;
        for (int k = 0; k < d; ++k) {
          dir[k] = detail::radical_inverse(i + 7, k == 0 ? 11u : 13u) - 0.5;
          nrm += dir[k] * dir[k];
        }
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) continue;
        Vec y = s.x;
        for (int k = 0; k < d; ++k) y[k] += t * dir[k] / nrm;
        const Sym my = M(y, s.u);
        sm.eps1 = std::max(sm.eps1, (m - my).max_abs(d) / std::pow(t, alpha));
        ++sm.pair_samples;
      }
      if (!cp.vol_action_dependent && !cp.sigma0) {
        sm.eps0 = 0.0;
        sm.eps1 = 0.0;
      }
      const double A = opt.regularity_bound;
      sm.cond3 = {cp.rho >= std::pow(A, 2.0 / (1.0 - alpha)),
                  sm.eps0 * A * std::pow(cp.rho, alpha / 2.0) <= 1.0, sm.eps1 * A <= 1.0};
      c2.status = (sm.eps0 < 1.0 && sm.eps1 < 1.0) ? CheckStatus::satisfied : CheckStatus::violated;
      c2.detail = "eps0 = " + std::to_string(sm.eps0) + ", eps1 >= " + std::to_string(sm.eps1);
      const bool ok3 = sm.cond3[0] && sm.cond3[1] && sm.cond3[2];
      c3.status = ok3 ? CheckStatus::satisfied : CheckStatus::violated;
      c3.detail = std::string("rho >= A^{2/(1-alpha)}: ") + (sm.cond3[0] ? "yes" : "no") +
                  ", eps0 A rho^{alpha/2} <= 1: " + (sm.cond3[1] ? "yes" : "no") +
                  ", eps1 A <= 1: " + (sm.cond3[2] ? "yes" : "no") + " (A = " + std::to_string(A) + ")";
      rep.smallness = sm;
    } else {
      c2.detail = "no baseline Sigma0 configured";
      c3.detail = "requires cond2";
    }
    rep.checks.push_back(c2);
    rep.checks.push_back(c3);
  }

  // c.3: growth bounds.
  {
    AssumptionCheck c{"c.3", CheckStatus::satisfied};
    const Growth& g = cp.growth;
    for (const auto& s : samples) {
      const double rx = norm2(s.x, d);
      const double r = std::abs(cp.reward(s.x, s.u));
      const double b = max_abs(cp.drift(s.x, s.u), d);
      const double sg = cp.vol(s.x, s.u).max_abs(d);
      const double slack = 1.0 + opt.tol;
      const char* which = nullptr;
      if (r > g.A1 * (1.0 + std::pow(rx, g.N)) * slack + opt.tol) which = "reward";
      else if (b > g.A2 * (1.0 + rx) * slack + opt.tol) which = "drift";
      else if (sg > g.A3 * (1.0 + rx) * slack + opt.tol) which = "volatility";
      if (which) {
        c.status = CheckStatus::violated;
        c.detail = std::string(which) + " growth bound exceeded at x = " + format_point(s.x, d);
        c.witness_x = s.x;
        c.witness_u = s.u;
        break;
      }
    }
    if (c.status == CheckStatus::satisfied) c.detail = "growth bounds hold at all samples";
    rep.checks.push_back(c);
  }

  // c.4: rho >= 4(N+1)(A2 + N A3).
  {
    AssumptionCheck c{"c.4"};
    const double thr = cp.discount_threshold();
    if (cp.bounded_coefficients) {
      c.detail = "bounded coefficients: discount threshold not required";
    } else {
      c.status = cp.rho >= thr ? CheckStatus::satisfied : CheckStatus::violated;
      c.detail = "rho = " + std::to_string(cp.rho) + ", threshold 4(N+1)(A2+N A3) = " + std::to_string(thr);
    }
    rep.checks.push_back(c);
  }
  return rep;
}

}  // namespace entpia
