#pragma once

// Rate fits, manufactured solutions and the parameter sweeps.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "entpia/norms.hpp"
#include "entpia/pia.hpp"
#include "entpia/problem.hpp"
#include "entpia/report.hpp"

namespace entpia {

/// e_n ~ C q^n + f over the window [n0, n1).
struct RateFit {
  double q = 1.0;
  double C = 0.0;
  double f = 0.0;
  /// RMS of ln e_n - ln(model) over the window.
  double residual = 0.0;
  int n0 = 0;
  int n1 = 0;
  std::string model;  // "geometric" or "plateau"
};

namespace detail {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  return f;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace detail

/// Fits e_n (n = index into `errors`) over [n0, n1). Two models are tried: pure
/// geometric decay (log-linear least squares) and geometric decay onto a floor,
/// where the floor is the median of the trailing 25% of the window and q is fitted
/// on e_n - f over the points still clearly above the floor. The floor model is
/// kept when it reduces the log residual by at least half.
inline RateFit fit_geometric_rate(const std::vector<double>& errors, int n0 = 0, int n1 = -1) {
  if (n1 < 0) n1 = static_cast<int>(errors.size());
  if (n0 < 0 || n1 > static_cast<int>(errors.size()) || n1 - n0 < 5)
    throw InvalidArgument("rate fit needs at least 5 points in the window");
  std::vector<double> ns, e;
  for (int n = n0; n < n1; ++n) {
    const double v = errors[n];
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("rate fit needs positive finite errors");
    ns.push_back(n);
    e.push_back(v);
  }
  if (std::all_of(e.begin(), e.end(), [&](double v) { return v == e.front(); }))
    throw InvalidArgument("degenerate rate fit: all errors are equal");

  auto log_rms = [&](double C, double q, double f) {
    double s = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double model = C * std::pow(q, ns[i]) + f;
      const double d = std::log(e[i]) - std::log(model);
      s += d * d;
    }
    return std::sqrt(s / e.size());
  };

  RateFit geo;
  geo.n0 = n0;
  geo.n1 = n1;
  geo.model = "geometric";
  {
    std::vector<double> le(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) le[i] = std::log(e[i]);
    const auto lf = detail::least_squares(ns, le);
    geo.q = std::exp(lf.slope);
    geo.C = std::exp(lf.intercept);
    geo.f = 0.0;
    geo.residual = log_rms(geo.C, geo.q, 0.0);
  }

  RateFit pl = geo;
  bool have_plateau = false;
  {
    const std::size_t tail = std::max<std::size_t>(1, (e.size() + 3) / 4);
    const double f = detail::median(std::vector<double>(e.end() - tail, e.end()));
    const std::size_t head = e.size() - tail;
    for (double factor : {1.0, 0.1, 0.01}) {
      std::vector<double> x, y;
      for (std::size_t i = 0; i < head; ++i)
        if (e[i] - f > factor * f) {
          x.push_back(ns[i]);
          y.push_back(std::log(e[i] - f));
        }
      if (x.size() >= 2) {
        const auto lf = detail::least_squares(x, y);
        pl.q = std::min(1.0, std::exp(lf.slope));
        pl.C = std::exp(lf.intercept);
        have_plateau = true;
        break;
      }
      if (x.size() == 1 && factor == 0.01) {
        // a single transient point: the next excess is below 0.01 f, which bounds q from above
        const std::size_t k = static_cast<std::size_t>(x[0]) - n0;
        const double next = k + 1 < e.size() ? std::max(e[k + 1] - f, 0.01 * f) : 0.01 * f;
        pl.q = std::min(1.0, next / (e[k] - f));
        pl.C = (e[k] - f) / std::pow(pl.q, ns[k]);
        have_plateau = true;
      }
    }
    if (have_plateau) {
      pl.f = f;
      pl.model = "plateau";
      pl.residual = log_rms(pl.C, pl.q, pl.f);
    }
  }
  if (have_plateau && (pl.residual < 0.5 * geo.residual || geo.q > 1.0)) return pl;
  if (geo.q > 1.0) throw InvalidArgument("rate fit: errors grow over the window");
  return geo;
}

// ---------------------------------------------------------------------------
// Manufactured solutions

/// Exact solution w with its first and second derivatives.
struct Manufactured {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> grad;
  std::function<Sym(const Vec&)> hess;
};

/// w(x) = amplitude * mean_k sin(x_k).
inline Manufactured sine_solution(int d, double amplitude = 1.0) {
  Manufactured m;
  m.value = [d, amplitude](const Vec& x) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += std::sin(x[k]);
    return amplitude * s / d;
  };
  m.grad = [d, amplitude](const Vec& x) {
    Vec g{};
    for (int k = 0; k < d; ++k) g[k] = amplitude * std::cos(x[k]) / d;
    return g;
  };
  m.hess = [d, amplitude](const Vec& x) {
    Sym h;
    h.xx = -amplitude * std::sin(x[0]) / d;
    if (d == 2) h.yy = -amplitude * std::sin(x[1]) / d;
    return h;
  };
  return m;
}

struct MmsResult {
  ScalarField v;
  ScalarField exact;
  double interior_sup_error = 0.0;  // over all non-boundary nodes
  double weighted_error = 0.0;      // weighted H^1 error on the unit ball about the core center
};

/// Solves the policy-evaluation equation with the uniform-policy averages of the
/// problem's b and Sigma, forcing chosen so that w is the exact solution, and
/// Dirichlet data from w.
inline MmsResult manufactured_solve(const ControlProblem& cp, const Discretization& disc, const Manufactured& w) {
  const Grid& g = disc.grid;
  const CoefficientTable t = tabulate(cp, g, disc.quad);
  AveragedCoefficients c = averaged_coefficients(t, PolicyField::uniform(g, disc.quad), disc.scheme);
  ScalarField exact = ScalarField::sample(g, w.value);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec x = g.point(i);
    const Vec Dw = w.grad(x);
    const Sym Hw = w.hess(x);
    const Sym& S = c.Sigma_bar[i];
    double tr = S.xx * Hw.xx;
    if (g.dim == 2) tr += 2.0 * S.xy * Hw.xy + S.yy * Hw.yy;
    double bd = 0.0;
    for (int k = 0; k < g.dim; ++k) bd += c.b_bar[i][k] * Dw[k];
    c.r_bar[i] = cp.rho * exact[i] - bd - 0.5 * tr;
    c.H_bar[i] = 0.0;
  }
  BoundaryCondition bc;
  bc.kind = BcKind::prescribed;
  bc.values = exact.values;
  const auto sys = assemble_operator(g, c, cp.rho, cp.lambda, bc);
  MmsResult r;
  r.v = solve_policy_evaluation(sys, disc.solver);
  r.exact = exact;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!g.on_boundary(i)) r.interior_sup_error = std::max(r.interior_sup_error, std::abs(r.v[i] - exact[i]));
  r.weighted_error = weighted_h1_error(r.v, exact, cp.rho, g.core.center(), 1.0);
  return r;
}

// ---------------------------------------------------------------------------
// Sweeps

/// The six scaled quantities of the rho-scaling estimate, measured on the core.
struct RhoRow {
  double rho = 0.0;
  bool converged = false;
  int iterations = 0;
  double sup_v = 0.0;
  double rho_sup = 0.0;         // rho |v|_inf
  double sqrt_rho_grad = 0.0;   // rho^{1/2} |Dv|_inf
  double hess_sup = 0.0;        // |D^2 v|_inf
  double holder0 = 0.0;         // rho^{1 - a/2} [v]_{0,a}
  double holder1 = 0.0;         // rho^{1/2 - a/2} [v]_{1,a}
  double holder2 = 0.0;         // rho^{-a/2} [v]_{2,a}

  std::array<double, 6> scaled() const { return {rho_sup, sqrt_rho_grad, hess_sup, holder0, holder1, holder2}; }
};

inline const std::array<const char*, 6>& rho_quantity_names() {
  static const std::array<const char*, 6> n = {"rho_sup_v",   "sqrt_rho_grad_sup", "hess_sup",
                                               "rho_holder0", "rho_holder1",       "rho_holder2"};
  return n;
}

inline RhoRow measure_scaling(const ScalarField& v, double rho, double alpha) {
  const Grid& g = v.grid;
  const auto core = g.core_nodes();
  RhoRow row;
  row.rho = rho;
  row.sup_v = sup_norm(v, core);
  const VectorField D = gradient(v);
  const MatrixField H = hessian(v);
  double gs = 0.0, hs = 0.0;
  for (std::size_t i : core) {
    for (int k = 0; k < g.dim; ++k) gs = std::max(gs, std::abs(D[i][k]));
    hs = std::max(hs, H[i].max_abs(g.dim));
  }
  row.rho_sup = rho * row.sup_v;
  row.sqrt_rho_grad = std::sqrt(rho) * gs;
  row.hess_sup = hs;
  row.holder0 = std::pow(rho, 1.0 - alpha / 2) * holder_seminorm(v, 0, alpha, g.core);
  row.holder1 = std::pow(rho, 0.5 - alpha / 2) * holder_seminorm(v, 1, alpha, g.core);
  row.holder2 = std::pow(rho, -alpha / 2) * holder_seminorm(v, 2, alpha, g.core);
  return row;
}

inline std::vector<RhoRow> rho_scaling_sweep(const ControlProblem& tmpl, const std::vector<double>& rhos,
                                             const Discretization& disc, double alpha = 0.5,
                                             const StopRule& stop = {200, 1e-9}) {
  if (rhos.empty()) throw InvalidArgument("rho list is empty");
  for (std::size_t i = 0; i < rhos.size(); ++i) {
    if (!(rhos[i] >= 1.0)) throw InvalidArgument("rho values must be at least 1");
    if (i && !(rhos[i] > rhos[i - 1])) throw InvalidArgument("rho list must be ascending");
  }
  std::vector<RhoRow> rows;
  for (double rho : rhos) {
    ControlProblem cp = tmpl;
    cp.rho = rho;
    if (cp.params.is_object()) cp.params["rho"] = rho;
    const PiaResult r = pia_run(cp, disc, ScalarField(disc.grid), stop);
    RhoRow row = measure_scaling(r.state.v, rho, alpha);
    row.converged = r.converged;
    row.iterations = r.iterations;
    rows.push_back(row);
  }
  return rows;
}

inline Table rho_table(const std::vector<RhoRow>& rows) {
  Table t;
  t.header = {"rho", "converged", "iterations", "sup_v"};
  for (const char* n : rho_quantity_names()) t.header.push_back(n);
  for (const auto& r : rows) {
    std::vector<Cell> c = {r.rho, r.converged, static_cast<long long>(r.iterations), r.sup_v};
    for (double q : r.scaled()) c.push_back(q);
    t.rows.push_back(std::move(c));
  }
  return t;
}

struct EpsRow {
  double eps0 = 0.0;
  double rho = 0.0;
  bool converged = false;
  int iterations = 0;
  bool cond3 = false;
  RateFit fit;
  bool fit_ok = false;
  std::string fit_error;
  std::vector<double> errors;
};

/// Runs PIA for each eps0 on the small-diffusion family (with `params` as the
/// template) and fits the weighted-error sequence against the fine-grid reference.
inline EpsRow epsilon_floor_row(const json& params, double eps0, double rho, const Discretization& disc, int iters,
                                double alpha = 0.5) {
  json p = params.is_null() ? json::object() : params;
  p["eps0"] = eps0;
  p["rho"] = rho;
  const ControlProblem cp = builtin_problem("small-diffusion", p);
  EpsRow row;
  row.eps0 = eps0;
  row.rho = rho;
  const auto val = validate_problem(cp, alpha, 1000);
  row.cond3 = val.at("cond3").status == CheckStatus::satisfied;
  const ReferenceSolution ref = reference_solution(cp, refined(disc), disc.grid);
  RunOptions opt;
  opt.reference = &ref.coarse;
  opt.run_all = true;
  const PiaResult r = pia_run(cp, disc, ScalarField(disc.grid), {iters, 100.0 * disc.solver.rel_tol}, opt);
  row.converged = r.converged;
  row.iterations = r.iterations;
  row.errors = r.trace.weighted_errors();
  try {
    row.fit = fit_geometric_rate(row.errors);
    row.fit_ok = true;
  } catch (const InvalidArgument& e) {
    row.fit_error = e.what();
  }
  return row;
}

inline std::vector<EpsRow> epsilon_floor_sweep(const json& params, const std::vector<double>& eps, double rho,
                                               const Discretization& disc, int iters = 40, bool strict = false,
                                               double alpha = 0.5) {
  if (eps.size() < 3) throw InvalidArgument("eps0 sweep needs at least three values");
  if (std::find(eps.begin(), eps.end(), 0.0) == eps.end()) log_warning("eps0 sweep does not include 0");
  std::vector<EpsRow> rows;
  for (double e : eps) rows.push_back(epsilon_floor_row(params, e, rho, disc, iters, alpha));
  const auto largest = std::max_element(eps.begin(), eps.end()) - eps.begin();
  if (!rows[largest].cond3) {
    if (strict) throw InvalidArgument("smallness condition violated at the largest eps0");
    log_warning("smallness condition violated at the largest eps0");
  }
  return rows;
}

inline Table eps_table(const std::vector<EpsRow>& rows) {
  Table t;
  t.header = {"eps0", "rho", "converged", "iterations", "cond3", "fit_ok", "model", "q", "floor", "fit_residual"};
  for (const auto& r : rows)
    t.rows.push_back({r.eps0, r.rho, r.converged, static_cast<long long>(r.iterations), r.cond3, r.fit_ok,
                      r.fit_ok ? r.fit.model : r.fit_error, r.fit.q, r.fit.f, r.fit.residual});
  return t;
}

}  // namespace entpia
