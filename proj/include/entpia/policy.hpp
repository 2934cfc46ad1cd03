#pragma once

// Gibbs policies, entropy, policy-averaged coefficients and the Hamiltonians
// F_pi and F = sup_pi F_pi = lambda ln int exp(f / lambda) du.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "entpia/core.hpp"
#include "entpia/grid.hpp"
#include "entpia/parallel.hpp"
#include "entpia/problem.hpp"
#include "entpia/quadrature.hpp"
#include "entpia/stencil.hpp"

namespace entpia {

/// Result of a max-shifted log-sum-exp over the action nodes.
struct GibbsRow {
  std::vector<double> density;
  /// lambda ln sum_j w_j exp(f_j / lambda)
  double F = 0.0;
};

/// Normalized Gibbs density for exponents f_j; never overflows for finite input.
inline GibbsRow gibbs_from_exponents(std::span<const double> f, std::span<const double> w, double lambda) {
  if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
  double m = -std::numeric_limits<double>::infinity();
  for (double v : f) {
    if (!std::isfinite(v)) throw EvalError("non-finite Hamiltonian integrand");
    m = std::max(m, v);
  }
  GibbsRow row;
  row.density.resize(f.size());
  double z = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) {
    row.density[j] = std::exp((f[j] - m) / lambda);
    z += w[j] * row.density[j];
  }
  for (double& d : row.density) d /= z;
  row.F = m + lambda * std::log(z);
  return row;
}

/// f(u) = r(x,u) + b(x,u).p + 1/2 tr(Sigma(x,u) X) at every action node; the trace
/// term is omitted when sigma does not depend on the action.
inline std::vector<double> hamiltonian_integrand(const ControlProblem& cp, const ActionQuadrature& quad, const Vec& x,
                                                 const Vec& p, const Sym& X, bool force_trace = false) {
  const int d = cp.state_dim;
  std::vector<double> f(quad.size());
  for (std::size_t j = 0; j < quad.size(); ++j) {
    const Vec& u = quad.nodes[j];
    double v = cp.reward(x, u);
    const Vec b = cp.drift(x, u);
    for (int k = 0; k < d; ++k) v += b[k] * p[k];
    if (cp.vol_action_dependent || force_trace) {
      const Sym S = cp.covariance(x, u);
      double tr = S.xx * X.xx;
      if (d == 2) tr += 2.0 * S.xy * X.xy + S.yy * X.yy;
      v += 0.5 * tr;
    }
    if (!std::isfinite(v)) throw EvalError("non-finite Hamiltonian integrand at x = " + format_point(x, d));
    f[j] = v;
  }
  return f;
}

/// Gibbs density Gamma(x, p, X) at the action nodes.
inline std::vector<double> gibbs_policy(const ControlProblem& cp, const ActionQuadrature& quad, const Vec& x,
                                        const Vec& p, const Sym& X) {
  const auto f = hamiltonian_integrand(cp, quad, x, p, X);
  return gibbs_from_exponents(f, quad.weights, cp.lambda).density;
}

/// F(x, p, X) with the full integrand including the trace term.
inline double hamiltonian_F(const ControlProblem& cp, const ActionQuadrature& quad, const Vec& x, const Vec& p,
                            const Sym& X) {
  const auto f = hamiltonian_integrand(cp, quad, x, p, X, true);
  return gibbs_from_exponents(f, quad.weights, cp.lambda).F;
}

/// F_pi(x, p, X) = sum_j w_j [f(u_j) - lambda ln pi_j] pi_j.
inline double F_pi(const ControlProblem& cp, const ActionQuadrature& quad, const Vec& x, const Vec& p, const Sym& X,
                   std::span<const double> density) {
  if (density.size() != quad.size()) throw InvalidArgument("density row does not match the quadrature");
  for (double d : density)
    if (!(d > 0.0)) throw InvalidArgument("density must be strictly positive");
  const auto f = hamiltonian_integrand(cp, quad, x, p, X, true);
  double acc = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j)
    acc += quad.weights[j] * density[j] * (f[j] - cp.lambda * std::log(density[j]));
  return acc;
}

// ---------------------------------------------------------------------------
// Grid-level objects

/// r, b and Sigma at every (node, action node) pair, evaluated once per grid.
struct CoefficientTable {
  Grid grid;
  ActionQuadrature quad;
  bool sigma_action_dependent = false;
  std::vector<double> r;
  std::vector<Vec> b;
  std::vector<Sym> S;

  std::size_t at(std::size_t i, std::size_t j) const { return i * quad.size() + j; }
};

inline CoefficientTable tabulate(const ControlProblem& cp, const Grid& g, const ActionQuadrature& quad) {
  if (g.dim != cp.state_dim) throw InvalidArgument("grid dimension differs from the problem's state dimension");
  if (quad.dim != cp.action_dim) throw InvalidArgument("quadrature dimension differs from the action dimension");
  CoefficientTable t;
  t.grid = g;
  t.quad = quad;
  t.sigma_action_dependent = cp.vol_action_dependent;
  const std::size_t J = quad.size();
  t.r.resize(g.size() * J);
  t.b.resize(g.size() * J);
  t.S.resize(g.size() * J);
  parallel_for(g.size(), [&](std::size_t i) {
    const Vec x = g.point(i);
    for (std::size_t j = 0; j < J; ++j) {
      const Vec& u = quad.nodes[j];
      const std::size_t a = i * J + j;
      t.r[a] = cp.reward(x, u);
      t.b[a] = cp.drift(x, u);
      t.S[a] = cp.covariance(x, u);
      if (!std::isfinite(t.r[a]) || !std::isfinite(t.b[a][0]) || !std::isfinite(t.b[a][1]) ||
          !std::isfinite(t.S[a].xx) || !std::isfinite(t.S[a].xy) || !std::isfinite(t.S[a].yy))
        throw EvalError("non-finite coefficient at x = " + format_point(x, g.dim));
    }
  });
  return t;
}

struct PolicyField {
  Grid grid;
  ActionQuadrature quad;
  std::vector<double> density;  // node-major: density[i * J + j]

  std::size_t actions() const { return quad.size(); }
  double operator()(std::size_t i, std::size_t j) const { return density[i * quad.size() + j]; }
  std::span<const double> row(std::size_t i) const {
    return {density.data() + i * quad.size(), quad.size()};
  }

  static PolicyField uniform(const Grid& g, const ActionQuadrature& q) {
    return {g, q, std::vector<double>(g.size() * q.size(), 1.0)};
  }
};

struct AveragedCoefficients {
  Grid grid;
  std::vector<double> r_bar;
  std::vector<Vec> b_bar;
  std::vector<Sym> Sigma_bar;
  std::vector<double> H_bar;
  /// Policy average of the per-action drift splits; equals split_drift(b_bar) when
  /// every action uses the same branch.
  std::vector<DriftSplit> drift;
};

/// H(x_i) = sum_j w_j pi_ij ln pi_ij.
inline ScalarField entropy(const PolicyField& pol) {
  ScalarField H(pol.grid);
  const std::size_t J = pol.actions();
  for (std::size_t i = 0; i < pol.grid.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      const double p = pol(i, j);
      if (p > 0.0) acc += pol.quad.weights[j] * p * std::log(p);
    }
    H.values[i] = acc;
  }
  return H;
}

inline AveragedCoefficients averaged_coefficients(const CoefficientTable& t, const PolicyField& pol,
                                                  DriftScheme scheme = DriftScheme::hybrid) {
  const Grid& g = t.grid;
  if (!g.same_shape(pol.grid) || pol.actions() != t.quad.size()) throw InvalidArgument("policy does not match table");
  const std::size_t J = t.quad.size();
  AveragedCoefficients c;
  c.grid = g;
  c.r_bar.assign(g.size(), 0.0);
  c.b_bar.assign(g.size(), Vec{});
  c.Sigma_bar.assign(g.size(), Sym{});
  c.H_bar.assign(g.size(), 0.0);
  c.drift.assign(g.size(), DriftSplit{});
  parallel_for(g.size(), [&](std::size_t i) {
    const auto m = g.multi(i);
    for (std::size_t j = 0; j < J; ++j) {
      const std::size_t a = t.at(i, j);
      const double p = pol(i, j);
      const double wp = t.quad.weights[j] * p;
      c.r_bar[i] += wp * t.r[a];
      for (int k = 0; k < g.dim; ++k) c.b_bar[i][k] += wp * t.b[a][k];
      c.Sigma_bar[i] += wp * t.S[a];
      if (p > 0.0) c.H_bar[i] += wp * std::log(p);
      c.drift[i].add(split_drift(g, m, t.b[a], t.S[a], scheme), wp);
    }
  });
  return c;
}

inline AveragedCoefficients averaged_coefficients(const ControlProblem& cp, const PolicyField& pol,
                                                  DriftScheme scheme = DriftScheme::hybrid) {
  return averaged_coefficients(tabulate(cp, pol.grid, pol.quad), pol, scheme);
}

/// Per-action integrand f_j = r_j + (L_j v)(x_i) with the discrete generator; the
/// diffusion part is skipped unless sigma depends on the action or `full` is set.
inline void discrete_integrand(const CoefficientTable& t, const std::vector<double>& v, std::size_t i,
                               DriftScheme scheme, bool full, std::span<double> f) {
  const Grid& g = t.grid;
  const auto m = g.multi(i);
  const bool diff = full || t.sigma_action_dependent;
  for (std::size_t j = 0; j < t.quad.size(); ++j) {
    const std::size_t a = t.at(i, j);
    const DriftSplit s = split_drift(g, m, t.b[a], t.S[a], scheme);
    f[j] = t.r[a] + apply_generator(g, v, i, s, t.S[a], diff);
  }
}

/// Gibbs policy field from the value `v` using the discrete generator at each node.
inline PolicyField policy_from_value(const CoefficientTable& t, const ScalarField& v, double lambda,
                                     DriftScheme scheme = DriftScheme::hybrid) {
  const Grid& g = t.grid;
  if (!g.same_shape(v.grid)) throw InvalidArgument("value field does not match table grid");
  const std::size_t J = t.quad.size();
  PolicyField pol{g, t.quad, std::vector<double>(g.size() * J)};
  parallel_for(g.size(), [&](std::size_t i) {
    std::vector<double> f(J);
    discrete_integrand(t, v.values, i, scheme, false, f);
    const GibbsRow row = gibbs_from_exponents(f, t.quad.weights, lambda);
    std::copy(row.density.begin(), row.density.end(), pol.density.begin() + i * J);
  });
  return pol;
}

/// Discrete Hamiltonian F at every node for the value `v`.
inline ScalarField discrete_hamiltonian(const CoefficientTable& t, const ScalarField& v, double lambda,
                                        DriftScheme scheme = DriftScheme::hybrid) {
  const Grid& g = t.grid;
  const std::size_t J = t.quad.size();
  ScalarField F(g);
  parallel_for(g.size(), [&](std::size_t i) {
    std::vector<double> f(J);
    discrete_integrand(t, v.values, i, scheme, true, f);
    F.values[i] = gibbs_from_exponents(f, t.quad.weights, lambda).F;
  });
  return F;
}

/// CSV with node coordinates, action node coordinates and density.
inline void write_policy_csv(const std::filesystem::path& path, const PolicyField& pol) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.precision(17);
  const Grid& g = pol.grid;
  for (int k = 0; k < g.dim; ++k) os << 'x' << (k + 1) << ',';
  for (int k = 0; k < pol.quad.dim; ++k) os << 'u' << (k + 1) << ',';
  os << "density\r\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec x = g.point(i);
    for (std::size_t j = 0; j < pol.actions(); ++j) {
      for (int k = 0; k < g.dim; ++k) os << x[k] << ',';
      for (int k = 0; k < pol.quad.dim; ++k) os << pol.quad.nodes[j][k] << ',';
      os << pol(i, j) << "\r\n";
    }
  }
}

}  // namespace entpia
