#pragma once

// Monte-Carlo policy values: Euler-Maruyama simulation of the exploratory SDE with
// policy-averaged drift and diffusion, discounted running reward r - lambda H.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "entpia/grid.hpp"
#include "entpia/parallel.hpp"
#include "entpia/pia.hpp"
#include "entpia/policy.hpp"
#include "entpia/problem.hpp"

namespace entpia {

struct McOptions {
  std::size_t npaths = 10000;
  /// Horizon; 0 selects 20 / rho.
  double T = 0.0;
  /// Step; 0 selects T / 10^4.
  double dt = 0.0;
  std::uint64_t seed = 1;
  /// Estimates with a larger exit fraction are flagged invalid.
  double max_exit_fraction = 0.2;
};

struct McEstimate {
  Vec x0{};
  int dim = 1;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t npaths = 0;
  double T = 0.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::size_t exits = 0;
  std::size_t cholesky_failures = 0;
  double exit_fraction = 0.0;
  double tail_bound = 0.0;
  bool valid = true;
  std::string note;

  json to_json() const {
    return {{"x0", std::vector<double>(x0.begin(), x0.begin() + dim)},
            {"mean", mean},
            {"stderr", stderr_},
            {"npaths", npaths},
            {"dt", dt},
            {"T", T},
            {"seed", seed},
            {"exit_fraction", exit_fraction},
            {"cholesky_failures", cholesky_failures},
            {"tail_bound", tail_bound},
            {"valid", valid},
            {"note", note}};
  }
};

struct PathSample {
  double payoff = 0.0;
  bool exited = false;
  bool cholesky_failed = false;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-path seed from the run seed and the path index.
inline std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) {
  return splitmix64(splitmix64(seed) ^ (path * 0xd1342543de82ef95ULL + 1));
}

/// Averaged coefficient fields with multilinear interpolation.
class AveragedSde {
 public:
  AveragedSde(const ControlProblem& cp, const PolicyField& pol)
      : rho_(cp.rho), grid_(pol.grid) {
    const CoefficientTable t = tabulate(cp, pol.grid, pol.quad);
    const AveragedCoefficients c = averaged_coefficients(t, pol);
    const std::size_t n = grid_.size();
    g_.resize(n);
    b_ = c.b_bar;
    S_ = c.Sigma_bar;
    for (std::size_t i = 0; i < n; ++i) {
      g_[i] = c.r_bar[i] - cp.lambda * c.H_bar[i];
      g_sup_ = std::max(g_sup_, std::abs(g_[i]));
    }
  }

  const Grid& grid() const { return grid_; }
  double rho() const { return rho_; }
  double reward_sup() const { return g_sup_; }

  struct Local {
    double g = 0.0;
    Vec b{};
    Sym S;
  };

  /// Multilinear interpolation at x (clamped to the box).
  Local at(const Vec& x) const {
    const Grid& gr = grid_;
    std::array<int, kMaxDim> i0{0, 0};
    Vec t{};
    for (int k = 0; k < gr.dim; ++k) {
      double s = (x[k] - gr.box.lo[k]) / gr.h[k];
      s = std::clamp(s, 0.0, static_cast<double>(gr.n[k] - 1));
      int i = static_cast<int>(std::floor(s));
      if (i >= gr.n[k] - 1) i = gr.n[k] - 2;
      i0[k] = i;
      t[k] = s - i;
    }
    Local out;
    const int corners = 1 << gr.dim;
    for (int c = 0; c < corners; ++c) {
      double w = 1.0;
      std::array<int, kMaxDim> m{0, 0};
      for (int k = 0; k < gr.dim; ++k) {
        const int bit = (c >> k) & 1;
        m[k] = i0[k] + bit;
        w *= bit ? t[k] : 1.0 - t[k];
      }
      if (w == 0.0) continue;
      const std::size_t idx = gr.index(m[0], m[1]);
      out.g += w * g_[idx];
      for (int k = 0; k < gr.dim; ++k) out.b[k] += w * b_[idx][k];
      out.S += w * S_[idx];
    }
    return out;
  }

  /// One discounted payoff. Running reward uses the exact discount weight over each
  /// step with the integrand frozen at the left endpoint; a path leaving the box is
  /// absorbed and its last integrand is frozen for the remaining horizon.
  PathSample path(const Vec& x0, double dt, double T, std::uint64_t seed) const {
    const int d = grid_.dim;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const long steps = std::lround(T / dt);
    const double step_weight = -std::expm1(-rho_ * dt) / rho_;
    const double sq = std::sqrt(dt);
    PathSample out;
    Vec x = x0;
    for (long k = 0; k < steps; ++k) {
      const double tk = k * dt;
      const Local c = at(x);
      out.payoff += c.g * std::exp(-rho_ * tk) * step_weight;
      // Cholesky factor of the averaged diffusion
      double l00, l10 = 0.0, l11 = 0.0;
      if (!(c.S.xx > 0.0)) {
        out.cholesky_failed = true;
        return out;
      }
      l00 = std::sqrt(c.S.xx);
      if (d == 2) {
        l10 = c.S.xy / l00;
        const double r = c.S.yy - l10 * l10;
        if (!(r > 0.0)) {
          out.cholesky_failed = true;
          return out;
        }
        l11 = std::sqrt(r);
      }
      const double z0 = normal(rng);
      const double z1 = d == 2 ? normal(rng) : 0.0;
      x[0] += c.b[0] * dt + sq * l00 * z0;
      if (d == 2) x[1] += c.b[1] * dt + sq * (l10 * z0 + l11 * z1);
      if (!grid_.box.contains(x)) {
        const double t1 = (k + 1) * dt;
        out.payoff += c.g * (std::exp(-rho_ * t1) - std::exp(-rho_ * T)) / rho_;
        out.exited = true;
        return out;
      }
    }
    return out;
  }

 private:
  double rho_;
  Grid grid_;
  std::vector<double> g_;
  std::vector<Vec> b_;
  std::vector<Sym> S_;
  double g_sup_ = 0.0;
};

inline void check_mc_inputs(const Grid& g, const Vec& x0, double dt, double T, double rho) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (!(T >= 10.0 / rho * (1.0 - 1e-12))) throw InvalidArgument("horizon T must be at least 10/rho");
  if (!(dt <= T)) throw InvalidArgument("dt must not exceed T");
  for (int k = 0; k < g.dim; ++k)
    if (x0[k] < g.core.lo[k] || x0[k] > g.core.hi[k]) throw InvalidArgument("x0 must lie inside the core");
}

inline PathSample simulate_exploratory_sde(const PolicyField& pol, const ControlProblem& cp, const Vec& x0, double dt,
                                           double T, std::uint64_t seed) {
  check_mc_inputs(pol.grid, x0, dt, T, cp.rho);
  return AveragedSde(cp, pol).path(x0, dt, T, seed);
}

inline McEstimate mc_value(const AveragedSde& sde, const Vec& x0, const McOptions& opt) {
  const double rho = sde.rho();
  const double T = opt.T > 0.0 ? opt.T : 20.0 / rho;
  const double dt = opt.dt > 0.0 ? opt.dt : T / 1e4;
  if (opt.npaths < 1000) throw InvalidArgument("npaths must be at least 1000");
  check_mc_inputs(sde.grid(), x0, dt, T, rho);
  std::vector<PathSample> samples(opt.npaths);
  parallel_for(opt.npaths, [&](std::size_t p) { samples[p] = sde.path(x0, dt, T, path_seed(opt.seed, p)); });
  McEstimate e;
  e.x0 = x0;
  e.dim = sde.grid().dim;
  e.T = T;
  e.dt = dt;
  e.seed = opt.seed;
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& s : samples) {
    if (s.cholesky_failed) {
      ++e.cholesky_failures;
      continue;
    }
    if (s.exited) ++e.exits;
    sum += s.payoff;
    ++used;
  }
  e.npaths = used;
  if (used < 2) throw Error("Monte-Carlo estimate has fewer than two usable paths");
  e.mean = sum / used;
  double ss = 0.0;
  for (const auto& s : samples)
    if (!s.cholesky_failed) ss += (s.payoff - e.mean) * (s.payoff - e.mean);
  e.stderr_ = std::sqrt(ss / (used - 1)) / std::sqrt(static_cast<double>(used));
  e.exit_fraction = static_cast<double>(e.exits) / used;
  e.tail_bound = std::exp(-rho * T) * sde.reward_sup() / rho;
  if (e.exit_fraction > opt.max_exit_fraction) {
    e.valid = false;
    e.note = "exit fraction above " + std::to_string(opt.max_exit_fraction);
  }
  if (e.cholesky_failures > 0) e.note += (e.note.empty() ? "" : "; ") + std::to_string(e.cholesky_failures) +
                                         " paths aborted on Cholesky failure";
  return e;
}

inline McEstimate mc_value(const ControlProblem& cp, const PolicyField& pol, const Vec& x0, const McOptions& opt) {
  return mc_value(AveragedSde(cp, pol), x0, opt);
}

struct FkPoint {
  Vec x{};
  double pde = 0.0;
  McEstimate mc;
  double allowance = 0.0;
  bool pass = false;
};

/// Compares v^1 (one PIA step from zero) with the Monte-Carlo value of pi^1 at the
/// given grid nodes; allowance 3 stderr + C (h^2 + dt + tail).
inline std::vector<FkPoint> feynman_kac_check(const ControlProblem& cp, const Discretization& disc,
                                              const std::vector<std::size_t>& nodes, const McOptions& opt,
                                              double C = 1.0) {
  const PiaSolver solver(cp, disc);
  const PiaState s = solver.step(ScalarField(disc.grid), 1);
  const AveragedSde sde(cp, s.policy);
  double h2 = 0.0;
  for (int k = 0; k < disc.grid.dim; ++k) h2 = std::max(h2, disc.grid.h[k] * disc.grid.h[k]);
  std::vector<FkPoint> out;
  for (std::size_t i : nodes) {
    FkPoint p;
    p.x = disc.grid.point(i);
    p.pde = s.v[i];
    p.mc = mc_value(sde, p.x, opt);
    p.allowance = 3.0 * p.mc.stderr_ + C * (h2 + p.mc.dt + p.mc.tail_bound);
    p.pass = p.mc.valid && std::abs(p.pde - p.mc.mean) <= p.allowance;
    out.push_back(p);
  }
  return out;
}

}  // namespace entpia
