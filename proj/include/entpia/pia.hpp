#pragma once

// Policy iteration: alternate Gibbs policy improvement and linear policy evaluation.

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "entpia/grid.hpp"
#include "entpia/linsolve.hpp"
#include "entpia/norms.hpp"
#include "entpia/policy.hpp"
#include "entpia/problem.hpp"
#include "entpia/quadrature.hpp"

namespace entpia {

struct Discretization {
  Grid grid;
  ActionQuadrature quad;
  DriftScheme scheme = DriftScheme::hybrid;
  BoundaryCondition bc;
  SolverOptions solver;
};

/// Default discretization: box [-4,4]^d with n nodes per axis, core [-2,2]^d,
/// 8 Gauss nodes per action axis, linear-extrapolation boundary.
inline Discretization default_discretization(const ControlProblem& cp, int n = 129, int action_nodes = 8) {
  Discretization d;
  d.grid = build_grid(Box::cube(cp.state_dim, -4.0, 4.0), n, 0.5);
  d.quad = build_action_quadrature(cp.action_dim, action_nodes);
  d.bc.growth = cp.growth;
  return d;
}

struct PiaState {
  int n = 0;
  ScalarField v_prev;
  PolicyField policy;
  AveragedCoefficients coeffs;
  ScalarField v;
  SolveReport solve;
  bool m_matrix = true;
};

struct IterationRecord {
  int n = 0;
  double sup_v = 0.0;
  double sup_increment = 0.0;  // core sup |v^n - v^{n-1}|
  double min_increment = 0.0;  // core min (v^n - v^{n-1})
  double hjb_residual = 0.0;   // core sup |rho v^n - F(v^n)| (discrete)
  double weighted_error = std::numeric_limits<double>::quiet_NaN();
  double sup_error = std::numeric_limits<double>::quiet_NaN();
  double grad_sup_error = std::numeric_limits<double>::quiet_NaN();
  double holder1 = std::numeric_limits<double>::quiet_NaN();
  double holder2 = std::numeric_limits<double>::quiet_NaN();
  double solver_residual = 0.0;
  bool m_matrix = true;
  double wall_seconds = 0.0;
};

struct IterationTrace {
  std::vector<IterationRecord> records;

  void append(const IterationRecord& r) {
    if (!records.empty() && r.n <= records.back().n) throw InvalidArgument("trace records must increase in n");
    records.push_back(r);
  }
  std::vector<double> weighted_errors() const {
    std::vector<double> e;
    for (const auto& r : records) e.push_back(r.weighted_error);
    return e;
  }
};

struct StopRule {
  int max_iters = 40;
  double delta_tol = 1e-8;
};

struct RunOptions {
  /// Converged reference on the same grid; enables the error columns.
  const ScalarField* reference = nullptr;
  double alpha = 0.5;
  bool seminorms = false;
  /// Ball for the weighted error; defaults to the unit ball about the core center.
  std::optional<Vec> ball_center;
  double ball_radius = 1.0;
  bool keep_iterates = false;
  /// Abort when sup |v^n| exceeds this multiple of the largest growth barrier on the grid.
  double divergence_factor = 1e3;
  /// Keep running to max_iters even after the increment drops below delta_tol.
  bool run_all = false;
};

struct PiaResult {
  IterationTrace trace;
  PiaState state;
  bool converged = false;
  bool diverged = false;
  int iterations = 0;
  std::string diagnosis;
  std::vector<ScalarField> iterates;  // v^1, v^2, ... when requested
};

class PiaSolver {
 public:
  PiaSolver(const ControlProblem& cp, const Discretization& disc)
      : cp_(cp), disc_(disc), table_(tabulate(cp, disc.grid, disc.quad)) {}

  const CoefficientTable& table() const { return table_; }
  const Discretization& discretization() const { return disc_; }
  const ControlProblem& problem() const { return cp_; }

  /// One improvement/evaluation step from v_prev.
  PiaState step(const ScalarField& v_prev, int n) const {
    PiaState s;
    s.n = n;
    s.v_prev = v_prev;
    s.policy = policy_from_value(table_, v_prev, cp_.lambda, disc_.scheme);
    s.coeffs = averaged_coefficients(table_, s.policy, disc_.scheme);
    s.v = evaluate(s.coeffs, &s.solve, &s.m_matrix, n);
    return s;
  }

  /// Solves the linear equation for given averaged coefficients.
  ScalarField evaluate(const AveragedCoefficients& c, SolveReport* rep = nullptr, bool* m_matrix = nullptr,
                       int n = 0) const {
    const LinearOperatorSystem sys = assemble(c);
    if (m_matrix) *m_matrix = sys.m_matrix;
    try {
      return solve_policy_evaluation(sys, disc_.solver, rep);
    } catch (const SolverError& e) {
      throw SolverError(std::string(e.what()) + " (iteration " + std::to_string(n) + ")", e.residuals());
    }
  }

  LinearOperatorSystem assemble(const AveragedCoefficients& c) const {
    BoundaryCondition bc = disc_.bc;
    bc.growth = cp_.growth;
    if (bc.kind == BcKind::prescribed && bc.values.empty()) throw InvalidArgument("prescribed bc needs values");
    return assemble_operator(disc_.grid, c, cp_.rho, cp_.lambda, bc);
  }

  /// rho v - F(v) at every node, F from the discrete generator.
  ScalarField hjb_residual(const ScalarField& v) const {
    ScalarField F = discrete_hamiltonian(table_, v, cp_.lambda, disc_.scheme);
    for (std::size_t i = 0; i < F.size(); ++i) F.values[i] = cp_.rho * v.values[i] - F.values[i];
    return F;
  }

  double core_hjb_residual(const ScalarField& v) const {
    const ScalarField R = hjb_residual(v);
    double m = 0.0;
    const Grid& g = disc_.grid;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g.in_core(i) && !g.on_boundary(i)) m = std::max(m, std::abs(R.values[i]));
    return m;
  }

  PiaResult run(const ScalarField& v0, const StopRule& stop, const RunOptions& opt = {}) const {
    const Grid& g = disc_.grid;
    if (!g.same_shape(v0.grid)) throw InvalidArgument("initial field does not match the grid");
    if (!v0.finite()) throw InvalidArgument("initial field must be finite");
    if (stop.max_iters < 1) throw InvalidArgument("max_iters must be at least 1");
    if (opt.reference && !g.same_shape(opt.reference->grid)) throw InvalidArgument("reference grid differs");
    const auto core = g.core_nodes();
    Vec center = opt.ball_center.value_or(g.core.center());
    double barrier_max = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) barrier_max = std::max(barrier_max, cp_.barrier(g.point(i)));

    PiaResult res;
    ScalarField prev = v0;
    for (int n = 1; n <= stop.max_iters; ++n) {
      const auto t0 = std::chrono::steady_clock::now();
      PiaState s = step(prev, n);
      IterationRecord rec;
      rec.n = n;
      rec.sup_v = sup_norm(s.v);
      rec.min_increment = std::numeric_limits<double>::infinity();
      for (std::size_t i : core) {
        const double d = s.v[i] - prev[i];
        rec.sup_increment = std::max(rec.sup_increment, std::abs(d));
        rec.min_increment = std::min(rec.min_increment, d);
      }
      rec.hjb_residual = core_hjb_residual(s.v);
      rec.solver_residual = s.solve.relative_residual;
      rec.m_matrix = s.m_matrix;
      if (opt.reference) {
        const ScalarField e = s.v - *opt.reference;
        rec.sup_error = sup_norm(e, core);
        const VectorField De = gradient(e);
        double gm = 0.0;
        for (std::size_t i : core)
          for (int k = 0; k < g.dim; ++k) gm = std::max(gm, std::abs(De[i][k]));
        rec.grad_sup_error = gm;
        rec.weighted_error = weighted_h1_error(s.v, *opt.reference, cp_.rho, center, opt.ball_radius);
      }
      if (opt.seminorms) {
        rec.holder1 = holder_seminorm(s.v, 1, opt.alpha, g.core);
        rec.holder2 = holder_seminorm(s.v, 2, opt.alpha, g.core);
      }
      rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      res.trace.append(rec);
      if (opt.keep_iterates) res.iterates.push_back(s.v);
      res.iterations = n;
      prev = s.v;
      res.state = std::move(s);
      if (!(rec.sup_v <= opt.divergence_factor * barrier_max)) {
        res.diverged = true;
        res.diagnosis = "divergence at iteration " + std::to_string(n) + ": sup|v| = " + std::to_string(rec.sup_v) +
                        " exceeds " + std::to_string(opt.divergence_factor) + " x growth barrier " +
                        std::to_string(barrier_max);
        return res;
      }
      if (rec.sup_increment < stop.delta_tol) {
        res.converged = true;
        if (!opt.run_all) break;
      }
    }
    res.diagnosis = res.converged ? "converged" : "max_iters reached before the increment fell below delta_tol";
    return res;
  }

 private:
  ControlProblem cp_;
  Discretization disc_;
  CoefficientTable table_;
};

inline PiaState pia_step(const ControlProblem& cp, const Discretization& disc, const PiaState& state) {
  return PiaSolver(cp, disc).step(state.v, state.n + 1);
}

inline PiaResult pia_run(const ControlProblem& cp, const Discretization& disc, const ScalarField& v0,
                         const StopRule& stop, const RunOptions& opt = {}) {
  return PiaSolver(cp, disc).run(v0, stop, opt);
}

struct ReferenceSolution {
  ScalarField fine;
  ScalarField coarse;
  double core_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Converged PIA on `fine` (delta_tol = 100 x solver tolerance), injected onto `coarse`.
inline ReferenceSolution reference_solution(const ControlProblem& cp, const Discretization& fine, const Grid& coarse,
                                            int max_iters = 200) {
  const PiaSolver solver(cp, fine);
  StopRule stop{max_iters, 100.0 * fine.solver.rel_tol};
  const PiaResult r = solver.run(ScalarField(fine.grid), stop);
  ReferenceSolution ref;
  ref.fine = r.state.v;
  ref.coarse = inject(ref.fine, coarse);
  ref.core_residual = solver.core_hjb_residual(ref.fine);
  ref.iterations = r.iterations;
  ref.converged = r.converged;
  return ref;
}

/// Discretization on the nested grid with twice the resolution.
inline Discretization refined(const Discretization& d) {
  Discretization f = d;
  f.grid = refine(d.grid);
  if (f.bc.kind == BcKind::prescribed) throw InvalidArgument("prescribed boundary values cannot be refined");
  return f;
}

/// rho v - F(x, Dv, D^2 v) with central derivatives and the pointwise Hamiltonian.
inline ScalarField continuum_hjb_residual(const ControlProblem& cp, const ActionQuadrature& quad, const ScalarField& v) {
  const Grid& g = v.grid;
  const VectorField D = gradient(v);
  const MatrixField H = hessian(v);
  ScalarField R(g);
  parallel_for(g.size(), [&](std::size_t i) {
    R.values[i] = cp.rho * v.values[i] - hamiltonian_F(cp, quad, g.point(i), D[i], H[i]);
  });
  return R;
}

}  // namespace entpia
