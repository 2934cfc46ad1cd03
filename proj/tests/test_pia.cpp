#include <gtest/gtest.h>

#include <cmath>

#include "entpia/pia.hpp"

using namespace entpia;

namespace {

ControlProblem expr_problem(const char* r, const char* b, const char* s, double rho) {
  return problem_from_json({{"expressions", {{"r", r}, {"b", {b}}, {"sigma", {{s}}}}}, {"rho", rho}});
}

double core_max(const ScalarField& a, const ScalarField& b, bool signed_diff = false) {
  double m = signed_diff ? -1e300 : 0.0;
  for (std::size_t i : a.grid.core_nodes()) m = std::max(m, signed_diff ? a[i] - b[i] : std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Pia, FixedPointIsStationary) {
  const ControlProblem cp = builtin_problem("bounded-trig", {{"rho", 10.0}});
  const Discretization d = default_discretization(cp, 65);
  const PiaSolver s(cp, d);
  const PiaResult r = s.run(ScalarField(d.grid), {100, 1e-12});
  ASSERT_TRUE(r.converged);
  const double tol = d.solver.rel_tol;
  EXPECT_LT(s.core_hjb_residual(r.state.v), tol);
  const PiaState next = s.step(r.state.v, r.iterations + 1);
  EXPECT_LT(sup_norm(next.v - r.state.v), 10 * tol);
}

TEST(Pia, ActionIndependentCollapsesInOneStep) {
  const ControlProblem cp = expr_problem("sin(x1)", "cos(x1)", "1.2", 3.0);
  const Discretization d = default_discretization(cp, 65);
  const PiaResult r = pia_run(cp, d, ScalarField(d.grid), {4, 1e-300}, {.keep_iterates = true});
  for (double p : r.state.policy.density) EXPECT_NEAR(p, 1.0, 1e-13);
  for (std::size_t k = 1; k < r.iterates.size(); ++k) EXPECT_LT(sup_norm(r.iterates[k] - r.iterates[0]), 1e-13);
}

TEST(Pia, ConstantRewardGivesConstantValue) {
  const ControlProblem cp = expr_problem("2.5", "sin(x1)*u1", "1 + 0.5*u1", 5.0);
  Discretization d = default_discretization(cp, 65);
  const PiaResult r = pia_run(cp, d, ScalarField(d.grid), {20, 1e-12});
  ASSERT_TRUE(r.converged);
  for (double v : r.state.v.values) EXPECT_NEAR(v, 0.5, 1e-10);
}

TEST(Pia, MonotoneImprovementAndBracket) {
  const ControlProblem cp = builtin_problem("bounded-trig", {{"rho", 10.0}});
  const Discretization d = default_discretization(cp, 129);
  const double tol = d.solver.rel_tol;
  const PiaResult star = pia_run(cp, d, ScalarField(d.grid), {100, 1e-12});
  const PiaResult r = pia_run(cp, d, ScalarField(d.grid), {40, 1e-8}, {.keep_iterates = true, .run_all = true});
  for (const auto& rec : r.trace.records)
    if (rec.n >= 2) EXPECT_GE(rec.min_increment, -10 * tol) << "iteration " << rec.n;
  for (const auto& v : r.iterates) EXPECT_LE(core_max(v, star.state.v, true), 10 * tol);
}

TEST(Pia, IncrementsContract) {
  const ControlProblem cp = builtin_problem("bounded-trig", {{"rho", 20.0}});
  const Discretization d = default_discretization(cp, 129);
  const PiaResult r = pia_run(cp, d, ScalarField(d.grid), {40, 1e-13});
  ASSERT_TRUE(r.converged);
  const auto& rec = r.trace.records;
  for (std::size_t k = 3; k < rec.size(); ++k)
    if (rec[k - 1].sup_increment > 1e-12) EXPECT_LE(rec[k].sup_increment / rec[k - 1].sup_increment, 0.9);
}

TEST(Pia, ErrorColumnsRecorded) {
  const ControlProblem cp = builtin_problem("small-diffusion", {{"eps0", 0.05}});
  const Discretization d = default_discretization(cp, 65);
  const ReferenceSolution ref = reference_solution(cp, refined(d), d.grid);
  ASSERT_TRUE(ref.converged);
  RunOptions opt;
  opt.reference = &ref.coarse;
  opt.seminorms = true;
  opt.run_all = true;
  const PiaResult r = pia_run(cp, d, ScalarField(d.grid), {10, 1e-8}, opt);
  ASSERT_EQ(r.trace.records.size(), 10u);
  for (const auto& rec : r.trace.records) {
    EXPECT_TRUE(std::isfinite(rec.weighted_error));
    EXPECT_TRUE(std::isfinite(rec.holder2));
  }
  EXPECT_GT(r.trace.records.back().weighted_error, 0.0);
}

TEST(Reference, ActionIndependentEqualsLinearSolve) {
  const ControlProblem cp = expr_problem("cos(x1)", "-0.5*x1", "1", 2.0);
  const Discretization d = default_discretization(cp, 33);
  const Discretization f = refined(d);
  const ReferenceSolution ref = reference_solution(cp, f, d.grid);
  const PiaSolver s(cp, f);
  const auto c = averaged_coefficients(s.table(), PolicyField::uniform(f.grid, f.quad));
  const ScalarField lin = s.evaluate(c);
  EXPECT_LT(sup_norm(ref.fine - lin), 1e-12);
}

TEST(Reference, ContinuumResidualSecondOrder) {
  // coarse stencil applied to the injected fine-grid reference
  const ControlProblem cp = builtin_problem("bounded-trig", {{"rho", 10.0}});
  double prev = 0.0;
  for (int n : {33, 65, 129}) {
    const Discretization d = default_discretization(cp, n);
    const ReferenceSolution ref = reference_solution(cp, refined(d), d.grid);
    const double res = sup_norm(continuum_hjb_residual(cp, d.quad, ref.coarse), d.grid.core_nodes());
    if (prev > 0.0) {
      EXPECT_GT(prev / res, 3.5) << "n = " << n;
      EXPECT_LT(prev / res, 4.5) << "n = " << n;
    }
    prev = res;
  }
}

TEST(Reference, ConvergedResidualAtRoundoff) {
  const ControlProblem cp = builtin_problem("bounded-trig", {{"rho", 10.0}});
  const Discretization d = default_discretization(cp, 65);
  const PiaResult r = pia_run(cp, d, ScalarField(d.grid), {100, 1e-12});
  EXPECT_LT(sup_norm(continuum_hjb_residual(cp, d.quad, r.state.v), d.grid.core_nodes()), 1e-10);
}

TEST(Pia, RejectsBadInput) {
  const ControlProblem cp = builtin_problem("bounded-trig", json::object());
  const Discretization d = default_discretization(cp, 33);
  const Grid other = build_grid(Box::cube(1, -4, 4), 17, 0.5);
  EXPECT_THROW(pia_run(cp, d, ScalarField(other), {}), InvalidArgument);
  EXPECT_THROW(pia_run(cp, d, ScalarField(d.grid, NAN), {}), InvalidArgument);
  IterationTrace t;
  t.append({.n = 2});
  EXPECT_THROW(t.append({.n = 2}), InvalidArgument);
}

TEST(Pia, DivergenceDiagnosed) {
  const ControlProblem cp = builtin_problem("bounded-trig", {{"rho", 10.0}});
  const Discretization d = default_discretization(cp, 65);
  RunOptions opt;
  opt.divergence_factor = 1e-3;
  const PiaResult r = pia_run(cp, d, ScalarField(d.grid), {5, 1e-8}, opt);
  EXPECT_TRUE(r.diverged);
  EXPECT_NE(r.diagnosis.find("divergence"), std::string::npos);
}

TEST(Pia, HugeInitialGuessStaysFinite) {
  const ControlProblem cp = builtin_problem("linear-growth", {{"rho", 0.05}, {"A2", 4.0}});
  const Discretization d = default_discretization(cp, 65);
  const ScalarField v0 = ScalarField::sample(d.grid, [](const Vec& x) { return 1e4 * (1 + x[0] * x[0]); });
  const PiaResult r = pia_run(cp, d, v0, {5, 1e-8});
  for (double x : r.state.v.values) EXPECT_TRUE(std::isfinite(x));
}
