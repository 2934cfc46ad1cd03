#include <gtest/gtest.h>

#include <cmath>

#include "entpia/mcoracle.hpp"

using namespace entpia;

namespace {

ControlProblem expr_problem(const char* r, const char* b, const char* s, double rho) {
  return problem_from_json({{"expressions", {{"r", r}, {"b", {b}}, {"sigma", {{s}}}}}, {"rho", rho}});
}

PolicyField uniform_policy(const ControlProblem& cp, const Grid& g) {
  return PolicyField::uniform(g, build_action_quadrature(cp.action_dim, 4));
}

}  // namespace

TEST(McOracle, ConstantRewardIsDeterministic) {
  const double c = 1.3, rho = 2.0;
  const ControlProblem cp = expr_problem("1.3", "0", "1", rho);
  const Grid g = build_grid(Box::cube(1, -4, 4), 33, 0.5);
  McOptions o;
  o.npaths = 1000;
  o.T = 6.0;
  o.dt = 0.01;
  const McEstimate e = mc_value(cp, uniform_policy(cp, g), {0.0, 0}, o);
  const double exact = c * (1.0 - std::exp(-rho * o.T)) / rho;
  EXPECT_NEAR(e.mean, exact, 1e-12);
  EXPECT_LT(e.stderr_, 1e-12);
  EXPECT_LE(std::abs(e.mean - exact), 3 * e.stderr_ + 1e-12);
}

TEST(McOracle, ExitAccounting) {
  const ControlProblem cp = expr_problem("1", "0", "25", 1.0);
  const Grid g = build_grid(Box::cube(1, -0.1, 0.1), 9, 0.5);
  McOptions o;
  o.npaths = 1000;
  o.T = 10.0;
  o.dt = 0.01;
  const McEstimate e = mc_value(cp, uniform_policy(cp, g), {0.0, 0}, o);
  EXPECT_GT(e.exit_fraction, 0.99);
  EXPECT_FALSE(e.valid);
  EXPECT_FALSE(e.note.empty());
}

TEST(McOracle, OrnsteinUhlenbeckClosedForm) {
  const ControlProblem cp = expr_problem("x1^2", "-x1", "1", 2.0);
  const Grid g = build_grid(Box::cube(1, -4, 4), 129, 0.5);
  McOptions o;
  o.npaths = 10000;
  o.T = 10.0;
  o.dt = 0.01;
  const McEstimate e = mc_value(cp, uniform_policy(cp, g), {0.0, 0}, o);
  // int_0^inf e^{-2t} (1 - e^{-2t}) / 2 dt = 1/4 - 1/8
  EXPECT_LE(std::abs(e.mean - 0.125), 3 * e.stderr_ + o.dt + e.tail_bound);
  EXPECT_TRUE(e.valid);
}

TEST(McOracle, SeedReproducible) {
  const ControlProblem cp = builtin_problem("bounded-trig", json::object());
  const Grid g = build_grid(Box::cube(1, -4, 4), 65, 0.5);
  McOptions o;
  o.npaths = 1000;
  o.dt = 0.01;
  const auto pol = uniform_policy(cp, g);
  const McEstimate a = mc_value(cp, pol, {0.5, 0}, o);
  const McEstimate b = mc_value(cp, pol, {0.5, 0}, o);
  EXPECT_EQ(a.mean, b.mean);
  o.seed = 2;
  EXPECT_NE(mc_value(cp, pol, {0.5, 0}, o).mean, a.mean);
}

TEST(McOracle, RejectsBadInput) {
  const ControlProblem cp = builtin_problem("bounded-trig", json::object());
  const Grid g = build_grid(Box::cube(1, -4, 4), 65, 0.5);
  const auto pol = uniform_policy(cp, g);
  McOptions o;
  o.npaths = 10;
  EXPECT_THROW(mc_value(cp, pol, {0.0, 0}, o), InvalidArgument);
  o.npaths = 1000;
  o.T = 0.5;
  EXPECT_THROW(mc_value(cp, pol, {0.0, 0}, o), InvalidArgument);
  o.T = 0.0;
  EXPECT_THROW(mc_value(cp, pol, {3.5, 0}, o), InvalidArgument);
}

TEST(McOracle, FeynmanKacOnBoundedTrig) {
  const ControlProblem cp = builtin_problem("bounded-trig", json::object());
  const Discretization d = default_discretization(cp, 129);
  McOptions o;
  o.npaths = 4000;
  o.dt = (20.0 / cp.rho) / 500.0;
  std::vector<std::size_t> nodes = {48, 64, 80};
  for (const auto& p : feynman_kac_check(cp, d, nodes, o)) EXPECT_TRUE(p.pass) << p.pde << " vs " << p.mc.mean;
}
