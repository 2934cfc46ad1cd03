#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "entpia/policy.hpp"
#include "entpia/problem.hpp"
#include "entpia/quadrature.hpp"

using namespace entpia;

namespace {

ControlProblem expr_problem(const char* r, const char* b, const char* s, double lambda = 1.0) {
  return problem_from_json({{"expressions", {{"r", r}, {"b", {b}}, {"sigma", {{s}}}}}, {"lambda", lambda}, {"rho", 1.0}});
}

}  // namespace

TEST(Gibbs, ActionIndependentIsUniform) {
  const ControlProblem cp = expr_problem("sin(x1)", "cos(x1)", "1");
  const ActionQuadrature q = build_action_quadrature(1, 6);
  const auto d = gibbs_policy(cp, q, {0.4, 0}, {1.3, 0}, Sym{0.7, 0, 0});
  for (double p : d) EXPECT_NEAR(p, 1.0, 1e-15);
}

TEST(Gibbs, ExponentialDensity) {
  const ControlProblem cp = expr_problem("u1", "0", "1");
  const ActionQuadrature q = build_action_quadrature(1, 8);
  const auto d = gibbs_policy(cp, q, {0.0, 0}, {0.0, 0}, Sym{});
  const double Z = std::exp(1.0) - 1.0;
  for (std::size_t j = 0; j < q.size(); ++j) EXPECT_NEAR(d[j], std::exp(q.nodes[j][0]) / Z, 1e-13);
  EXPECT_NEAR(1.0 / Z, 0.5820, 1e-4);
}

TEST(Gibbs, ShiftInvariance) {
  const ActionQuadrature q = build_action_quadrature(1, 8);
  const auto a = gibbs_policy(expr_problem("u1^2 + sin(x1)", "u1", "1"), q, {0.3, 0}, {0.5, 0}, Sym{});
  const auto b = gibbs_policy(expr_problem("u1^2 + sin(x1) + 17", "u1", "1"), q, {0.3, 0}, {0.5, 0}, Sym{});
  for (std::size_t j = 0; j < q.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-14);
}

TEST(Gibbs, NoOverflowForHugeExponents) {
  const std::vector<double> f = {1e6, 1e6 + 1.0, 1e6 - 1.0};
  const std::vector<double> w = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  const GibbsRow r = gibbs_from_exponents(f, w, 1e-3);
  for (double p : r.density) EXPECT_TRUE(std::isfinite(p));
  EXPECT_TRUE(std::isfinite(r.F));
  EXPECT_THROW(gibbs_from_exponents(f, w, 0.0), InvalidArgument);
}

TEST(Entropy, UniformIsZero) {
  const Grid g = build_grid(Box::cube(1, -1, 1), 5, 1.0);
  const ScalarField H = entropy(PolicyField::uniform(g, build_action_quadrature(1, 4)));
  for (double h : H.values) EXPECT_EQ(h, 0.0);
}

TEST(Entropy, ExponentialDensityClosedForm) {
  const Grid g = build_grid(Box::cube(1, -1, 1), 5, 1.0);
  const ActionQuadrature q = build_action_quadrature(1, 12);
  const double Z = std::exp(1.0) - 1.0;
  PolicyField pol = PolicyField::uniform(g, q);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j) pol.density[i * q.size() + j] = std::exp(q.nodes[j][0]) / Z;
  // int_0^1 e^u/Z (u - ln Z) du = 1/Z - ln Z
  const double oracle = 1.0 / Z - std::log(Z);
  for (double h : entropy(pol).values) EXPECT_NEAR(h, oracle, 1e-13);
  EXPECT_NEAR(oracle, 0.04065, 1e-5);
}

TEST(Averaging, UniformRewardMean) {
  const ControlProblem cp = expr_problem("u1", "0", "1");
  const Grid g = build_grid(Box::cube(1, -1, 1), 5, 1.0);
  const auto c = averaged_coefficients(cp, PolicyField::uniform(g, build_action_quadrature(1, 4)));
  for (double r : c.r_bar) EXPECT_NEAR(r, 0.5, 1e-15);
}

TEST(Averaging, ActionIndependentSigmaExact) {
  const ControlProblem cp = expr_problem("u1*sin(x1)", "u1", "1 + x1^2");
  const Grid g = build_grid(Box::cube(1, -1, 1), 9, 1.0);
  const ActionQuadrature q = build_action_quadrature(1, 6);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.1, 2.0);
  PolicyField pol = PolicyField::uniform(g, q);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) s += q.weights[j] * (pol.density[i * q.size() + j] = U(rng));
    for (std::size_t j = 0; j < q.size(); ++j) pol.density[i * q.size() + j] /= s;
  }
  const auto c = averaged_coefficients(cp, pol);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.point(i)[0];
    EXPECT_NEAR(c.Sigma_bar[i].xx, (1 + x * x) * (1 + x * x), 1e-13 * (1 + x * x) * (1 + x * x));
  }
}

TEST(Averaging, SmallDiffusionWithinEps0) {
  const double eps0 = 0.05;
  const ControlProblem cp = builtin_problem("small-diffusion", {{"eps0", eps0}});
  const Grid g = build_grid(Box::cube(1, -4, 4), 33, 0.5);
  const ActionQuadrature q = build_action_quadrature(1, 8);
  const CoefficientTable t = tabulate(cp, g, q);
  ScalarField v = ScalarField::sample(g, [](const Vec& x) { return std::sin(3 * x[0]); });
  const auto pol = policy_from_value(t, v, cp.lambda);
  const auto c = averaged_coefficients(t, pol);
  for (const Sym& S : c.Sigma_bar) EXPECT_LE(std::abs(S.xx - 2.0), eps0 + 1e-14);
}

TEST(Hamiltonian, ActionIndependentIntegrand) {
  const ControlProblem cp = expr_problem("x1^2", "-x1", "1");
  const ActionQuadrature q = build_action_quadrature(1, 5);
  const Vec x{1.5, 0}, p{0.3, 0};
  const Sym X{2.0, 0, 0};
  EXPECT_NEAR(hamiltonian_F(cp, q, x, p, X), 2.25 - 1.5 * 0.3 + 0.5 * 2.0, 1e-14);
}

TEST(Hamiltonian, LargeLambdaApproachesMean) {
  const ControlProblem cp = expr_problem("sin(5*u1) + u1^2", "u1", "1", 1e3);
  const ActionQuadrature q = build_action_quadrature(1, 8);
  const auto f = hamiltonian_integrand(cp, q, {0.2, 0}, {0.4, 0}, Sym{1.0, 0, 0}, true);
  double mean = 0.0, lo = f[0], hi = f[0];
  for (std::size_t j = 0; j < f.size(); ++j) {
    mean += q.weights[j] * f[j];
    lo = std::min(lo, f[j]);
    hi = std::max(hi, f[j]);
  }
  const double F = hamiltonian_F(cp, q, {0.2, 0}, {0.4, 0}, Sym{1.0, 0, 0});
  EXPECT_GE(F, mean);
  EXPECT_LE(F - mean, 1e-2 * (hi - lo));
}

TEST(FPi, UniformDensityIsMean) {
  const ControlProblem cp = expr_problem("u1^3 - x1", "u1", "1");
  const ActionQuadrature q = build_action_quadrature(1, 6);
  const std::vector<double> uni(q.size(), 1.0);
  const auto f = hamiltonian_integrand(cp, q, {0.5, 0}, {1.0, 0}, Sym{0.3, 0, 0}, true);
  double mean = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) mean += q.weights[j] * f[j];
  EXPECT_NEAR(F_pi(cp, q, {0.5, 0}, {1.0, 0}, Sym{0.3, 0, 0}, uni), mean, 1e-14);
}

TEST(FPi, GibbsAttainsF) {
  const ControlProblem cp = expr_problem("u1*sin(x1)", "u1 - 0.5", "1");
  const ActionQuadrature q = build_action_quadrature(1, 8);
  const Vec x{0.9, 0}, p{2.0, 0};
  const Sym X{-1.0, 0, 0};
  const auto g = gibbs_policy(cp, q, x, p, X);
  const double F = hamiltonian_F(cp, q, x, p, X);
  EXPECT_NEAR(F_pi(cp, q, x, p, X, g), F, 1e-12 * std::max(1.0, std::abs(F)));
  EXPECT_THROW(F_pi(cp, q, x, p, X, std::vector<double>(q.size(), 0.0)), InvalidArgument);
}
