#include <gtest/gtest.h>

#include <cmath>

#include "entpia/problem.hpp"

using namespace entpia;

TEST(Problem, BoundedTrigCoefficients) {
  const ControlProblem cp = builtin_problem("bounded-trig", {{"d", 1}, {"L", 1}, {"lambda", 1.0}, {"rho", 10.0}});
  const Vec x{0.7, 0.0}, u{0.3, 0.0};
  EXPECT_DOUBLE_EQ(cp.reward(x, u), std::sin(0.7) * 0.3);
  EXPECT_DOUBLE_EQ(cp.drift(x, u)[0], std::cos(0.7) + 0.15);
  EXPECT_DOUBLE_EQ(cp.vol(x, u).a[0][0], std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(cp.ellipticity, 0.5);
  EXPECT_FALSE(cp.vol_action_dependent);
}

TEST(Problem, SmallDiffusionWithZeroPerturbation) {
  const ControlProblem cp = builtin_problem("small-diffusion", {{"eps0", 0.0}});
  for (double u : {0.0, 0.5, 1.0}) EXPECT_DOUBLE_EQ(cp.covariance({0.3, 0}, {u, 0}).xx, 2.0);
  const auto rep = validate_problem(cp, 0.5, 1000);
  ASSERT_TRUE(rep.smallness.has_value());
  EXPECT_NEAR(rep.smallness->eps0, 0.0, 1e-14);
}

TEST(Problem, SmallDiffusionRecoversEps0) {
  const ControlProblem cp = builtin_problem("small-diffusion", {{"eps0", 0.05}});
  const auto rep = validate_problem(cp, 0.5, 1000);
  ASSERT_TRUE(rep.smallness.has_value());
  EXPECT_NEAR(rep.smallness->eps0, 0.05, 1e-6);
}

TEST(Problem, LinearGrowthBelowThresholdFlagsC4) {
  const ControlProblem cp = builtin_problem("linear-growth", {{"N", 2}, {"A1", 1}, {"A2", 1}, {"A3", 1}, {"rho", 24}});
  EXPECT_DOUBLE_EQ(cp.discount_threshold(), 36.0);
  const auto rep = validate_problem(cp, 0.5, 1000);
  EXPECT_EQ(rep.at("c.4").status, CheckStatus::violated);
}

TEST(Problem, LinearGrowthAtThresholdSatisfiesC4) {
  const ControlProblem cp = builtin_problem("linear-growth", {{"N", 2}, {"A2", 1}, {"A3", 1}, {"rho", 36}});
  const auto rep = validate_problem(cp, 0.5, 1000);
  EXPECT_EQ(rep.at("c.4").status, CheckStatus::satisfied);
}

TEST(Problem, BoundedTrigSatisfiesStructuralConditions) {
  const ControlProblem cp = builtin_problem("bounded-trig", {{"rho", 10.0}});
  const auto rep = validate_problem(cp, 0.5, 2000);
  for (const char* c : {"cond1", "cond2", "cond3", "c.3"}) EXPECT_EQ(rep.at(c).status, CheckStatus::satisfied) << c;
  EXPECT_EQ(rep.at("c.4").status, CheckStatus::not_applicable);
}

TEST(Problem, DegenerateDiffusionViolatesCond1) {
  const ControlProblem cp = problem_from_json(
      {{"expressions", {{"r", "sin(x1)"}, {"b", {"0"}}, {"sigma", {{"0"}}}}}, {"ellipticity", 1.0}, {"rho", 5.0}});
  const auto rep = validate_problem(cp, 0.5, 1000);
  EXPECT_EQ(rep.at("cond1").status, CheckStatus::violated);
  EXPECT_TRUE(rep.at("cond1").witness_x.has_value());
}

TEST(Problem, ExpressionProblemEvaluates) {
  const ControlProblem cp = problem_from_json(
      {{"expressions", {{"r", "x1^2 + u1"}, {"b", {"-x1"}}, {"sigma", {{"1"}}}}}, {"rho", 2.0}});
  EXPECT_DOUBLE_EQ(cp.reward({2.0, 0}, {0.5, 0}), 4.5);
  EXPECT_DOUBLE_EQ(cp.drift({2.0, 0}, {0.5, 0})[0], -2.0);
  EXPECT_FALSE(cp.vol_action_dependent);
}

TEST(Problem, RejectsBadInput) {
  EXPECT_THROW(builtin_problem("nope", json::object()), InvalidArgument);
  EXPECT_THROW(builtin_problem("bounded-trig", {{"rho", -1.0}}), InvalidArgument);
  EXPECT_THROW(builtin_problem("bounded-trig", {{"d", 3}}), InvalidArgument);
  EXPECT_THROW(problem_from_json({{"expressions", {{"r", "x1"}}}}), InvalidArgument);
  EXPECT_THROW(validate_problem(builtin_problem("bounded-trig", json::object()), 0.5, 10), InvalidArgument);
}

TEST(Problem, BarrierValue) {
  const ControlProblem cp = builtin_problem("linear-growth", {{"N", 2}, {"A1", 1}, {"rho", 10}});
  EXPECT_DOUBLE_EQ(cp.barrier({2.0, 0.0}), 1.0);
}
