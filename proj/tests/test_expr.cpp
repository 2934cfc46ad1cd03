#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "entpia/expr.hpp"
#include "entpia/quadrature.hpp"

using namespace entpia;

TEST(Expression, EvaluatesReward) {
  const Expression e("sin(x1)*u1 + 0.5", {"x1", "u1"});
  const double v[] = {0.0, 1.0};
  EXPECT_DOUBLE_EQ(e(v), 0.5);
}

TEST(Expression, Polynomial) {
  const Expression e("1 + x1^2", {"x1"});
  const double v[] = {2.0};
  EXPECT_DOUBLE_EQ(e(v), 5.0);
}

TEST(Expression, NormalizedExponentialIntegratesToOne) {
  const Expression e("exp(u1)/ (exp(1)-1)", {"u1"});
  const ActionQuadrature q = build_action_quadrature(1, 8);
  double s = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double u[] = {q.nodes[j][0]};
    s += q.weights[j] * e(u);
  }
  EXPECT_NEAR(s, 1.0, 1e-13);
}

TEST(Expression, PrecedenceAndUnaryMinus) {
  const Expression e("-x1^2 + 2*3 - 4/2", {"x1"});
  const double v[] = {3.0};
  EXPECT_DOUBLE_EQ(e(v), -9.0 + 6.0 - 2.0);
}

TEST(Expression, ReportsUsedVariables) {
  const Expression e("x1 + 2", {"x1", "u1"});
  EXPECT_TRUE(e.uses(0));
  EXPECT_FALSE(e.uses(1));
}

TEST(Expression, ParseErrorCarriesPosition) {
  try {
    Expression("1 + * 2", {"x1"});
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 4u);
  }
  EXPECT_THROW(Expression("y + 1", {"x1"}), ParseError);
  EXPECT_THROW(Expression("sin(x1", {"x1"}), ParseError);
}

TEST(Expression, DomainErrorsThrowEvalError) {
  const Expression e("ln(x1)", {"x1"});
  const double v[] = {-1.0};
  EXPECT_THROW(e(v), EvalError);
  const Expression d("1/x1", {"x1"});
  const double z[] = {0.0};
  EXPECT_THROW(d(z), EvalError);
}
