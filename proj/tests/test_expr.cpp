#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fracture/errors.hpp"
#include "fracture/expr.hpp"

using namespace fracture;

TEST_CASE("arithmetic and precedence") {
  CHECK(Expr::parse("1 + 2 * 3").eval(0, 0, 0) == 7);
  CHECK(Expr::parse("(1 + 2) * 3").eval(0, 0, 0) == 9);
  CHECK(Expr::parse("2 ^ 3 ^ 2").eval(0, 0, 0) == 512);  // right associative
  CHECK(Expr::parse("-2 ^ 2").eval(0, 0, 0) == -4);
  CHECK(Expr::parse("1/16").eval(0, 0, 0) == 0.0625);
  CHECK(Expr::parse("1e-3 * 2").eval(0, 0, 0) == doctest::Approx(2e-3));
}

TEST_CASE("variables and functions") {
  Expr e = Expr::parse("t*x + sin(pi*y) - sqrt(abs(x))");
  double t = 0.7, x = -0.3, y = 0.25;
  CHECK(e.eval(t, x, y) == doctest::Approx(t * x + std::sin(M_PI * y) - std::sqrt(std::fabs(x))).epsilon(1e-15));
  CHECK(Expr::parse("exp(log(3))").eval(0, 0, 0) == doctest::Approx(3).epsilon(1e-15));
  CHECK(Expr::parse("cos(0)").eval(0, 0, 0) == 1);
}

TEST_CASE("time derivative matches central differences") {
  const char* formulas[] = {"t*x", "t^2*y + 3", "sin(t)*x", "exp(2*t)", "x*y", "t^3/(1+t)", "sqrt(1+t*t)*cos(x*t)"};
  double h = 1e-5;
  for (const char* f : formulas) {
    Expr e = Expr::parse(f);
    Expr d = e.dt();
    for (double t : {0.3, 1.1}) {
      double x = 0.4, y = -0.2;
      double fd = (e.eval(t + h, x, y) - e.eval(t - h, x, y)) / (2 * h);
      CHECK_MESSAGE(d.eval(t, x, y) == doctest::Approx(fd).epsilon(1e-7), f);
    }
  }
}

TEST_CASE("constant and zero detection") {
  CHECK(Expr::parse("3*4").is_constant());
  CHECK_FALSE(Expr::parse("3*x").is_constant());
  CHECK(Expr::parse("0").is_zero());
  CHECK(Expr::parse("x").dt().is_zero());
  CHECK(Expr().is_zero());
  CHECK(Expr::constant(2.5).eval(1, 2, 3) == 2.5);
}

TEST_CASE("malformed formulas raise FormulaError") {
  for (const char* bad : {"", "1 +", "(x", "foo(x)", "x y", "2 ** 3", "z"}) CHECK_THROWS_AS(Expr::parse(bad), FormulaError);
}

TEST_CASE("vector formulas") {
  VectorFormula g = VectorFormula::parse("t*x", "0");
  Vec2 v = g.eval(2, {0.5, 1});
  CHECK(v.x == 1);
  CHECK(v.y == 0);
  CHECK(g.dt().eval(5, {0.5, 1}).x == 0.5);
  CHECK(VectorFormula{}.is_zero());
}
