#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dmodes/expr.hpp"

using dmodes::Complex;
using dmodes::Expr;
using dmodes::ValidationError;

namespace {

double re(Complex z) { return z.real(); }
double im(Complex z) { return z.imag(); }

}  // namespace

TEST_CASE("literals and arithmetic", "[expr]") {
  CHECK(re(Expr::compile("2 + 3*4")(0, 0)) == 14.0);
  CHECK(re(Expr::compile("(2 + 3)*4")(0, 0)) == 20.0);
  CHECK(re(Expr::compile("7/2")(0, 0)) == 3.5);
  CHECK(re(Expr::compile("-3^2")(0, 0)) == -9.0);
  CHECK(re(Expr::compile("2^-2")(0, 0)) == 0.25);
  CHECK(re(Expr::compile("2^3^2")(0, 0)) == 512.0);  // right associative
  CHECK(re(Expr::compile("1.5e2")(0, 0)) == 150.0);
}

TEST_CASE("variables and constants", "[expr]") {
  Expr e = Expr::compile("x*t + pi");
  CHECK(re(e(2.0, 3.0)) == Catch::Approx(6.0 + dmodes::kPi));
  CHECK(e.depends_on_x());
  CHECK(e.depends_on_t());

  Expr c = Expr::compile("i*i");
  CHECK(re(c(0, 0)) == -1.0);
  CHECK(im(c(0, 0)) == 0.0);
  CHECK_FALSE(c.depends_on_x());
}

TEST_CASE("negative base with integer power stays real", "[expr]") {
  Expr e = Expr::compile("x^2");
  CHECK(re(e(-3.0, 0)) == 9.0);
  CHECK(im(e(-3.0, 0)) == 0.0);
}

TEST_CASE("builtin functions", "[expr]") {
  CHECK(re(Expr::compile("sin(pi/2)")(0, 0)) == Catch::Approx(1.0));
  CHECK(re(Expr::compile("cos(0)")(0, 0)) == 1.0);
  CHECK(re(Expr::compile("exp(1)")(0, 0)) == Catch::Approx(std::exp(1.0)));
  CHECK(re(Expr::compile("sqrt(2)")(0, 0)) == Catch::Approx(std::sqrt(2.0)));
  CHECK(re(Expr::compile("erf(0.5)")(0, 0)) == Catch::Approx(std::erf(0.5)));

  Complex z = Expr::compile("exp(i*pi)")(0, 0);
  CHECK(re(z) == Catch::Approx(-1.0));
  CHECK(std::abs(im(z)) < 1e-15);
}

TEST_CASE("gauss shorthand matches its exp form", "[expr]") {
  Expr g = Expr::compile("gauss(x, 0.5, 2)");
  Expr e = Expr::compile("exp(-(x - 0.5)^2/(2*2^2))");
  for (double x : {-3.0, -0.2, 0.5, 1.7, 4.0}) {
    CHECK(re(g(x, 0)) == Catch::Approx(re(e(x, 0))).epsilon(1e-15));
  }
}

TEST_CASE("parameters are substituted at compile time", "[expr]") {
  std::map<std::string, Complex> params{{"c", Complex(2.0, 0.0)},
                                        {"a", Complex(0.0, 1.0)}};
  Expr e = Expr::compile("c*x + a", params);
  CHECK(re(e(3.0, 0)) == 6.0);
  CHECK(im(e(3.0, 0)) == 1.0);
}

TEST_CASE("unbound parameter reports its location", "[expr]") {
  std::map<std::string, Complex> params{{"c", Complex(2.0, 0.0)}};
  try {
    Expr::compile("gauss(x, 0, w)", params);
    FAIL("expected ValidationError");
  } catch (const ValidationError& err) {
    std::string msg = err.what();
    CHECK(msg.find("unbound parameter 'w'") != std::string::npos);
    CHECK(msg.find("line 1") != std::string::npos);
    CHECK(msg.find("column 13") != std::string::npos);
  }
}

TEST_CASE("syntax errors carry line and column", "[expr]") {
  try {
    Expr::compile("1 +\n* 2");
    FAIL("expected ValidationError");
  } catch (const ValidationError& err) {
    std::string msg = err.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("column 1") != std::string::npos);
  }
  CHECK_THROWS_AS(Expr::compile("sin(x"), ValidationError);
  CHECK_THROWS_AS(Expr::compile("2 = 2"), ValidationError);
  CHECK_THROWS_AS(Expr::compile("foo(1)"), ValidationError);
  CHECK_THROWS_AS(Expr::compile("sin(1, 2)"), ValidationError);
}

TEST_CASE("erf rejects complex arguments", "[expr]") {
  Expr e = Expr::compile("erf(i*x)");
  CHECK_THROWS_AS(e(1.0, 0.0), dmodes::NumericalError);
  CHECK(re(e(0.0, 0.0)) == 0.0);
}

TEST_CASE("constant zero detection", "[expr]") {
  CHECK(Expr::compile("0").is_constant_zero());
  CHECK(Expr::compile("0.0*2").is_constant_zero());
  CHECK_FALSE(Expr::compile("x").is_constant_zero());
}
