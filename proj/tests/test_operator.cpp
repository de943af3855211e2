#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dmodes/operator.hpp"

using dmodes::Complex;
using dmodes::LinearOperator;
using dmodes::parse_operator;
using dmodes::render_operator;
using dmodes::ValidationError;

namespace {

std::map<std::string, Complex> params_c2() {
  return {{"c", Complex(2.0, 0.0)}};
}

}  // namespace

TEST_CASE("wave equation coefficients", "[operator]") {
  LinearOperator op = parse_operator("u_xx - (1/c^2)*u_tt = 0", params_c2());
  REQUIRE(op.coeff.size() == 2);
  CHECK(op.coeff.at({2, 0}) == Complex(1.0, 0.0));
  CHECK(op.coeff.at({0, 2}) == Complex(-0.25, 0.0));
  CHECK(op.nt == 2);
  CHECK(op.nx == 2);
  CHECK(op.real_coefficients());
}

TEST_CASE("normalization moves the right-hand side across", "[operator]") {
  // "A = B" stores A - B, so u_t lands with coefficient +1 here.
  std::map<std::string, Complex> params{{"g", Complex(0.5, 0.0)}};
  LinearOperator op = parse_operator("u_t = i*g*u_xx", params);
  REQUIRE(op.coeff.size() == 2);
  CHECK(op.coeff.at({0, 1}) == Complex(1.0, 0.0));
  CHECK(op.coeff.at({2, 0}) == Complex(0.0, -0.5));
  CHECK(op.nt == 1);
  CHECK_FALSE(op.real_coefficients());
}

TEST_CASE("A = B and A - B = 0 yield identical coefficient maps",
          "[operator]") {
  auto params = params_c2();
  LinearOperator a = parse_operator("u_xx = (1/c^2)*u_tt", params);
  LinearOperator b = parse_operator("u_xx - (1/c^2)*u_tt = 0", params);
  CHECK(a == b);
}

TEST_CASE("cancelled terms are not stored", "[operator]") {
  LinearOperator op = parse_operator("u_xx - u_xx + u_t = 0");
  CHECK(op.coeff.size() == 1);
  CHECK(op.coeff.count({2, 0}) == 0);
  CHECK(op.nt == 1);
  CHECK(op.nx == 0);
}

TEST_CASE("operators with no time derivative are rejected", "[operator]") {
  CHECK_THROWS_AS(parse_operator("u = 0"), ValidationError);
  CHECK_THROWS_AS(parse_operator("u_xx = 0"), ValidationError);
  CHECK_THROWS_AS(parse_operator("u_t - u_t = 0"), ValidationError);
}

TEST_CASE("nonlinear and malformed equations are rejected", "[operator]") {
  CHECK_THROWS_AS(parse_operator("u*u_t = 0"), ValidationError);
  CHECK_THROWS_AS(parse_operator("u_t^2 = 0"), ValidationError);
  CHECK_THROWS_AS(parse_operator("sin(u_t) = 0"), ValidationError);
  CHECK_THROWS_AS(parse_operator("1/u_t = 0"), ValidationError);
  CHECK_THROWS_AS(parse_operator("u_t + 1 = 0"), ValidationError);
  CHECK_THROWS_AS(parse_operator("u_t"), ValidationError);
  CHECK_THROWS_AS(parse_operator("u_t = a*u_x"), ValidationError);
  CHECK_THROWS_AS(parse_operator("x*u_t = 0"), ValidationError);
  CHECK_THROWS_AS(parse_operator("u_xy + u_t = 0"), ValidationError);
}

TEST_CASE("constant coefficient expressions are evaluated", "[operator]") {
  LinearOperator op = parse_operator("sqrt(4)*u_t + (2 + 3*i)*u_x = 0");
  CHECK(op.coeff.at({0, 1}) == Complex(2.0, 0.0));
  CHECK(op.coeff.at({1, 0}) == Complex(2.0, 3.0));
}

TEST_CASE("mixed derivative symbols accumulate orders", "[operator]") {
  LinearOperator op = parse_operator("u_xxtt + u_t = 0");
  CHECK(op.coeff.at({2, 2}) == Complex(1.0, 0.0));
  CHECK(op.nx == 2);
  CHECK(op.nt == 2);
}

TEST_CASE("time symbol A_n(k)", "[operator]") {
  auto params = params_c2();
  LinearOperator op = parse_operator("u_xx - (1/c^2)*u_tt = 0", params);
  // A_0(k) = (ik)^2 = -k^2, A_2(k) = -1/4
  CHECK(op.time_symbol(0, 3.0) == Complex(-9.0, 0.0));
  CHECK(op.time_symbol(2, 3.0) == Complex(-0.25, 0.0));
  CHECK(op.time_symbol(1, 3.0) == Complex(0.0, 0.0));
}

TEST_CASE("render round trips exactly", "[operator]") {
  auto check_round_trip = [](const LinearOperator& op) {
    LinearOperator back = parse_operator(render_operator(op));
    CHECK(back == op);
    CHECK(back.nt == op.nt);
    CHECK(back.nx == op.nx);
  };

  check_round_trip(parse_operator("u_xx - (1/c^2)*u_tt = 0", params_c2()));
  check_round_trip(parse_operator("u_t = i*0.5*u_xx"));
  check_round_trip(parse_operator("u_t + u_x + 0.1*u_xxx = 0"));

  std::mt19937_64 rng(20240817);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  std::uniform_int_distribution<int> order(0, 4);
  for (int trial = 0; trial < 50; ++trial) {
    LinearOperator op;
    op.coeff[{order(rng), 1 + order(rng) % 3}] =
        Complex(coef(rng), coef(rng));
    op.coeff[{order(rng), 0}] = Complex(coef(rng), 0.0);
    op.coeff[{0, 1}] = Complex(coef(rng), coef(rng));
    for (const auto& [key, c] : op.coeff) {
      (void)c;
      op.nx = std::max(op.nx, key.first);
      op.nt = std::max(op.nt, key.second);
    }
    check_round_trip(op);
  }
}
