#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dmodes/oracle.hpp"

using dmodes::Complex;
using dmodes::GridSpec;
using dmodes::quad_adaptive;
using dmodes::rk4_reference;

TEST_CASE("direct transform of a gaussian pair", "[oracle]") {
  GridSpec g(128, 40.0);
  dmodes::SpatialField u = dmodes::make_spatial(g);
  for (std::size_t m = 0; m < g.n(); ++m) {
    const double x = g.x(m);
    u.values[m] = std::exp(-0.5 * x * x);
  }
  dmodes::SpectralField S = dmodes::dft_direct(u);
  double worst = 0.0;
  for (std::size_t j = 0; j < g.n(); ++j) {
    const double k = g.k(j);
    worst = std::max(worst, std::abs(S.values[j] - std::exp(-0.5 * k * k)));
  }
  CHECK(worst <= 1e-10);

  dmodes::SpatialField back = dmodes::idft_direct(S);
  CHECK(dmodes::linf_diff(u.values, back.values) <= 1e-12);
}

TEST_CASE("rk4 reproduces a single oscillator phase", "[oracle]") {
  // u_t = i g u_xx transforms to dS/dt = -i omega S with omega = g k^2.
  dmodes::LinearOperator op =
      dmodes::parse_operator("u_t = i*g*u_xx", {{"g", Complex(0.5, 0.0)}});
  const double k = 2.0;
  const double omega = 0.5 * k * k;
  auto traj = rk4_reference(op, {Complex(1.0, 0.0)}, nullptr, k, 0.0, 1.0, 400);
  REQUIRE(traj.size() == 401);
  const Complex expected = std::polar(1.0, -omega * 1.0);
  CHECK(std::abs(traj.back()[0] - expected) <= 1e-10);
}

TEST_CASE("rk4 second-order oscillator with constant forcing", "[oracle]") {
  // Wave operator at one bin: -k^2 S - (1/c^2) S'' = F0, S(0) = S'(0) = 0.
  // With omega = c k the solution is S(t) = (F0 c^2/omega^2)(cos(omega t) - 1).
  dmodes::LinearOperator op = dmodes::parse_operator(
      "u_xx - (1/c^2)*u_tt = 0", {{"c", Complex(2.0, 0.0)}});
  const double c = 2.0;
  const double k = 1.5;
  const double omega = c * k;
  const Complex F0(0.7, -0.2);
  auto forcing = [&](double) { return F0; };
  auto traj = rk4_reference(op, {Complex(0, 0), Complex(0, 0)}, forcing, k,
                            -1.0, 0.0, 2000);
  const Complex expected =
      F0 * c * c / (omega * omega) * (std::cos(omega * 1.0) - 1.0);
  CHECK(std::abs(traj.back()[0] - expected) <= 1e-10);
}

TEST_CASE("rk4 self-convergence is fourth order", "[oracle]") {
  dmodes::LinearOperator op = dmodes::parse_operator(
      "u_tt - c^2*u_xx - b^2*u_xxtt = 0",
      {{"c", Complex(1.0, 0.0)}, {"b", Complex(1.0, 0.0)}});
  const double k = 3.0;
  const std::vector<Complex> y0{Complex(1.0, 0.2), Complex(0.1, -0.4)};
  auto run = [&](int steps) {
    return rk4_reference(op, y0, nullptr, k, 0.0, 5.0, steps).back()[0];
  };
  const Complex fine = run(4096);
  const double e1 = std::abs(run(32) - fine);
  const double e2 = std::abs(run(64) - fine);
  const double order = dmodes::order_estimate(e1, e2);
  CHECK(order == Catch::Approx(4.0).margin(0.5));
}

TEST_CASE("rk4 rejects bad inputs", "[oracle]") {
  dmodes::LinearOperator op = dmodes::parse_operator("u_t = i*u_xx");
  CHECK_THROWS_AS(
      rk4_reference(op, {Complex(1, 0), Complex(0, 0)}, nullptr, 1.0, 0, 1, 8),
      dmodes::ValidationError);
  CHECK_THROWS_AS(rk4_reference(op, {Complex(1, 0)}, nullptr, 1.0, 0, 1, 0),
                  dmodes::ValidationError);
}

TEST_CASE("adaptive quadrature on known integrals", "[oracle]") {
  auto sinf = [](double x) { return Complex(std::sin(x), 0.0); };
  CHECK(std::abs(quad_adaptive(sinf, 0.0, dmodes::kPi) - Complex(2.0, 0)) <=
        1e-10);

  auto lin = [](double x) { return Complex(x, 0.0); };
  CHECK(std::abs(quad_adaptive(lin, 0.0, 1.0) - Complex(0.5, 0)) <= 1e-12);
  CHECK(std::abs(quad_adaptive(lin, 1.0, 0.0) + Complex(0.5, 0)) <= 1e-12);
  CHECK(std::abs(quad_adaptive(lin, 2.0, 2.0)) == 0.0);

  auto gaussf = [](double x) { return Complex(std::exp(-x * x), 0.0); };
  CHECK(std::abs(quad_adaptive(gaussf, -8.0, 8.0) -
                 Complex(std::sqrt(dmodes::kPi), 0)) <= 1e-10);

  auto osc = [](double x) { return std::polar(1.0, 5.0 * x); };
  const Complex expected =
      (std::polar(1.0, 5.0) - Complex(1.0, 0.0)) / Complex(0.0, 5.0);
  CHECK(std::abs(quad_adaptive(osc, 0.0, 1.0) - expected) <= 1e-10);
}

TEST_CASE("2-D quadrature over a triangle", "[oracle]") {
  // Integral of 1 over the triangle 0 <= t <= 1, |x| <= t has area 1.
  auto one = [](double, double) { return Complex(1.0, 0.0); };
  auto xlo = [](double t) { return -t; };
  auto xhi = [](double t) { return t; };
  CHECK(std::abs(dmodes::quad2d_adaptive(one, 0.0, 1.0, xlo, xhi) -
                 Complex(1.0, 0)) <= 1e-9);

  // Separable smooth integrand.
  auto f = [](double x, double t) {
    return Complex(std::exp(-x * x) * std::cos(t), 0.0);
  };
  auto lo = [](double) { return -4.0; };
  auto hi = [](double) { return 4.0; };
  const double expected = std::erf(4.0) * std::sqrt(dmodes::kPi) *
                          std::sin(1.0);
  CHECK(std::abs(dmodes::quad2d_adaptive(f, 0.0, 1.0, lo, hi) -
                 Complex(expected, 0)) <= 1e-8);
}

TEST_CASE("quadrature failure raises a numerical error", "[oracle]") {
  // A needle the recursion cannot resolve within the depth budget.
  auto needle = [](double x) {
    return Complex(1.0 / (1e-300 + std::abs(x - 0.123456789)), 0.0);
  };
  CHECK_THROWS_AS(quad_adaptive(needle, 0.0, 1.0, 1e-12, 8),
                  dmodes::NumericalError);
}
