#pragma once

// Independent reference implementations used to cross-check the fast paths.
// Nothing here calls the radix-2 transform, the closed-form propagators, or
// the mode algebra: transforms are direct O(N^2) sums and time evolution is
// a plain per-wavenumber RK4 over the transformed equation
//
//   sum_n A_n(k) d^n S / dt^n = F(k, t),  A_n(k) = sum_m c_{m,n} (ik)^m.

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dmodes/common.hpp"
#include "dmodes/grid.hpp"
#include "dmodes/operator.hpp"
#include "dmodes/parallel.hpp"

namespace dmodes {

struct OracleReport {
  std::string method;
  std::vector<std::pair<std::string, double>> params;
  double err_l2 = 0.0;
  double err_linf = 0.0;
  double conv_order = 0.0;  // log2(err_h / err_{h/2}); 0 when not measured
};

inline double order_estimate(double err_h, double err_h2) {
  if (!(err_h > 0.0) || !(err_h2 > 0.0)) return 0.0;
  return std::log2(err_h / err_h2);
}

inline SpectralField dft_direct(const SpatialField& u) {
  const std::size_t n = u.grid.n();
  SpectralField S = make_spectral(u.grid, u.time);
  const double scale = u.grid.dx() / std::sqrt(2.0 * kPi);
  for (std::size_t j = 0; j < n; ++j) {
    const double k = u.grid.k(j);
    Complex acc(0.0, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
      acc += u.values[m] * std::polar(1.0, -k * u.grid.x(m));
    }
    S.values[j] = scale * acc;
  }
  return S;
}

inline SpatialField idft_direct(const SpectralField& S) {
  const std::size_t n = S.grid.n();
  SpatialField u = make_spatial(S.grid, S.time);
  const double scale = S.grid.dk() / std::sqrt(2.0 * kPi);
  for (std::size_t m = 0; m < n; ++m) {
    const double x = S.grid.x(m);
    Complex acc(0.0, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      acc += S.values[j] * std::polar(1.0, S.grid.k(j) * x);
    }
    u.values[m] = scale * acc;
  }
  return u;
}

// Classic fixed-step RK4 for one wavenumber. y = (S, dS/dt, ...,
// d^{M-1}S/dt^{M-1}); forcing may be empty for the homogeneous equation.
// Returns the dense trajectory, steps+1 states including both endpoints.
inline std::vector<std::vector<Complex>> rk4_reference(
    const LinearOperator& op, std::vector<Complex> y0,
    const std::function<Complex(double)>& forcing, double k, double t0,
    double t1, int steps) {
  const int order = op.nt;
  if (static_cast<int>(y0.size()) != order) {
    throw ValidationError("initial jet must have exactly N_t components");
  }
  if (steps < 1) throw ValidationError("rk4_reference needs steps >= 1");

  std::vector<Complex> A(order + 1);
  for (int n = 0; n <= order; ++n) A[n] = op.time_symbol(n, k);
  if (std::abs(A[order]) == 0.0) {
    throw ValidationError(
        "leading time coefficient vanishes at k = " + std::to_string(k));
  }

  auto deriv = [&](double t, const std::vector<Complex>& y,
                   std::vector<Complex>& dy) {
    for (int q = 0; q + 1 < order; ++q) dy[q] = y[q + 1];
    Complex acc = forcing ? forcing(t) : Complex(0.0, 0.0);
    for (int n = 0; n < order; ++n) acc -= A[n] * y[n];
    dy[order - 1] = acc / A[order];
  };

  const double h = (t1 - t0) / steps;
  std::vector<std::vector<Complex>> traj;
  traj.reserve(steps + 1);
  traj.push_back(y0);
  std::vector<Complex> k1(order), k2(order), k3(order), k4(order), tmp(order);
  std::vector<Complex> y = std::move(y0);
  for (int s = 0; s < steps; ++s) {
    const double t = t0 + s * h;
    deriv(t, y, k1);
    for (int q = 0; q < order; ++q) tmp[q] = y[q] + 0.5 * h * k1[q];
    deriv(t + 0.5 * h, tmp, k2);
    for (int q = 0; q < order; ++q) tmp[q] = y[q] + 0.5 * h * k2[q];
    deriv(t + 0.5 * h, tmp, k3);
    for (int q = 0; q < order; ++q) tmp[q] = y[q] + h * k3[q];
    deriv(t + h, tmp, k4);
    for (int q = 0; q < order; ++q) {
      y[q] += (h / 6.0) * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
    }
    for (int q = 0; q < order; ++q) {
      if (!std::isfinite(y[q].real()) || !std::isfinite(y[q].imag())) {
        throw NumericalError("reference integration overflowed at k = " +
                             std::to_string(k) + ", t = " +
                             std::to_string(t + h));
      }
    }
    traj.push_back(y);
  }
  return traj;
}

namespace detail {

inline Complex simpson_recurse(const std::function<Complex(double)>& f,
                               double a, double b, Complex fa, Complex fm,
                               Complex fb, Complex whole, double tol,
                               double noise_floor, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const Complex flm = f(lm);
  const Complex frm = f(rm);
  const Complex left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const Complex right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const Complex delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * std::max(tol, noise_floor)) {
    return left + right + delta / 15.0;
  }
  if (depth <= 0) {
    throw NumericalError("adaptive quadrature failed to converge on [" +
                         std::to_string(a) + ", " + std::to_string(b) + "]");
  }
  return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, noise_floor,
                         depth - 1) +
         simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, noise_floor,
                         depth - 1);
}

}  // namespace detail

// Adaptive Simpson quadrature of a complex-valued integrand. The per-interval
// acceptance threshold halves with each subdivision but never drops below
// noise_floor; a positive floor keeps integrands that are themselves computed
// numerically (and so carry a fixed absolute noise) from subdividing forever
// in cancellation regions. The default floor of zero refines to tol exactly.
inline Complex quad_adaptive(const std::function<Complex(double)>& f, double a,
                             double b, double tol = 1e-10,
                             int max_depth = 30, double noise_floor = 0.0) {
  if (a == b) return Complex(0.0, 0.0);
  double sgn = 1.0;
  if (b < a) {
    std::swap(a, b);
    sgn = -1.0;
  }
  const double m = 0.5 * (a + b);
  const Complex fa = f(a);
  const Complex fm = f(m);
  const Complex fb = f(b);
  const Complex whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return sgn * detail::simpson_recurse(f, a, b, fa, fm, fb, whole, tol,
                                       noise_floor, max_depth);
}

// Iterated adaptive quadrature over the region t in [t0, t1],
// x in [xlo(t), xhi(t)].
inline Complex quad2d_adaptive(const std::function<Complex(double, double)>& f,
                               double t0, double t1,
                               const std::function<double(double)>& xlo,
                               const std::function<double(double)>& xhi,
                               double tol = 1e-10, int max_depth = 30) {
  auto outer = [&](double t) {
    auto inner = [&](double x) { return f(x, t); };
    return quad_adaptive(inner, xlo(t), xhi(t), 0.05 * tol, max_depth);
  };
  // Floor the outer refinement above the inner quadrature's noise level.
  return quad_adaptive(outer, t0, t1, tol, max_depth, 0.25 * tol);
}

struct OracleEvolveOptions {
  double phase_step = 0.05 / 16.0;  // max |omega| h per step
  int min_steps = 64;
  int uniform_steps = 0;  // > 0 forces the same step count on every bin
};

// Whole-grid reference evolution: per-bin RK4 on the transformed equation,
// returning every time-derivative row at t_end so callers can chain runs
// across forcing discontinuities. Step counts scale with a Cauchy root
// bound per bin so phase error stays far below the comparison tolerances.
// forcing, when non-null, is F(t, bin) in the transformed domain.
inline std::vector<std::vector<Complex>> oracle_evolve_rows(
    const LinearOperator& op, const GridSpec& grid,
    const std::vector<std::vector<Complex>>& initial_rows, double t0,
    const std::function<Complex(double, std::size_t)>& forcing, double t_end,
    const OracleEvolveOptions& opt = {}) {
  const std::size_t n = grid.n();
  const int order = op.nt;
  if (static_cast<int>(initial_rows.size()) != order) {
    throw ValidationError("oracle_evolve needs N_t initial derivative rows");
  }
  std::vector<std::vector<Complex>> out(
      static_cast<std::size_t>(order), std::vector<Complex>(n));
  std::vector<std::string> failures(n);
  parallel_for(n, [&](std::size_t j) {
    const double k = grid.k(j);
    double bound = 0.0;
    const Complex lead = op.time_symbol(order, k);
    for (int q = 0; q < order; ++q) {
      bound = std::max(bound, std::abs(op.time_symbol(q, k) / lead));
    }
    bound += 1.0;
    int steps = opt.uniform_steps;
    if (steps <= 0) {
      steps = std::max<int>(
          opt.min_steps,
          static_cast<int>(std::ceil(std::abs(t_end - t0) * bound /
                                     opt.phase_step)));
    }
    std::vector<Complex> y0(order);
    for (int q = 0; q < order; ++q) y0[q] = initial_rows[q][j];
    std::function<Complex(double)> fk;
    if (forcing) fk = [&forcing, j](double t) { return forcing(t, j); };
    try {
      auto traj = rk4_reference(op, std::move(y0), fk, k, t0, t_end, steps);
      for (int q = 0; q < order; ++q) {
        out[static_cast<std::size_t>(q)][j] = traj.back()[q];
      }
    } catch (const std::exception& e) {
      failures[j] = e.what();
    }
  });
  for (std::size_t j = 0; j < n; ++j) {
    if (!failures[j].empty()) throw NumericalError(failures[j]);
  }
  return out;
}

// Spatial wave produced by the reference evolution (leading row only).
inline SpatialField oracle_evolve(
    const LinearOperator& op, const GridSpec& grid,
    const std::vector<std::vector<Complex>>& initial_rows, double t0,
    const std::function<Complex(double, std::size_t)>& forcing, double t_end,
    const OracleEvolveOptions& opt = {}) {
  SpectralField S = make_spectral(grid, t_end);
  S.values =
      oracle_evolve_rows(op, grid, initial_rows, t0, forcing, t_end, opt)
          .front();
  return idft_direct(S);
}

}  // namespace dmodes
