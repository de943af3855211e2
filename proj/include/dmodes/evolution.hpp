#pragma once

// Time evolution: mode propagation, the closed two-mode form that stays
// finite through branch collisions, forced per-bin integration across the
// source window, the Duhamel formula for source-induced mode changes, and
// the generalized d'Alembert evaluation in wavenumber and physical space.
//
// Conventions: every spectral amplitude evolves as S_l(k,t) ~ e^{-i w_l t}
// on its branch. The forced per-bin equation is sum_n A_n(k) d^n/dt^n S =
// f^(k,t) with A_n the operator's time symbol and f^ the plain transform of
// the source. The Duhamel kernel instead uses the normalized forcing
// F = -f^ / A_M, which puts a two-branch equation into the monic factored
// form (d/dt + i w1)(d/dt + i w2) S = -F.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmodes/common.hpp"
#include "dmodes/dispersion.hpp"
#include "dmodes/grid.hpp"
#include "dmodes/modes.hpp"
#include "dmodes/oracle.hpp"
#include "dmodes/parallel.hpp"
#include "dmodes/scenario.hpp"

namespace dmodes {

// Number of uniform forcing samples the d'Alembert path takes across the
// source window when the caller does not override it.
inline constexpr int kDuhamelDefaultSamples = 129;

// Largest |exponent| fed to a complex exponential before propagation is
// declared overflowed.
inline constexpr double kExpOverflowLimit = 700.0;

enum class Regime { Before, During, After };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Before: return "before";
    case Regime::During: return "during";
    case Regime::After: return "after";
  }
  return "unknown";
}

// One output time of a run: the wave, its spectrum, the regime it fell in,
// and the branch-mode decomposition.
struct Frame {
  double time = 0.0;
  Regime regime = Regime::After;
  SpatialField u;
  SpectralField S;
  std::optional<ModeSet> modes;
};

struct EvolutionResult {
  std::vector<Frame> frames;
};

// Output of the forced integration across the source window: the total jet
// at the switch-off time t = 0 and its source-induced part (total minus the
// source-free propagation of the pre-source jet).
struct ParticularJet {
  JetField phi;
  JetField sp;
};

namespace detail {

// sin(z)/z, switching to the Maclaurin series for small arguments so the
// k -> 0 and branch-collision limits stay fully accurate.
inline Complex csinc(const Complex& z) {
  if (std::abs(z) < 5e-7) {
    const Complex z2 = z * z;
    return 1.0 - z2 / 6.0 + z2 * z2 / 120.0;
  }
  return std::sin(z) / z;
}

struct TwoModeKernel {
  Complex A;  // coefficient of S(k, t0) in the combined form
  Complex B;  // coefficient of dS/dt(k, t0); also i*B is the Duhamel kernel
};

// Closed two-mode propagator over a span tau, written through the branch
// mean and gap so coincident branches are an interior point, not a pole:
//   A = e^{-i wbar tau} (cos z + i wbar tau sinc z),
//   B = tau e^{-i wbar tau} sinc z,            z = (w1 - w2) tau / 2.
inline TwoModeKernel two_mode_kernel(const Complex& w1, const Complex& w2,
                                     double tau, double k) {
  const Complex wbar = 0.5 * (w1 + w2);
  const Complex z = 0.5 * (w1 - w2) * tau;
  if (std::abs(wbar.imag()) * std::abs(tau) + std::abs(z.imag()) >
      kExpOverflowLimit) {
    throw NumericalError(
        "two-mode propagation overflows at k = " + std::to_string(k) +
        " over a span of " + std::to_string(tau));
  }
  const Complex phase = std::exp(Complex(0.0, -1.0) * wbar * tau);
  const Complex sc = csinc(z);
  TwoModeKernel out;
  out.B = tau * phase * sc;
  out.A = phase * (std::cos(z) + Complex(0.0, 1.0) * wbar * tau * sc);
  return out;
}

}  // namespace detail

// Advances every branch amplitude by e^{-i w_l dt}. Growth branches guard
// against overflow and name the offending branch and wavenumber.
inline ModeSet propagate_modes(const ModeSet& ms, double dt) {
  if (ms.table == nullptr || ms.size() != ms.table->branches()) {
    throw ValidationError("propagate_modes: mode set does not match its table");
  }
  const DispersionTable& t = *ms.table;
  ModeSet out{ms.table, ms.modes};
  for (int l = 0; l < out.size(); ++l) {
    out.modes[l].time += dt;
    for (std::size_t j = 0; j < t.k.size(); ++j) {
      const Complex w = t.omega[l][j];
      if (std::abs(w.imag()) * std::abs(dt) > kExpOverflowLimit) {
        throw NumericalError(
            "propagation overflows on branch " + std::to_string(l) +
            " at k = " + std::to_string(t.k[j]) + ": |Im omega| * |dt| = " +
            std::to_string(std::abs(w.imag()) * std::abs(dt)) + " > 700");
      }
      out.modes[l].values[j] *=
          std::exp(Complex(0.0, -1.0) * w * dt);
    }
  }
  return out;
}

// extract -> propagate -> re-assemble the jet at the new time.
inline JetField propagate_jet(const JetField& jet,
                              std::shared_ptr<const DispersionTable> table,
                              double dt) {
  return jet_of_modes(propagate_modes(extract_modes_M(jet, std::move(table)), dt));
}

// Free evolution of an initial jet to absolute time t: decompose into
// branch modes, advance each phase, and recombine. The single produced
// frame carries the mode set used.
inline EvolutionResult evolve_source_free(
    const JetField& jet, std::shared_ptr<const DispersionTable> table,
    double t) {
  ModeSet m0 = extract_modes_M(jet, std::move(table));
  const double t0 = m0.modes.front().time;
  ModeSet mt = propagate_modes(m0, t - t0);
  SpectralField S = recombine(mt);
  SpatialField u = inverse(S);
  EvolutionResult out;
  out.frames.push_back(Frame{t, t < t0 ? Regime::Before : Regime::After,
                             std::move(u), std::move(S), std::move(mt)});
  return out;
}

// Closed two-mode evolution of a (wave, d/dt wave) jet to absolute time t,
// finite at degenerate bins by construction.
inline SpectralField combined_two_mode(const JetField& jet,
                                       const DispersionTable& table,
                                       double t) {
  if (table.branches() != 2) {
    throw ValidationError("combined_two_mode: needs a two-branch table");
  }
  detail::require_jet_shape(jet, table, "combined_two_mode");
  const double tau = t - jet.derivs.front().time;
  SpectralField out = make_spectral(table.grid, t);
  for (std::size_t j = 0; j < out.values.size(); ++j) {
    const detail::TwoModeKernel kn = detail::two_mode_kernel(
        table.omega[0][j], table.omega[1][j], tau, table.k[j]);
    out.values[j] = kn.A * jet.derivs[0].values[j] +
                    kn.B * jet.derivs[1].values[j];
  }
  return out;
}

// True when the source is absent or identically zero, so the forced paths
// can short-circuit to exact zeros.
inline bool is_zero_source(const SourceSpec& src) {
  if (!src.active()) return true;
  if (src.kind == SourceSpec::Kind::Analytic) {
    return src.f.is_constant_zero();
  }
  for (const auto& slice : src.sample_slices) {
    for (const Complex& v : slice) {
      if (v != Complex(0.0, 0.0)) return false;
    }
  }
  return true;
}

namespace detail {

// Fixed-step RK4 of sum_n A_n(k) d^n/dt^n S = f^(k,t) for every bin from
// the jet's time to t_end. The step obeys max|omega| * h <= 0.05 and
// h <= span/64; forcing spectra are precomputed on the shared step and
// half-step times in blocks, so memory stays bounded on stiff problems.
inline JetField integrate_forced(const DispersionTable& table,
                                 const JetField& start,
                                 const SourceSpec& src, double t_end) {
  require_jet_shape(start, table, "forced integration");
  const GridSpec& grid = table.grid;
  const std::size_t n = grid.n();
  const int m = table.branches();
  if (table.op.nt != m) {
    throw ValidationError(
        "forced integration needs a table built from its operator");
  }
  const double t0 = start.derivs.front().time;
  const double span = t_end - t0;
  if (!(span > 0.0)) {
    throw ValidationError("forced integration needs t_end past the jet time");
  }

  double h = span / 64.0;
  if (table.max_abs_omega > 0.0) {
    h = std::min(h, 0.05 / table.max_abs_omega);
  }
  const long steps = std::max(1L, static_cast<long>(std::ceil(span / h)));
  const auto time_at = [&](long i) {
    return t0 + span * static_cast<double>(i) / static_cast<double>(steps);
  };
  const auto half_time_at = [&](long i) {
    return t0 +
           span * (static_cast<double>(i) + 0.5) / static_cast<double>(steps);
  };

  // Per-bin time symbols A_0..A_m.
  std::vector<Complex> symbols(n * static_cast<std::size_t>(m + 1));
  for (std::size_t j = 0; j < n; ++j) {
    for (int q = 0; q <= m; ++q) {
      symbols[j * (m + 1) + q] = table.op.time_symbol(q, table.k[j]);
    }
  }

  std::vector<Complex> state(n * static_cast<std::size_t>(m));
  for (int q = 0; q < m; ++q) {
    for (std::size_t j = 0; j < n; ++j) {
      state[j * m + q] = start.derivs[q].values[j];
    }
  }
  std::vector<std::string> errors(n);

  const long block = 4096;
  std::vector<std::vector<Complex>> f_full;
  std::vector<std::vector<Complex>> f_half;
  for (long b0 = 0; b0 < steps; b0 += block) {
    const long b1 = std::min(steps, b0 + block);
    f_full.assign(static_cast<std::size_t>(b1 - b0 + 1), {});
    f_half.assign(static_cast<std::size_t>(b1 - b0), {});
    for (long i = b0; i <= b1; ++i) {
      f_full[static_cast<std::size_t>(i - b0)] =
          forward(forcing_spatial(src, grid, time_at(i))).values;
    }
    for (long i = b0; i < b1; ++i) {
      f_half[static_cast<std::size_t>(i - b0)] =
          forward(forcing_spatial(src, grid, half_time_at(i))).values;
    }

    parallel_for(n, [&, b0, b1](std::size_t j) {
      if (!errors[j].empty()) return;
      const Complex* A = symbols.data() + j * (m + 1);
      Complex* y = state.data() + j * m;
      std::vector<Complex> k1(m), k2(m), k3(m), k4(m), tmp(m);
      const auto deriv = [&](const Complex* yy, const Complex& F,
                             Complex* dy) {
        for (int q = 0; q + 1 < m; ++q) dy[q] = yy[q + 1];
        Complex acc = F;
        for (int q = 0; q < m; ++q) acc -= A[q] * yy[q];
        dy[m - 1] = acc / A[m];
      };
      for (long i = b0; i < b1; ++i) {
        const double hi = time_at(i + 1) - time_at(i);
        const Complex F0 = f_full[static_cast<std::size_t>(i - b0)][j];
        const Complex Fh = f_half[static_cast<std::size_t>(i - b0)][j];
        const Complex F1 = f_full[static_cast<std::size_t>(i - b0 + 1)][j];
        deriv(y, F0, k1.data());
        for (int q = 0; q < m; ++q) tmp[q] = y[q] + 0.5 * hi * k1[q];
        deriv(tmp.data(), Fh, k2.data());
        for (int q = 0; q < m; ++q) tmp[q] = y[q] + 0.5 * hi * k2[q];
        deriv(tmp.data(), Fh, k3.data());
        for (int q = 0; q < m; ++q) tmp[q] = y[q] + hi * k3[q];
        deriv(tmp.data(), F1, k4.data());
        bool finite = true;
        for (int q = 0; q < m; ++q) {
          y[q] += (hi / 6.0) * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
          finite = finite && std::isfinite(y[q].real()) &&
                   std::isfinite(y[q].imag());
        }
        if (!finite) {
          errors[j] = "forced integration overflowed at k = " +
                      std::to_string(table.k[j]) + ", t = " +
                      std::to_string(time_at(i + 1));
          return;
        }
      }
    });
  }
  for (const std::string& e : errors) {
    if (!e.empty()) throw NumericalError(e);
  }

  JetField out;
  out.derivs.assign(static_cast<std::size_t>(m), make_spectral(grid, t_end));
  for (int q = 0; q < m; ++q) {
    for (std::size_t j = 0; j < n; ++j) {
      out.derivs[q].values[j] = state[j * m + q];
    }
  }
  return out;
}

}  // namespace detail

// Integrates the forced equation across the source window [-T, 0] starting
// from the pre-source jet at -T, and splits the result at t = 0 into the
// source-free propagation of that jet plus the source-induced remainder.
// A zero source yields an exactly zero remainder.
inline ParticularJet particular_solution(
    const JetField& before_jet, const SourceSpec& src,
    std::shared_ptr<const DispersionTable> table) {
  detail::require_jet_shape(before_jet, *table, "particular_solution");
  const double t0 = before_jet.derivs.front().time;
  if (src.active() &&
      std::abs(t0 + src.duration) > 1e-9 * (1.0 + src.duration)) {
    throw ValidationError(
        "particular_solution: the jet must be given at t = -T, the opening "
        "of the source window");
  }

  ParticularJet out;
  JetField hom = propagate_jet(before_jet, table, -t0);
  if (is_zero_source(src)) {
    out.sp.derivs.assign(before_jet.derivs.size(),
                         make_spectral(table->grid, 0.0));
    out.phi = std::move(hom);
    return out;
  }
  out.phi = detail::integrate_forced(*table, before_jet, src, 0.0);
  out.sp.derivs.assign(out.phi.derivs.size(),
                       make_spectral(table->grid, 0.0));
  for (std::size_t q = 0; q < out.phi.derivs.size(); ++q) {
    for (std::size_t j = 0; j < table->grid.n(); ++j) {
      out.sp.derivs[q].values[j] =
          out.phi.derivs[q].values[j] - hom.derivs[q].values[j];
    }
  }
  return out;
}

// Mode content of the total jet at the source switch-off time; the branch
// amplitudes the wave carries for all later times.
inline ModeSet after_source_modes(const JetField& phi_jet,
                                  std::shared_ptr<const DispersionTable> table) {
  return extract_modes_M(phi_jet, std::move(table));
}

// Source-induced amplitude change at evaluation time t >= end of the
// forcing window:
//   dS(k,t) = i * Int Q(t - t') F(k,t') dt',
//   Q(tau)  = [e^{-i w1 tau} - e^{-i w2 tau}] / (w2 - w1) = i B(tau),
// integrated with composite Simpson weights over the uniform samples (a
// 3/8 tail covers odd interval counts). F must already be normalized to
// the monic form, F = -f^/A_M.
inline SpectralField duhamel_delta(const DispersionTable& table,
                                   const std::vector<SpectralField>& forcing,
                                   double t) {
  if (table.branches() != 2) {
    throw ValidationError("duhamel_delta: needs a two-branch table");
  }
  if (forcing.size() < 3) {
    throw ValidationError("duhamel_delta: needs at least 3 forcing samples");
  }
  const std::size_t s = forcing.size();
  const GridSpec& grid = table.grid;
  for (const SpectralField& f : forcing) {
    if (!(f.grid == grid)) {
      throw ValidationError("duhamel_delta: forcing grid does not match");
    }
  }
  const double t_first = forcing.front().time;
  const double t_last = forcing.back().time;
  const double span = t_last - t_first;
  if (!(span > 0.0)) {
    throw ValidationError("duhamel_delta: forcing samples must span a window");
  }
  const double h = span / static_cast<double>(s - 1);
  for (std::size_t i = 0; i < s; ++i) {
    const double want = t_first + h * static_cast<double>(i);
    if (std::abs(forcing[i].time - want) > 1e-9 * (1.0 + span)) {
      throw ValidationError(
          "duhamel_delta: forcing samples must be uniformly spaced");
    }
  }
  if (t < t_last - 1e-9 * (1.0 + span)) {
    throw ValidationError(
        "duhamel_delta: evaluation time precedes the end of the forcing "
        "window");
  }

  // Composite Simpson weights; odd interval counts close with the 3/8 rule.
  std::vector<double> w(s, 0.0);
  const std::size_t intervals = s - 1;
  std::size_t simpson_end = intervals;  // first index past the Simpson part
  if (intervals % 2 != 0) simpson_end = intervals - 3;
  for (std::size_t i = 0; i + 2 <= simpson_end; i += 2) {
    w[i] += h / 3.0;
    w[i + 1] += 4.0 * h / 3.0;
    w[i + 2] += h / 3.0;
  }
  if (simpson_end != intervals) {
    const double c = 3.0 * h / 8.0;
    w[simpson_end] += c;
    w[simpson_end + 1] += 3.0 * c;
    w[simpson_end + 2] += 3.0 * c;
    w[simpson_end + 3] += c;
  }

  SpectralField out = make_spectral(grid, t);
  std::vector<std::string> errors(grid.n());
  parallel_for(grid.n(), [&](std::size_t j) {
    try {
      const Complex w1 = table.omega[0][j];
      const Complex w2 = table.omega[1][j];
      Complex acc(0.0, 0.0);
      for (std::size_t i = 0; i < s; ++i) {
        const double tau = t - forcing[i].time;
        const Complex q =
            Complex(0.0, 1.0) *
            detail::two_mode_kernel(w1, w2, tau, table.k[j]).B;
        acc += w[i] * q * forcing[i].values[j];
      }
      out.values[j] = Complex(0.0, 1.0) * acc;
    } catch (const std::exception& e) {
      errors[j] = e.what();
    }
  });
  for (const std::string& e : errors) {
    if (!e.empty()) throw NumericalError(e);
  }
  return out;
}

// Uniform samples of the monic-normalized forcing F = -f^/A_M over
// [-T, t_end], ready for duhamel_delta. t_end defaults to the window close;
// an earlier t_end supports Duhamel evaluation inside the window. Empty when
// the source vanishes.
inline std::vector<SpectralField> normalized_forcing_samples(
    const SourceSpec& src, const DispersionTable& table,
    int count = kDuhamelDefaultSamples, double t_end = 0.0) {
  if (is_zero_source(src)) return {};
  if (count < 3) {
    throw ValidationError("forcing sampling needs at least 3 samples");
  }
  if (!(t_end > -src.duration) || t_end > 0.0) {
    throw ValidationError(
        "forcing sampling end time must lie inside the source window");
  }
  if (table.op.nt != table.branches()) {
    throw ValidationError(
        "forcing normalization needs a table built from its operator");
  }
  const GridSpec& grid = table.grid;
  std::vector<Complex> lead(grid.n());
  for (std::size_t j = 0; j < grid.n(); ++j) {
    lead[j] = table.op.time_symbol(table.op.nt, table.k[j]);
  }
  std::vector<SpectralField> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double t = -src.duration +
                     (t_end + src.duration) * static_cast<double>(i) /
                         static_cast<double>(count - 1);
    SpectralField f = forcing_spectrum(src, grid, t);
    for (std::size_t j = 0; j < grid.n(); ++j) {
      f.values[j] = -f.values[j] / lead[j];
    }
    out.push_back(std::move(f));
  }
  return out;
}

// Generalized d'Alembert solution in wavenumber space: the closed two-mode
// homogeneous term from the pre-source jet plus the Duhamel term, per bin.
inline SpectralField dalembert_general_k(
    const JetField& jet, const std::vector<SpectralField>& forcing,
    const DispersionTable& table, double t) {
  SpectralField out = combined_two_mode(jet, table, t);
  if (!forcing.empty()) {
    const SpectralField d = duhamel_delta(table, forcing, t);
    for (std::size_t j = 0; j < out.values.size(); ++j) {
      out.values[j] += d.values[j];
    }
  }
  return out;
}

// Physical-space realization: transform the initial jet, evaluate the
// generalized d'Alembert form per bin, and transform back.
inline SpatialField dalembert_general_x(
    const std::vector<SpatialField>& jet_rows, const SourceSpec& src,
    std::shared_ptr<const DispersionTable> table, double t,
    int forcing_samples = kDuhamelDefaultSamples) {
  if (jet_rows.empty()) {
    throw ValidationError("dalembert_general_x: empty initial jet");
  }
  JetField jet;
  jet.derivs.reserve(jet_rows.size());
  for (const SpatialField& row : jet_rows) jet.derivs.push_back(forward(row));
  const std::vector<SpectralField> forcing =
      normalized_forcing_samples(src, *table, forcing_samples);
  return inverse(dalembert_general_k(jet, forcing, *table, t));
}

// Source description for the classical d'Alembert evaluation: the forcing
// expression, its active window, and the calibrated coefficient that
// multiplies the characteristic-cone integral.
struct ClassicalSource {
  Expr f;
  double t_on = 0.0;
  double t_off = 0.0;
  double coeff = 0.0;
};

namespace detail {

// Signed 1-D integral (limits in either order) via the adaptive oracle.
inline Complex signed_quad(const std::function<Complex(double)>& f, double a,
                           double b, double tol) {
  if (a == b) return Complex(0.0, 0.0);
  if (a < b) return quad_adaptive(f, a, b, tol);
  return -quad_adaptive(f, b, a, tol);
}

}  // namespace detail

// Classical d'Alembert evaluation for the standard wave: the average of the
// two data translates, the velocity integral over the dependence interval,
// and the coefficient-weighted forcing integral over the characteristic
// cone. Quadrature-based and independent of the spectral pipeline; exact up
// to quadrature tolerance before periodic wrap-around interferes.
inline SpatialField classical_dalembert(const Expr& u0, const Expr& v0,
                                        double c, const GridSpec& grid,
                                        double t, double data_time = 0.0,
                                        const ClassicalSource* source = nullptr,
                                        double quad_tol = 1e-10) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw ValidationError("classical_dalembert: wave speed must be positive");
  }
  const double tau = t - data_time;
  SpatialField u = make_spatial(grid, t);
  std::vector<std::string> errors(grid.n());
  parallel_for(grid.n(), [&](std::size_t p) {
    try {
      const double x = grid.x(p);
      Complex val = 0.5 * (u0(x - c * tau, data_time) +
                           u0(x + c * tau, data_time));
      if (!v0.is_constant_zero()) {
        val += detail::signed_quad(
                   [&](double xi) { return v0(xi, data_time); },
                   x - c * tau, x + c * tau, quad_tol) /
               (2.0 * c);
      }
      if (source != nullptr && source->f.valid() &&
          !source->f.is_constant_zero()) {
        const double s_lo = std::max(data_time, source->t_on);
        const double s_hi = std::min(t, source->t_off);
        if (s_hi > s_lo) {
          // The outer integrand is itself a quadrature result, so it carries
          // a fixed absolute noise of roughly the inner tolerance. Run the
          // inner integral tighter and floor the outer refinement above that
          // noise, or cancellation-dominated slices subdivide forever.
          val += source->coeff *
                 quad_adaptive(
                     [&](double sTime) {
                       const double half = c * (t - sTime);
                       return detail::signed_quad(
                           [&](double xi) { return source->f(xi, sTime); },
                           x - half, x + half, 0.01 * quad_tol);
                     },
                     s_lo, s_hi, quad_tol, 30, 0.25 * quad_tol);
        }
      }
      u.values[p] = val;
    } catch (const std::exception& e) {
      errors[p] = e.what();
    }
  });
  for (const std::string& e : errors) {
    if (!e.empty()) throw NumericalError(e);
  }
  return u;
}

// One-time calibration of the classical source coefficient: runs the
// spectral pipeline on a zero-data sourced wave, evaluates the bare cone
// integrals at probe points, and least-squares fits the proportionality
// constant between them.
inline double calibrate_classical_coefficient(double c, const Expr& f,
                                              double T, const GridSpec& grid,
                                              double t_eval,
                                              double quad_tol = 1e-9) {
  if (!(T > 0.0) || !(t_eval >= 0.0)) {
    throw ValidationError(
        "calibration needs a positive window and t_eval >= 0");
  }
  LinearOperator op = parse_operator("u_xx - (1/c^2)*u_tt = 0",
                                     {{"c", Complex(c, 0.0)}});
  auto table =
      std::make_shared<const DispersionTable>(build_table(op, grid));

  JetField jet;
  jet.derivs.assign(2, make_spectral(grid, -T));
  SourceSpec src;
  src.kind = SourceSpec::Kind::Analytic;
  src.duration = T;
  src.f = f;
  src.origin = f.source();

  // Evaluate the spectral side through the closed d'Alembert form: unlike
  // plain mode propagation it is exact at the degenerate k = 0 bin, where a
  // source with nonzero mean excites secular growth.
  const std::vector<SpectralField> forcing =
      normalized_forcing_samples(src, *table, 257);
  const SpatialField u =
      inverse(dalembert_general_k(jet, forcing, *table, t_eval));

  // Probe the central half of the grid; the cone integrals there are far
  // from any wrap-around contamination for modest t_eval.
  Complex num(0.0, 0.0);
  double den = 0.0;
  const std::size_t n = grid.n();
  for (int p = 0; p < 9; ++p) {
    const std::size_t idx = n / 4 + (p * (n / 2)) / 9;
    const double x = grid.x(idx);
    // Inner integral tighter than the outer, and the outer floored above the
    // inner noise level, so cancellation-heavy sources cannot stall the
    // subdivision (same structure as the classical evaluator's cone term).
    const Complex cone = quad_adaptive(
        [&](double s) {
          const double half = c * (t_eval - s);
          return quad_adaptive(
              [&](double xi) { return f(xi, s); }, x - half, x + half,
              0.01 * quad_tol);
        },
        -T, std::min(t_eval, 0.0), quad_tol, 30, 0.25 * quad_tol);
    num += u.values[idx] * std::conj(cone);
    den += std::norm(cone);
  }
  if (!(den > 1e-20)) {
    throw ValidationError(
        "calibration source produced vanishing cone integrals");
  }
  return (num / den).real();
}

// Orchestrates a scenario across its three regimes: free propagation of
// the initial data before the source window, direct forced integration
// inside it, and free propagation of the post-source modes afterwards.
class ScenarioEngine {
 public:
  explicit ScenarioEngine(Scenario sc) : s_(std::move(sc)) {
    std::string problems;
    for (const Diagnostic& d : validate_scenario(s_)) {
      if (d.severity == Diagnostic::Severity::Error) {
        if (!problems.empty()) problems += "; ";
        problems += d.message;
      }
    }
    if (!problems.empty()) {
      throw ValidationError("invalid scenario: " + problems);
    }
    table_ = std::make_shared<const DispersionTable>(build_table(
        s_.op, s_.grid,
        DispersionTolerances{s_.tol.eps_root, s_.tol.eps_lead_scale,
                             s_.tol.eps_deg_scale}));

    const double t0 = s_.initial_time();
    jet0_.derivs.reserve(static_cast<std::size_t>(s_.op.nt));
    for (int q = 0; q < s_.op.nt; ++q) {
      jet0_.derivs.push_back(
          forward(realize(s_.initial[static_cast<std::size_t>(q)], s_.grid, t0)));
    }
    before_ = extract_modes_M(jet0_, table_);
    have_window_ = s_.source.active();
    particular_ = particular_solution(jet0_, s_.source, table_);
    after_ = after_source_modes(particular_.phi, table_);
  }

  const Scenario& scenario() const { return s_; }
  const std::shared_ptr<const DispersionTable>& table() const {
    return table_;
  }
  const JetField& initial_jet() const { return jet0_; }
  const ModeSet& before_modes() const { return before_; }
  const ModeSet& after_modes() const { return after_; }
  const ParticularJet& particular() const { return particular_; }

  Regime regime_of(double t) const {
    if (have_window_) {
      if (t <= -s_.source.duration) return Regime::Before;
      if (t < 0.0) return Regime::During;
      return Regime::After;
    }
    return t < 0.0 ? Regime::Before : Regime::After;
  }

  Frame frame_at(double t) const {
    const Regime regime = regime_of(t);
    SpectralField S = make_spectral(s_.grid, t);
    std::optional<ModeSet> modes;
    switch (regime) {
      case Regime::Before: {
        ModeSet m = propagate_modes(before_, t - s_.initial_time());
        S = recombine(m);
        modes = std::move(m);
        break;
      }
      case Regime::During: {
        JetField jt = detail::integrate_forced(*table_, jet0_, s_.source, t);
        S = jt.derivs.front();
        modes = extract_modes_M(jt, table_);
        break;
      }
      case Regime::After: {
        ModeSet m = propagate_modes(after_, t);
        S = recombine(m);
        modes = std::move(m);
        break;
      }
    }
    SpatialField u = inverse(S);
    return Frame{t, regime, std::move(u), std::move(S), std::move(modes)};
  }

  EvolutionResult run() const {
    EvolutionResult out;
    out.frames.reserve(s_.output_times.size());
    for (double t : s_.output_times) out.frames.push_back(frame_at(t));
    return out;
  }

  // Earliest span after which the fastest spectrally significant component
  // can cross half the periodic box and wrap into the window of interest.
  // Bins below 1e-8 of the peak spectral amplitude are ignored.
  double wrap_horizon() const {
    std::vector<char> mask(s_.grid.n(), 0);
    const auto mark = [&](const std::vector<Complex>& v) {
      double peak = 0.0;
      for (const Complex& c : v) peak = std::max(peak, std::abs(c));
      if (peak == 0.0) return;
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (std::abs(v[j]) > 1e-8 * peak) mask[j] = 1;
      }
    };
    for (const SpectralField& row : jet0_.derivs) mark(row.values);
    if (have_window_) {
      for (int q = 0; q <= 8; ++q) {
        const double t = -s_.source.duration +
                         s_.source.duration * static_cast<double>(q) / 8.0;
        mark(forcing_spectrum(s_.source, s_.grid, t).values);
      }
    }
    double vmax = 0.0;
    for (std::size_t j = 1; j + 1 < s_.grid.n(); ++j) {
      if (!mask[j]) continue;
      for (int l = 0; l < table_->branches(); ++l) {
        vmax = std::max(vmax,
                        std::abs(group_velocity(*table_, l, j).real()));
      }
    }
    if (vmax <= 0.0) return std::numeric_limits<double>::infinity();
    return 0.5 * s_.grid.length() / vmax;
  }

 private:
  Scenario s_;
  std::shared_ptr<const DispersionTable> table_;
  JetField jet0_;
  ModeSet before_;
  ModeSet after_;
  ParticularJet particular_;
  bool have_window_ = false;
};

}  // namespace dmodes
