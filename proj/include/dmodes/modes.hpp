#pragma once

// Mode algebra: splitting a wave into its dispersion-branch modes and back.
//
// In the wavenumber domain a solution with M time branches decomposes per
// bin as S(k,t) = sum_l S_l(k,t), where each source-free mode evolves as
// d/dt S_l = -i omega_l S_l. The jet (S, dS/dt, ..., d^{M-1}S/dt^{M-1}) at
// one instant therefore satisfies the Vandermonde system
//
//   d^n S / dt^n = sum_l (-i omega_l)^n S_l,   n = 0..M-1,
//
// which is inverted per bin with the explicit Lagrange-basis rows. At bins
// where branches collide the split is ill-defined; those bins are repaired
// by interpolating each offending branch from its nearest clean bins and
// then shifting the offending group by a common constant so that the
// recombined wave reproduces the input bit-exactly.

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "dmodes/common.hpp"
#include "dmodes/dispersion.hpp"
#include "dmodes/grid.hpp"

namespace dmodes {

// Time jet of a spectral field: derivs[n] holds the n-th time derivative,
// all on one grid at one time.
struct JetField {
  std::vector<SpectralField> derivs;

  int order() const { return static_cast<int>(derivs.size()); }
};

// Per-branch mode amplitudes at one time, tied to the dispersion table
// they were extracted with.
struct ModeSet {
  std::shared_ptr<const DispersionTable> table;
  std::vector<SpectralField> modes;

  int size() const { return static_cast<int>(modes.size()); }
};

namespace detail {

inline void require_jet_shape(const JetField& jet, const DispersionTable& t,
                              const char* where) {
  if (jet.derivs.empty()) {
    throw ValidationError(std::string(where) + ": empty jet");
  }
  if (jet.order() != t.branches()) {
    throw ValidationError(std::string(where) + ": jet has " +
                          std::to_string(jet.order()) +
                          " rows but the dispersion table has " +
                          std::to_string(t.branches()) + " branches");
  }
  for (const SpectralField& f : jet.derivs) {
    if (!(f.grid == t.grid)) {
      throw ValidationError(std::string(where) +
                            ": jet and dispersion table grids differ");
    }
    if (f.time != jet.derivs.front().time) {
      throw ValidationError(std::string(where) +
                            ": jet rows carry different times");
    }
  }
}

// True when branch l collides with any other branch at bin j.
inline bool branch_flagged(const DispersionTable& t, int l, std::size_t j) {
  for (int m = 0; m < t.branches(); ++m) {
    if (m != l && t.degenerate(l, m, j)) return true;
  }
  return false;
}

// Lagrange-basis extraction row for branch l: coefficients c_n with
// S_l = sum_n c_n d^n S/dt^n, built from the nodes lambda_m = -i omega_m.
inline void lagrange_row(const std::vector<Complex>& lambda, std::size_t l,
                         std::vector<Complex>& row) {
  const std::size_t m = lambda.size();
  row.assign(m, Complex(0.0, 0.0));
  row[0] = Complex(1.0, 0.0);
  std::size_t deg = 0;
  Complex denom(1.0, 0.0);
  for (std::size_t p = 0; p < m; ++p) {
    if (p == l) continue;
    for (std::size_t q = deg + 2; q-- > 1;) {
      row[q] = row[q - 1] - lambda[p] * row[q];
    }
    row[0] = -lambda[p] * row[0];
    ++deg;
    denom *= lambda[l] - lambda[p];
  }
  for (Complex& c : row) c /= denom;
}

// Replaces every flagged bin of every offending branch by the value
// linearly interpolated (in k) from the branch's nearest clean bins, then
// enforces the recombination constraint sum_l S_l = S bit-exactly at the
// flagged bins. Clean bins keep the raw extraction, whose recombination is
// already exact to roundoff.
inline void repair_and_close(ModeSet& ms, const SpectralField& s) {
  const DispersionTable& t = *ms.table;
  const std::size_t n = t.k.size();
  const int m = t.branches();

  for (std::size_t j = 0; j < n; ++j) {
    if (!t.degenerate_bin(j)) continue;
    for (int l = 0; l < m; ++l) {
      if (!branch_flagged(t, l, j)) continue;
      std::size_t lo = j;
      while (lo-- > 0 && branch_flagged(t, l, lo)) {
      }
      const bool has_lo = lo != static_cast<std::size_t>(-1);
      std::size_t hi = j + 1;
      while (hi < n && branch_flagged(t, l, hi)) ++hi;
      const bool has_hi = hi < n;

      Complex v(0.0, 0.0);
      if (has_lo && has_hi) {
        const double w = (t.k[j] - t.k[lo]) / (t.k[hi] - t.k[lo]);
        v = ms.modes[l].values[lo] +
            (ms.modes[l].values[hi] - ms.modes[l].values[lo]) * w;
      } else if (has_lo) {
        v = ms.modes[l].values[lo];
      } else if (has_hi) {
        v = ms.modes[l].values[hi];
      }
      ms.modes[l].values[j] = v;
    }

    std::vector<int> group;
    for (int l = 0; l < m; ++l) {
      if (branch_flagged(t, l, j)) group.push_back(l);
    }

    const auto residual = [&]() {
      Complex acc(0.0, 0.0);
      for (int l = 0; l < m; ++l) acc += ms.modes[l].values[j];
      return s.values[j] - acc;
    };
    const auto zero = [](const Complex& z) {
      return z.real() == 0.0 && z.imag() == 0.0;
    };

    // The common shift carries the macroscopic correction; what survives it
    // is below one ulp of the bin sum.
    Complex r = residual();
    for (int pass = 0; pass < 3 && !zero(r); ++pass) {
      const Complex c = r / static_cast<double>(group.size());
      for (int l : group) ms.modes[l].values[j] += c;
      r = residual();
    }

    // Sub-ulp cleanup: fold the remainder into one member, cycling through
    // the group when a member's last bit ties against the remainder.
    for (int c : group) {
      if (zero(r)) break;
      for (int iter = 0; iter < 4 && !zero(r); ++iter) {
        const Complex before = ms.modes[c].values[j];
        ms.modes[c].values[j] += r;
        if (ms.modes[c].values[j] == before) break;
        r = residual();
      }
    }

    // Last resort when rounding keeps the sum off S: rebuild the tail of
    // the accumulation so the bin total is S by construction. The split at
    // a degenerate bin is a convention; the combined wave is not.
    if (!zero(r)) {
      if (m == 2) {
        const Complex half(0.5 * s.values[j].real(),
                           0.5 * s.values[j].imag());
        ms.modes[0].values[j] = half;
        ms.modes[1].values[j] = s.values[j] - half;
      } else {
        Complex prefix(0.0, 0.0);
        for (int l = 0; l + 2 < m; ++l) prefix += ms.modes[l].values[j];
        ms.modes[m - 2].values[j] = -prefix;
        ms.modes[m - 1].values[j] = s.values[j];
      }
    }
  }
}

}  // namespace detail

// Per-bin sum of the modes, accumulated in branch order.
inline SpectralField recombine(const ModeSet& ms) {
  if (ms.modes.empty()) {
    throw ValidationError("recombine: empty mode set");
  }
  SpectralField out =
      make_spectral(ms.modes.front().grid, ms.modes.front().time);
  for (std::size_t j = 0; j < out.values.size(); ++j) {
    Complex acc(0.0, 0.0);
    for (const SpectralField& mode : ms.modes) acc += mode.values[j];
    out.values[j] = acc;
  }
  return out;
}

// Forward Vandermonde map: jet row n is sum_l (-i omega_l)^n S_l.
inline JetField jet_of_modes(const ModeSet& ms) {
  const DispersionTable& t = *ms.table;
  if (ms.size() != t.branches()) {
    throw ValidationError("jet_of_modes: mode count does not match table");
  }
  const std::size_t n = t.k.size();
  const double time = ms.modes.empty() ? 0.0 : ms.modes.front().time;
  JetField jet;
  jet.derivs.assign(ms.size(), make_spectral(t.grid, time));
  std::vector<Complex> power(ms.size());
  for (std::size_t j = 0; j < n; ++j) {
    for (int l = 0; l < ms.size(); ++l) power[l] = Complex(1.0, 0.0);
    for (int row = 0; row < ms.size(); ++row) {
      Complex acc(0.0, 0.0);
      for (int l = 0; l < ms.size(); ++l) {
        acc += power[l] * ms.modes[l].values[j];
        power[l] *= Complex(0.0, -1.0) * t.omega[l][j];
      }
      jet.derivs[row].values[j] = acc;
    }
  }
  return jet;
}

// Splits a jet into branch modes by inverting the per-bin Vandermonde
// system with Lagrange-basis rows; degenerate bins are repaired afterwards.
inline ModeSet extract_modes_M(const JetField& jet,
                               std::shared_ptr<const DispersionTable> table) {
  detail::require_jet_shape(jet, *table, "extract_modes_M");
  const DispersionTable& t = *table;
  const std::size_t n = t.k.size();
  const int m = t.branches();
  const double time = jet.derivs.front().time;

  ModeSet ms{std::move(table), {}};
  ms.modes.assign(m, make_spectral(t.grid, time));

  if (m == 1) {
    ms.modes[0].values = jet.derivs[0].values;
    return ms;
  }

  std::vector<Complex> lambda(m);
  std::vector<Complex> row(m);
  for (std::size_t j = 0; j < n; ++j) {
    for (int l = 0; l < m; ++l) {
      lambda[l] = Complex(0.0, -1.0) * t.omega[l][j];
    }
    for (int l = 0; l < m; ++l) {
      if (detail::branch_flagged(t, l, j)) continue;  // repaired below
      detail::lagrange_row(lambda, static_cast<std::size_t>(l), row);
      Complex acc(0.0, 0.0);
      for (int q = 0; q < m; ++q) acc += row[q] * jet.derivs[q].values[j];
      ms.modes[l].values[j] = acc;
    }
  }
  detail::repair_and_close(ms, jet.derivs[0]);
  return ms;
}

// Two-branch closed forms S_1 = (omega_2 S - i dS/dt) / (omega_2 - omega_1)
// and S_2 = (omega_1 S - i dS/dt) / (omega_1 - omega_2), per bin.
inline ModeSet extract_modes_2(const JetField& jet,
                               std::shared_ptr<const DispersionTable> table) {
  if (table->branches() != 2) {
    throw ValidationError("extract_modes_2: needs exactly two branches");
  }
  detail::require_jet_shape(jet, *table, "extract_modes_2");
  const DispersionTable& t = *table;
  const std::size_t n = t.k.size();
  const double time = jet.derivs.front().time;

  ModeSet ms{std::move(table), {}};
  ms.modes.assign(2, make_spectral(t.grid, time));

  const Complex mi(0.0, -1.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (t.degenerate_bin(j)) continue;  // repaired below
    const Complex s = jet.derivs[0].values[j];
    const Complex ds = jet.derivs[1].values[j];
    const Complex w1 = t.omega[0][j];
    const Complex w2 = t.omega[1][j];
    ms.modes[0].values[j] = (w2 * s + mi * ds) / (w2 - w1);
    ms.modes[1].values[j] = (w1 * s + mi * ds) / (w1 - w2);
  }
  detail::repair_and_close(ms, jet.derivs[0]);
  return ms;
}

// Source-induced mode changes: the extraction operators applied to the jet
// of the particular solution at the source switch-off time, giving the
// per-branch amplitude changes the source left behind.
inline ModeSet delta_modes(const JetField& sp_jet,
                           std::shared_ptr<const DispersionTable> table) {
  return extract_modes_M(sp_jet, std::move(table));
}

}  // namespace dmodes
