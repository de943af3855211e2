#pragma once

// Dispersion relation machinery. Substituting exp(i k x - i omega t) into
// L u = 0 gives the polynomial
//
//   P(omega) = sum_n p_n(k) omega^n = 0,  p_n(k) = A_n(k) (-i)^n,
//
// whose N_t roots omega_l(k) are matched across the wavenumber grid into
// continuous branches. Roots come from the companion matrix: balance,
// complex Hessenberg QR with shifts and deflation, then one Newton polish
// per root against the original polynomial.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "dmodes/common.hpp"
#include "dmodes/grid.hpp"
#include "dmodes/operator.hpp"

namespace dmodes {

struct DispersionTolerances {
  double eps_root = 1e-10;        // relative residual bound per root
  double eps_lead_scale = 1e-12;  // leading-coefficient degeneracy threshold
  double eps_deg_scale = 1e-9;    // branch-collision threshold scale
};

// p_n(k) for n = 0..N_t; the leading coefficient must stay away from zero
// relative to the largest coefficient.
inline std::vector<Complex> dispersion_poly(const LinearOperator& op, double k,
                                            double eps_lead_scale = 1e-12) {
  std::vector<Complex> p(op.nt + 1);
  Complex mi_pow(1.0, 0.0);  // (-i)^n
  const Complex mi(0.0, -1.0);
  for (int n = 0; n <= op.nt; ++n) {
    p[n] = op.time_symbol(n, k) * mi_pow;
    mi_pow *= mi;
  }
  double max_mag = 0.0;
  for (const Complex& c : p) max_mag = std::max(max_mag, std::abs(c));
  if (max_mag == 0.0 || std::abs(p.back()) < eps_lead_scale * max_mag) {
    throw ValidationError(
        "degenerate leading coefficient: the dispersion polynomial drops "
        "degree at k = " +
        std::to_string(k));
  }
  return p;
}

namespace detail {

class SmallMatrix {
 public:
  explicit SmallMatrix(int n) : n_(n), a_(static_cast<std::size_t>(n) * n) {}
  Complex& at(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
  const Complex& at(int i, int j) const {
    return a_[static_cast<std::size_t>(i) * n_ + j];
  }
  int n() const { return n_; }

 private:
  int n_;
  std::vector<Complex> a_;
};

// Iterative radix-2 balancing (diagonal similarity); preserves the
// Hessenberg pattern and the eigenvalues exactly.
inline void balance(SmallMatrix& h) {
  const int n = h.n();
  bool converged = false;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    converged = true;
    for (int i = 0; i < n; ++i) {
      double c = 0.0, r = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(h.at(j, i));
        r += std::abs(h.at(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double f = 1.0;
      const double s = c + r;
      while (c < r / 2.0) {
        c *= 2.0;
        r /= 2.0;
        f *= 2.0;
      }
      while (c >= r * 2.0) {
        c /= 2.0;
        r *= 2.0;
        f /= 2.0;
      }
      if ((c + r) < 0.95 * s && f != 1.0) {
        converged = false;
        for (int j = 0; j < n; ++j) h.at(i, j) /= f;
        for (int j = 0; j < n; ++j) h.at(j, i) *= f;
      }
    }
  }
}

// Eigenvalues of a complex upper Hessenberg matrix by the shifted QR
// iteration with Givens rotations and deflation.
inline std::vector<Complex> hessenberg_eigenvalues(SmallMatrix h) {
  const int n = h.n();
  const double eps = 2.220446049250313e-16;
  std::vector<Complex> w(n);
  Complex shift_total(0.0, 0.0);
  int en = n - 1;
  while (en >= 0) {
    int its = 0;
    for (;;) {
      int l = en;
      while (l > 0) {
        double s = std::abs(h.at(l - 1, l - 1)) + std::abs(h.at(l, l));
        if (s == 0.0) s = 1.0;
        if (std::abs(h.at(l, l - 1)) <= eps * s) {
          h.at(l, l - 1) = Complex(0.0, 0.0);
          break;
        }
        --l;
      }
      if (l == en) {
        w[en] = h.at(en, en) + shift_total;
        --en;
        break;
      }
      if (its >= 30) {
        throw NumericalError(
            "companion eigenvalue iteration failed to converge");
      }
      ++its;

      Complex s;
      if (its % 10 == 0) {
        s = Complex(std::abs(h.at(en, en - 1)), 0.0) + h.at(en, en);
      } else {
        const Complex a = h.at(en - 1, en - 1);
        const Complex b = h.at(en - 1, en);
        const Complex c = h.at(en, en - 1);
        const Complex d = h.at(en, en);
        const Complex half = 0.5 * (a - d);
        const Complex disc = std::sqrt(half * half + b * c);
        const Complex mean = 0.5 * (a + d);
        const Complex e1 = mean + disc;
        const Complex e2 = mean - disc;
        s = (std::abs(e1 - d) < std::abs(e2 - d)) ? e1 : e2;
      }
      for (int i = 0; i <= en; ++i) h.at(i, i) -= s;
      shift_total += s;

      // One implicit-shift QR sweep on the active block [l, en].
      std::vector<Complex> g1(en + 1), g2(en + 1);
      for (int i = l + 1; i <= en; ++i) {
        const Complex a = h.at(i - 1, i - 1);
        const Complex b = h.at(i, i - 1);
        const double r = std::hypot(std::abs(a), std::abs(b));
        Complex s1(1.0, 0.0), s2(0.0, 0.0);
        if (r > 0.0) {
          s1 = std::conj(a) / r;
          s2 = std::conj(b) / r;
        }
        g1[i] = s1;
        g2[i] = s2;
        for (int col = i - 1; col <= en; ++col) {
          const Complex u = h.at(i - 1, col);
          const Complex v = h.at(i, col);
          h.at(i - 1, col) = s1 * u + s2 * v;
          h.at(i, col) = -std::conj(s2) * u + std::conj(s1) * v;
        }
      }
      for (int i = l + 1; i <= en; ++i) {
        const Complex s1 = g1[i];
        const Complex s2 = g2[i];
        for (int row = l; row <= en; ++row) {
          const Complex u = h.at(row, i - 1);
          const Complex v = h.at(row, i);
          h.at(row, i - 1) = u * std::conj(s1) + v * std::conj(s2);
          h.at(row, i) = -u * s2 + v * s1;
        }
      }
    }
  }
  return w;
}

inline Complex poly_eval(const std::vector<Complex>& p, Complex z) {
  Complex acc(0.0, 0.0);
  for (std::size_t q = p.size(); q-- > 0;) acc = acc * z + p[q];
  return acc;
}

inline Complex poly_deriv_eval(const std::vector<Complex>& p, Complex z) {
  Complex acc(0.0, 0.0);
  for (std::size_t q = p.size(); q-- > 1;) {
    acc = acc * z + static_cast<double>(q) * p[q];
  }
  return acc;
}

inline bool lex_less(const Complex& a, const Complex& b) {
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

// Smallest root gap the solver can certify at magnitude zmag. A d-fold
// cluster is only determined to O((eps * Phi / |p_d|)^(1/d)), where Phi is
// the evaluation noise scale sum_q |p_q| zmag^q; gaps below that are noise,
// not evidence of distinct branches.
inline double cluster_radius(const std::vector<Complex>& p, double zmag) {
  const int d = static_cast<int>(p.size()) - 1;
  if (d <= 0) return 0.0;
  double phi = 0.0;
  double zp = 1.0;
  for (int q = 0; q <= d; ++q) {
    phi += std::abs(p[q]) * zp;
    zp *= zmag;
  }
  const double u =
      std::numeric_limits<double>::epsilon() * phi / std::abs(p[d]);
  return 4.0 * std::pow(u, 1.0 / d);
}

}  // namespace detail

// All roots of sum_n p_n z^n with multiplicity, sorted by (Re, Im).
// The caller guarantees a usable leading coefficient.
inline std::vector<Complex> solve_roots(const std::vector<Complex>& p,
                                        double eps_root = 1e-10) {
  if (p.empty() || std::abs(p.back()) == 0.0) {
    throw ValidationError("root solve needs a nonzero leading coefficient");
  }
  const int d = static_cast<int>(p.size()) - 1;
  if (d == 0) return {};

  std::vector<Complex> monic(d);
  for (int q = 0; q < d; ++q) monic[q] = p[q] / p[d];

  detail::SmallMatrix h(d);
  for (int i = 1; i < d; ++i) h.at(i, i - 1) = Complex(1.0, 0.0);
  for (int i = 0; i < d; ++i) h.at(i, d - 1) = -monic[i];
  detail::balance(h);
  std::vector<Complex> roots = detail::hessenberg_eigenvalues(std::move(h));

  for (Complex& z : roots) {
    const Complex dp = detail::poly_deriv_eval(p, z);
    if (std::abs(dp) > 0.0) {
      const Complex step = detail::poly_eval(p, z) / dp;
      const Complex cand = z - step;
      if (std::abs(detail::poly_eval(p, cand)) <=
          std::abs(detail::poly_eval(p, z))) {
        z = cand;
      }
    }
  }

  for (const Complex& z : roots) {
    double denom = 0.0;
    double zp = 1.0;
    for (int q = 0; q <= d; ++q) {
      denom += std::abs(p[q]) * zp;
      zp *= std::abs(z);
    }
    const double res = std::abs(detail::poly_eval(p, z));
    if (denom > 0.0 ? (res > eps_root * denom) : (res != 0.0)) {
      throw NumericalError("root residual " + std::to_string(res / denom) +
                           " exceeds tolerance; the root solve lost accuracy");
    }
  }

  std::sort(roots.begin(), roots.end(), detail::lex_less);
  return roots;
}

struct DispersionTable {
  GridSpec grid;
  LinearOperator op;  // may be empty for synthetic tables
  std::vector<double> k;                      // monotone, size N
  std::vector<std::vector<Complex>> omega;    // [branch][bin]
  double eps_degeneracy = 0.0;
  double max_abs_omega = 0.0;
  std::vector<std::uint8_t> pair_flags;  // [a*M + b]*N + j, a < b
  std::vector<std::uint8_t> bin_flags;   // any colliding pair at bin j

  int branches() const { return static_cast<int>(omega.size()); }

  bool degenerate(int a, int b, std::size_t j) const {
    if (a > b) std::swap(a, b);
    const std::size_t m = omega.size();
    return pair_flags[(static_cast<std::size_t>(a) * m + b) * k.size() + j] !=
           0;
  }

  bool degenerate_bin(std::size_t j) const { return bin_flags[j] != 0; }
};

// Fills eps_degeneracy, max_abs_omega, and the collision flags from the
// branch values. Shared by build_table and synthetic test tables.
inline void compute_degeneracy_flags(DispersionTable& table,
                                     double eps_deg_scale = 1e-9) {
  const std::size_t m = table.omega.size();
  const std::size_t n = table.k.size();
  table.max_abs_omega = 0.0;
  for (const auto& branch : table.omega) {
    for (const Complex& w : branch) {
      table.max_abs_omega = std::max(table.max_abs_omega, std::abs(w));
    }
  }
  table.eps_degeneracy = eps_deg_scale * (1.0 + table.max_abs_omega);
  table.pair_flags.assign(m * m * n, 0);
  table.bin_flags.assign(n, 0);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      for (std::size_t j = 0; j < n; ++j) {
        if (std::abs(table.omega[a][j] - table.omega[b][j]) <
            table.eps_degeneracy) {
          table.pair_flags[(a * m + b) * n + j] = 1;
          table.pair_flags[(b * m + a) * n + j] = 1;
          table.bin_flags[j] = 1;
        }
      }
    }
  }
}

namespace detail {

// Assignment of roots to branches minimizing total jump from the previous
// bin; exhaustive over permutations (N_t <= 6 keeps this tiny).
inline void match_roots(const std::vector<Complex>& prev,
                        const std::vector<Complex>& roots,
                        std::vector<Complex>& out) {
  const std::size_t m = roots.size();
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best = perm;
  double best_cost = -1.0;
  do {
    double cost = 0.0;
    for (std::size_t l = 0; l < m; ++l) cost += std::abs(roots[perm[l]] - prev[l]);
    if (best_cost < 0.0 || cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  out.resize(m);
  for (std::size_t l = 0; l < m; ++l) out[l] = roots[best[l]];
}

}  // namespace detail

// Solves the dispersion relation on every grid wavenumber and matches the
// roots into continuous branches. The seed bin is the smallest |k| whose
// roots are pairwise separated; branches are ordered by (Re, Im) there.
inline DispersionTable build_table(const LinearOperator& op,
                                   const GridSpec& grid,
                                   const DispersionTolerances& tol = {}) {
  const std::size_t n = grid.n();
  const std::size_t m = static_cast<std::size_t>(op.nt);
  DispersionTable table{grid, op, {}, {}, 0.0, 0.0, {}, {}};
  table.k.resize(n);
  for (std::size_t j = 0; j < n; ++j) table.k[j] = grid.k(j);

  std::vector<std::vector<Complex>> roots(n);
  for (std::size_t j = 0; j < n; ++j) {
    try {
      roots[j] =
          solve_roots(dispersion_poly(op, table.k[j], tol.eps_lead_scale),
                      tol.eps_root);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " at k = " +
                           std::to_string(table.k[j]));
    }
  }

  double max_abs = 0.0;
  for (const auto& r : roots) {
    for (const Complex& z : r) max_abs = std::max(max_abs, std::abs(z));
  }
  const double eps_deg = tol.eps_deg_scale * (1.0 + max_abs);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double fa = std::abs(table.k[a]);
    const double fb = std::abs(table.k[b]);
    if (fa != fb) return fa < fb;
    return table.k[a] < table.k[b];
  });
  std::size_t seed = n;
  for (std::size_t cand : order) {
    double zmag = 0.0;
    for (const Complex& z : roots[cand]) zmag = std::max(zmag, std::abs(z));
    const double floor = std::max(
        eps_deg, detail::cluster_radius(
                     dispersion_poly(op, table.k[cand], tol.eps_lead_scale),
                     zmag));
    bool separated = true;
    for (std::size_t a = 0; a < m && separated; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) {
        if (std::abs(roots[cand][a] - roots[cand][b]) <= floor) {
          separated = false;
          break;
        }
      }
    }
    if (separated) {
      seed = cand;
      break;
    }
  }
  if (seed == n) {
    throw ValidationError(
        "identically degenerate dispersion branches: no wavenumber bin has "
        "pairwise separated roots");
  }

  std::vector<std::vector<Complex>> assigned(n);
  assigned[seed] = roots[seed];  // solve_roots output is already (Re, Im) sorted
  for (std::size_t j = seed + 1; j < n; ++j) {
    detail::match_roots(assigned[j - 1], roots[j], assigned[j]);
  }
  for (std::size_t j = seed; j-- > 0;) {
    detail::match_roots(assigned[j + 1], roots[j], assigned[j]);
  }

  table.omega.assign(m, std::vector<Complex>(n));
  for (std::size_t l = 0; l < m; ++l) {
    for (std::size_t j = 0; j < n; ++j) table.omega[l][j] = assigned[j][l];
  }
  compute_degeneracy_flags(table, tol.eps_deg_scale);
  return table;
}

// Central-difference group velocity of one branch at an interior bin.
inline Complex group_velocity(const DispersionTable& table, int branch,
                              std::size_t j) {
  if (branch < 0 || branch >= table.branches()) {
    throw std::out_of_range("group_velocity: branch index out of range");
  }
  if (j == 0 || j + 1 >= table.k.size()) {
    throw std::out_of_range(
        "group_velocity: needs an interior wavenumber bin");
  }
  const double dk = table.k[j + 1] - table.k[j - 1];
  return (table.omega[branch][j + 1] - table.omega[branch][j - 1]) / dk;
}

// Per-bin multiplication by a symbol that may consult the branch values.
// g receives (k, branch values at this bin).
template <class G>
inline SpectralField apply_symbol(const SpectralField& S,
                                  const DispersionTable& table, G&& g) {
  if (!(S.grid == table.grid)) {
    throw ValidationError("field and dispersion table grids differ");
  }
  SpectralField out = S;
  std::vector<Complex> w(table.branches());
  for (std::size_t j = 0; j < S.values.size(); ++j) {
    for (int l = 0; l < table.branches(); ++l) w[l] = table.omega[l][j];
    const Complex f = g(table.k[j], std::as_const(w));
    if (!std::isfinite(f.real()) || !std::isfinite(f.imag())) {
      throw NumericalError("symbol evaluated to a non-finite value at k = " +
                           std::to_string(table.k[j]));
    }
    out.values[j] = S.values[j] * f;
  }
  return out;
}

}  // namespace dmodes
