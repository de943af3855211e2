#pragma once

// Periodic grid and spectral transforms with the symmetric 1/sqrt(2 pi)
// convention:
//
//   S(k_j) = dx/sqrt(2 pi) * sum_m u(x_m) exp(-i k_j x_m)
//   u(x_m) = dk/sqrt(2 pi) * sum_j S(k_j) exp(+i k_j x_m)
//
// x_m = -L/2 + m dx, k_j = 2 pi j / L for j in [-N/2, N/2). Spectral fields
// are stored in monotone-k order; dx * dk * N = 2 pi.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dmodes/common.hpp"

namespace dmodes {

class GridSpec {
 public:
  GridSpec(std::size_t n, double length) : n_(n), length_(length) {
    if (n < 8 || (n & (n - 1)) != 0) {
      throw ValidationError("grid size must be a power of two with N >= 8, got " +
                            std::to_string(n));
    }
    if (!(length > 0.0) || !std::isfinite(length)) {
      throw ValidationError("grid length must be positive and finite");
    }
  }

  std::size_t n() const { return n_; }
  double length() const { return length_; }
  double dx() const { return length_ / static_cast<double>(n_); }
  double dk() const { return 2.0 * kPi / length_; }

  double x(std::size_t m) const {
    return -0.5 * length_ + static_cast<double>(m) * dx();
  }

  // Signed wavenumber index of storage slot j: j - N/2 in [-N/2, N/2).
  long k_index(std::size_t j) const {
    return static_cast<long>(j) - static_cast<long>(n_ / 2);
  }

  double k(std::size_t j) const {
    return dk() * static_cast<double>(k_index(j));
  }

  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.n_ == b.n_ && a.length_ == b.length_;
  }

 private:
  std::size_t n_;
  double length_;
};

struct SpatialField {
  GridSpec grid;
  double time = 0.0;
  std::vector<Complex> values;
};

struct SpectralField {
  GridSpec grid;
  double time = 0.0;
  std::vector<Complex> values;  // monotone k: slot j holds k index j - N/2
};

inline SpatialField make_spatial(const GridSpec& grid, double time = 0.0) {
  return SpatialField{grid, time, std::vector<Complex>(grid.n())};
}

inline SpectralField make_spectral(const GridSpec& grid, double time = 0.0) {
  return SpectralField{grid, time, std::vector<Complex>(grid.n())};
}

namespace detail {

// In-place radix-2 transform, sum_m a_m exp(sign * 2 pi i j m / N).
// Twiddles come straight from std::polar per index to keep rounding low.
inline void fft_pow2(std::vector<Complex>& a, int sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  std::vector<Complex> tw(n / 2);
  const double base = static_cast<double>(sign) * 2.0 * kPi /
                      static_cast<double>(n);
  for (std::size_t j = 0; j < n / 2; ++j) {
    tw[j] = std::polar(1.0, base * static_cast<double>(j));
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t q = 0; q < len / 2; ++q) {
        Complex w = tw[q * stride];
        Complex u = a[start + q];
        Complex v = a[start + q + len / 2] * w;
        a[start + q] = u + v;
        a[start + q + len / 2] = u - v;
      }
    }
  }
}

inline double parity(long k_index) { return (k_index % 2 != 0) ? -1.0 : 1.0; }

}  // namespace detail

inline SpectralField forward(const SpatialField& u) {
  const std::size_t n = u.grid.n();
  if (u.values.size() != n) {
    throw ValidationError("spatial field size does not match its grid");
  }
  std::vector<Complex> work(u.values);
  detail::fft_pow2(work, -1);
  SpectralField S = make_spectral(u.grid, u.time);
  const double scale = u.grid.dx() / std::sqrt(2.0 * kPi);
  for (std::size_t j = 0; j < n; ++j) {
    const long idx = u.grid.k_index(j);
    const std::size_t p = (j + n / 2) % n;  // idx mod N
    S.values[j] = scale * detail::parity(idx) * work[p];
  }
  return S;
}

inline SpatialField inverse(const SpectralField& S) {
  const std::size_t n = S.grid.n();
  if (S.values.size() != n) {
    throw ValidationError("spectral field size does not match its grid");
  }
  std::vector<Complex> work(n);
  for (std::size_t j = 0; j < n; ++j) {
    const long idx = S.grid.k_index(j);
    const std::size_t p = (j + n / 2) % n;
    work[p] = detail::parity(idx) * S.values[j];
  }
  detail::fft_pow2(work, +1);
  SpatialField u = make_spatial(S.grid, S.time);
  const double scale = S.grid.dk() / std::sqrt(2.0 * kPi);
  for (std::size_t m = 0; m < n; ++m) u.values[m] = scale * work[m];
  return u;
}

// Per-bin multiplication by a diagonal symbol g(k); composes exactly bin by
// bin. g must return finite values on every grid wavenumber.
template <class G>
inline SpectralField apply_symbol(const SpectralField& S, G&& g) {
  SpectralField out = S;
  for (std::size_t j = 0; j < S.values.size(); ++j) {
    const double k = S.grid.k(j);
    const Complex f = g(k);
    if (!std::isfinite(f.real()) || !std::isfinite(f.imag())) {
      throw NumericalError("symbol evaluated to a non-finite value at k = " +
                           std::to_string(k) + " (bin " + std::to_string(j) +
                           ")");
    }
    out.values[j] = S.values[j] * f;
  }
  return out;
}

inline double linf_norm(const std::vector<Complex>& v) {
  double m = 0.0;
  for (const Complex& z : v) m = std::max(m, std::abs(z));
  return m;
}

inline double l2_norm(const std::vector<Complex>& v, double measure = 1.0) {
  double s = 0.0;
  for (const Complex& z : v) s += std::norm(z);
  return std::sqrt(measure * s);
}

inline double linf_diff(const std::vector<Complex>& a,
                        const std::vector<Complex>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double l2_diff(const std::vector<Complex>& a,
                      const std::vector<Complex>& b, double measure = 1.0) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
  return std::sqrt(measure * s);
}

inline void require_finite(const std::vector<Complex>& v,
                           const std::string& what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i].real()) || !std::isfinite(v[i].imag())) {
      throw NumericalError(what + " has a non-finite value at index " +
                           std::to_string(i));
    }
  }
}

}  // namespace dmodes
