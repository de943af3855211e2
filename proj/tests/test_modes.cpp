#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <vector>

#include "dmodes/dispersion.hpp"
#include "dmodes/grid.hpp"
#include "dmodes/modes.hpp"
#include "dmodes/operator.hpp"

using dmodes::Complex;
using dmodes::DispersionTable;
using dmodes::GridSpec;
using dmodes::JetField;
using dmodes::ModeSet;
using dmodes::SpectralField;

namespace {

// Table with prescribed branch functions; no operator behind it.
std::shared_ptr<const DispersionTable> synth_table(
    const GridSpec& g,
    const std::vector<std::function<Complex(double)>>& branches) {
  DispersionTable t{g, {}, {}, {}, 0.0, 0.0, {}, {}};
  t.k.resize(g.n());
  for (std::size_t j = 0; j < g.n(); ++j) t.k[j] = g.k(j);
  for (const auto& f : branches) {
    std::vector<Complex> row(g.n());
    for (std::size_t j = 0; j < g.n(); ++j) row[j] = f(t.k[j]);
    t.omega.push_back(std::move(row));
  }
  dmodes::compute_degeneracy_flags(t);
  return std::make_shared<const DispersionTable>(std::move(t));
}

std::shared_ptr<const DispersionTable> wave_table(const GridSpec& g,
                                                  double c = 1.0) {
  dmodes::LinearOperator op = dmodes::parse_operator(
      "u_tt - c^2*u_xx = 0", {{"c", Complex(c, 0.0)}});
  return std::make_shared<const DispersionTable>(dmodes::build_table(op, g));
}

JetField random_jet(const GridSpec& g, int rows, std::mt19937_64& rng,
                    double time = 0.0) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  JetField jet;
  jet.derivs.assign(rows, dmodes::make_spectral(g, time));
  for (auto& row : jet.derivs) {
    for (auto& v : row.values) v = Complex(dist(rng), dist(rng));
  }
  return jet;
}

JetField constant_jet(const GridSpec& g, const std::vector<Complex>& rows) {
  JetField jet;
  for (const Complex& v : rows) {
    SpectralField f = dmodes::make_spectral(g, 0.0);
    std::fill(f.values.begin(), f.values.end(), v);
    jet.derivs.push_back(std::move(f));
  }
  return jet;
}

}  // namespace

TEST_CASE("two-mode closed forms split a symmetric pair", "[modes]") {
  GridSpec g(8, 10.0);
  auto table = synth_table(
      g, {[](double) { return Complex(1, 0); },
          [](double) { return Complex(-1, 0); }});
  JetField jet = constant_jet(g, {Complex(2, 0), Complex(0, 0)});
  ModeSet ms = dmodes::extract_modes_2(jet, table);
  for (std::size_t j = 0; j < g.n(); ++j) {
    CHECK(std::abs(ms.modes[0].values[j] - Complex(1, 0)) <= 1e-14);
    CHECK(std::abs(ms.modes[1].values[j] - Complex(1, 0)) <= 1e-14);
  }
}

TEST_CASE("two-mode extraction inverts a constructed jet", "[modes]") {
  // Modes (3, 2) on branches +-5 give S = 5, dS/dt = -5i; extraction must
  // return the original pair.
  GridSpec g(8, 10.0);
  auto table = synth_table(
      g, {[](double) { return Complex(5, 0); },
          [](double) { return Complex(-5, 0); }});

  ModeSet built{table, {}};
  built.modes.assign(2, dmodes::make_spectral(g, 0.0));
  for (auto& v : built.modes[0].values) v = Complex(3, 0);
  for (auto& v : built.modes[1].values) v = Complex(2, 0);
  JetField jet = dmodes::jet_of_modes(built);
  for (std::size_t j = 0; j < g.n(); ++j) {
    CHECK(std::abs(jet.derivs[0].values[j] - Complex(5, 0)) <= 1e-14);
    CHECK(std::abs(jet.derivs[1].values[j] - Complex(0, -5)) <= 1e-14);
  }

  ModeSet ms = dmodes::extract_modes_2(jet, table);
  for (std::size_t j = 0; j < g.n(); ++j) {
    CHECK(std::abs(ms.modes[0].values[j] - Complex(3, 0)) <= 1e-12);
    CHECK(std::abs(ms.modes[1].values[j] - Complex(2, 0)) <= 1e-12);
  }
}

TEST_CASE("three-branch Vandermonde jet and inversion", "[modes]") {
  // omega = (1, 2, 3) with unit modes: S = 3, dS/dt = -6i, d2S/dt2 = -14.
  GridSpec g(8, 10.0);
  auto table = synth_table(
      g, {[](double) { return Complex(1, 0); },
          [](double) { return Complex(2, 0); },
          [](double) { return Complex(3, 0); }});

  ModeSet built{table, {}};
  built.modes.assign(3, dmodes::make_spectral(g, 0.0));
  for (auto& mode : built.modes) {
    std::fill(mode.values.begin(), mode.values.end(), Complex(1, 0));
  }
  JetField jet = dmodes::jet_of_modes(built);
  for (std::size_t j = 0; j < g.n(); ++j) {
    CHECK(std::abs(jet.derivs[0].values[j] - Complex(3, 0)) <= 1e-13);
    CHECK(std::abs(jet.derivs[1].values[j] - Complex(0, -6)) <= 1e-13);
    CHECK(std::abs(jet.derivs[2].values[j] - Complex(-14, 0)) <= 1e-13);
  }

  ModeSet ms = dmodes::extract_modes_M(jet, table);
  for (int l = 0; l < 3; ++l) {
    for (std::size_t j = 0; j < g.n(); ++j) {
      CHECK(std::abs(ms.modes[l].values[j] - Complex(1, 0)) <= 1e-12);
    }
  }
}

TEST_CASE("general and two-mode extraction agree", "[modes]") {
  GridSpec g(64, 2.0 * dmodes::kPi);
  auto table = wave_table(g);
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    JetField jet = random_jet(g, 2, rng);
    ModeSet a = dmodes::extract_modes_2(jet, table);
    ModeSet b = dmodes::extract_modes_M(jet, table);
    for (int l = 0; l < 2; ++l) {
      for (std::size_t j = 0; j < g.n(); ++j) {
        CHECK(std::abs(a.modes[l].values[j] - b.modes[l].values[j]) <=
              1e-12);
      }
    }
  }
}

TEST_CASE("single-branch extraction is the identity", "[modes]") {
  GridSpec g(32, 10.0);
  auto table =
      synth_table(g, {[](double k) { return Complex(0.5 * k * k, 0); }});
  std::mt19937_64 rng(7);
  JetField jet = random_jet(g, 1, rng);
  ModeSet ms = dmodes::extract_modes_M(jet, table);
  for (std::size_t j = 0; j < g.n(); ++j) {
    CHECK(ms.modes[0].values[j].real() == jet.derivs[0].values[j].real());
    CHECK(ms.modes[0].values[j].imag() == jet.derivs[0].values[j].imag());
  }
}

TEST_CASE("extraction round trips through the jet", "[modes]") {
  // Random jets on a well-separated synthetic three-branch table.
  GridSpec g(64, 16.0);
  auto table = synth_table(
      g, {[](double k) { return Complex(2.0 + 0.1 * k * k, 0); },
          [](double k) { return Complex(-1.0 - 0.05 * k * k, 0.2); },
          [](double k) { return Complex(0.3 * k, -0.1); }});
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    JetField jet = random_jet(g, 3, rng);
    JetField back = dmodes::jet_of_modes(dmodes::extract_modes_M(jet, table));
    for (int r = 0; r < 3; ++r) {
      for (std::size_t j = 0; j < g.n(); ++j) {
        double scale = 0.0;
        for (int q = 0; q < 3; ++q) {
          scale = std::max(scale, std::abs(jet.derivs[q].values[j]));
        }
        CHECK(std::abs(back.derivs[r].values[j] -
                       jet.derivs[r].values[j]) <= 1e-9 * (scale + 1e-30));
      }
    }
  }
}

TEST_CASE("extraction is linear in the jet", "[modes]") {
  GridSpec g(32, 12.0);
  auto table = synth_table(
      g, {[](double k) { return Complex(1.0 + 0.2 * k, 0); },
          [](double k) { return Complex(-2.0 + 0.1 * k, 0.3); }});
  std::mt19937_64 rng(5);
  JetField ja = random_jet(g, 2, rng);
  JetField jb = random_jet(g, 2, rng);
  const Complex a(0.7, -0.3);
  const Complex b(-1.2, 0.4);
  JetField mix;
  mix.derivs.assign(2, dmodes::make_spectral(g, 0.0));
  for (int r = 0; r < 2; ++r) {
    for (std::size_t j = 0; j < g.n(); ++j) {
      mix.derivs[r].values[j] =
          a * ja.derivs[r].values[j] + b * jb.derivs[r].values[j];
    }
  }
  ModeSet ma = dmodes::extract_modes_M(ja, table);
  ModeSet mb = dmodes::extract_modes_M(jb, table);
  ModeSet mm = dmodes::extract_modes_M(mix, table);
  for (int l = 0; l < 2; ++l) {
    for (std::size_t j = 0; j < g.n(); ++j) {
      const Complex expect =
          a * ma.modes[l].values[j] + b * mb.modes[l].values[j];
      CHECK(std::abs(mm.modes[l].values[j] - expect) <= 1e-12);
    }
  }
}

TEST_CASE("recombination: bitwise at degenerate bins, roundoff elsewhere",
          "[modes]") {
  GridSpec g(64, 2.0 * dmodes::kPi);
  auto table = wave_table(g);  // k = 0 bin is degenerate
  std::mt19937_64 rng(2024);
  const double eps = std::numeric_limits<double>::epsilon();
  for (int trial = 0; trial < 10; ++trial) {
    JetField jet = random_jet(g, 2, rng);
    for (auto ms : {dmodes::extract_modes_2(jet, table),
                    dmodes::extract_modes_M(jet, table)}) {
      SpectralField back = dmodes::recombine(ms);
      for (std::size_t j = 0; j < g.n(); ++j) {
        const Complex want = jet.derivs[0].values[j];
        if (table->degenerate_bin(j)) {
          CHECK(back.values[j].real() == want.real());
          CHECK(back.values[j].imag() == want.imag());
        } else {
          double scale = std::abs(want);
          for (const auto& mode : ms.modes) {
            scale += std::abs(mode.values[j]);
          }
          CHECK(std::abs(back.values[j] - want) <= 4.0 * eps * scale);
        }
      }
    }
  }
}

TEST_CASE("degenerate bins are repaired by a common shift of interpolants",
          "[modes]") {
  // Branches collide at exactly one interior bin; both offending modes must
  // move off their neighbour interpolation by the same constant.
  GridSpec g(16, 16.0);
  const double kd = g.k(5);
  auto table = synth_table(
      g, {[](double) { return Complex(2, 0); },
          [kd](double k) { return k == kd ? Complex(2, 0) : Complex(-1, 0); }});
  REQUIRE(table->degenerate_bin(5));
  REQUIRE_FALSE(table->degenerate_bin(4));

  std::mt19937_64 rng(31);
  JetField jet = random_jet(g, 2, rng);
  ModeSet ms = dmodes::extract_modes_2(jet, table);

  for (int l = 0; l < 2; ++l) {
    const Complex lo = ms.modes[l].values[4];
    const Complex hi = ms.modes[l].values[6];
    const double w = (g.k(5) - g.k(4)) / (g.k(6) - g.k(4));
    const Complex interp = lo + (hi - lo) * w;
    const Complex shift = ms.modes[l].values[5] - interp;
    const Complex other_shift =
        ms.modes[1 - l].values[5] -
        (ms.modes[1 - l].values[4] +
         (ms.modes[1 - l].values[6] - ms.modes[1 - l].values[4]) * w);
    CHECK(std::abs(shift - other_shift) <= 1e-12);
  }
  SpectralField back = dmodes::recombine(ms);
  CHECK(back.values[5].real() == jet.derivs[0].values[5].real());
  CHECK(back.values[5].imag() == jet.derivs[0].values[5].imag());
}

TEST_CASE("edge-bin degeneracy falls back to the nearest clean value",
          "[modes]") {
  GridSpec g(16, 16.0);
  const double k0 = g.k(0);
  auto table = synth_table(
      g, {[](double) { return Complex(1, 0); },
          [k0](double k) { return k == k0 ? Complex(1, 0) : Complex(-2, 0); }});
  REQUIRE(table->degenerate_bin(0));

  std::mt19937_64 rng(131);
  JetField jet = random_jet(g, 2, rng);
  ModeSet ms = dmodes::extract_modes_2(jet, table);
  const Complex shift0 = ms.modes[0].values[0] - ms.modes[0].values[1];
  const Complex shift1 = ms.modes[1].values[0] - ms.modes[1].values[1];
  CHECK(std::abs(shift0 - shift1) <= 1e-12);
  SpectralField back = dmodes::recombine(ms);
  CHECK(back.values[0].real() == jet.derivs[0].values[0].real());
  CHECK(back.values[0].imag() == jet.derivs[0].values[0].imag());
}

TEST_CASE("jet of a single populated mode", "[modes]") {
  GridSpec g(8, 10.0);
  auto table = synth_table(
      g, {[](double) { return Complex(2, 0); },
          [](double) { return Complex(-1, 0); }});
  ModeSet ms{table, {}};
  ms.modes.assign(2, dmodes::make_spectral(g, 0.0));
  std::fill(ms.modes[0].values.begin(), ms.modes[0].values.end(),
            Complex(1, 0));
  JetField jet = dmodes::jet_of_modes(ms);
  for (std::size_t j = 0; j < g.n(); ++j) {
    CHECK(std::abs(jet.derivs[0].values[j] - Complex(1, 0)) <= 1e-14);
    CHECK(std::abs(jet.derivs[1].values[j] - Complex(0, -2)) <= 1e-14);
  }
}

TEST_CASE("mode-set inverse property", "[modes]") {
  GridSpec g(32, 12.0);
  auto table = synth_table(
      g, {[](double k) { return Complex(1.5 + 0.05 * k * k, 0); },
          [](double k) { return Complex(-0.5 - 0.1 * k, -0.2); }});
  std::mt19937_64 rng(77);
  ModeSet ms{table, {}};
  ms.modes.assign(2, dmodes::make_spectral(g, 0.0));
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& mode : ms.modes) {
    for (auto& v : mode.values) v = Complex(dist(rng), dist(rng));
  }
  ModeSet back = dmodes::extract_modes_M(dmodes::jet_of_modes(ms), table);
  for (int l = 0; l < 2; ++l) {
    for (std::size_t j = 0; j < g.n(); ++j) {
      CHECK(std::abs(back.modes[l].values[j] - ms.modes[l].values[j]) <=
            1e-10);
    }
  }
}

TEST_CASE("zero modes give a zero jet and recombination", "[modes]") {
  GridSpec g(16, 8.0);
  auto table = synth_table(
      g, {[](double) { return Complex(1, 0); },
          [](double) { return Complex(-1, 0); }});
  ModeSet ms{table, {}};
  ms.modes.assign(2, dmodes::make_spectral(g, 0.0));
  JetField jet = dmodes::jet_of_modes(ms);
  for (const auto& row : jet.derivs) {
    for (const Complex& v : row.values) {
      CHECK(v.real() == 0.0);
      CHECK(v.imag() == 0.0);
    }
  }
  SpectralField sum = dmodes::recombine(ms);
  CHECK(dmodes::linf_norm(sum.values) == 0.0);
}

TEST_CASE("source-induced changes of a zero particular jet vanish",
          "[modes]") {
  GridSpec g(16, 8.0);
  auto table = wave_table(g);
  JetField zero;
  zero.derivs.assign(2, dmodes::make_spectral(g, 0.0));
  ModeSet ds = dmodes::delta_modes(zero, table);
  for (const auto& mode : ds.modes) {
    CHECK(dmodes::linf_norm(mode.values) == 0.0);
  }
}

TEST_CASE("symmetric branches split a derivative-free particular jet evenly",
          "[modes]") {
  GridSpec g(16, 8.0);
  auto table = synth_table(
      g, {[](double) { return Complex(3, 0); },
          [](double) { return Complex(-3, 0); }});
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  JetField jet;
  jet.derivs.assign(2, dmodes::make_spectral(g, 0.0));
  for (auto& v : jet.derivs[0].values) v = Complex(dist(rng), dist(rng));
  ModeSet ds = dmodes::delta_modes(jet, table);
  for (std::size_t j = 0; j < g.n(); ++j) {
    const Complex half = jet.derivs[0].values[j] * 0.5;
    CHECK(std::abs(ds.modes[0].values[j] - half) <= 1e-13);
    CHECK(std::abs(ds.modes[1].values[j] - half) <= 1e-13);
  }
}

TEST_CASE("mode extraction rejects malformed input", "[modes]") {
  GridSpec g(16, 8.0);
  auto two = synth_table(
      g, {[](double) { return Complex(1, 0); },
          [](double) { return Complex(-1, 0); }});
  auto three = synth_table(
      g, {[](double) { return Complex(1, 0); },
          [](double) { return Complex(2, 0); },
          [](double) { return Complex(3, 0); }});

  std::mt19937_64 rng(1);
  JetField jet2 = random_jet(g, 2, rng);
  CHECK_THROWS_AS(dmodes::extract_modes_2(jet2, three),
                  dmodes::ValidationError);
  CHECK_THROWS_AS(dmodes::extract_modes_M(jet2, three),
                  dmodes::ValidationError);

  JetField mixed = random_jet(g, 2, rng);
  mixed.derivs[1].time = 1.0;
  CHECK_THROWS_AS(dmodes::extract_modes_M(mixed, two),
                  dmodes::ValidationError);

  GridSpec other(32, 8.0);
  JetField wrong_grid = random_jet(other, 2, rng);
  CHECK_THROWS_AS(dmodes::extract_modes_M(wrong_grid, two),
                  dmodes::ValidationError);

  JetField empty;
  CHECK_THROWS_AS(dmodes::extract_modes_M(empty, two),
                  dmodes::ValidationError);
}
