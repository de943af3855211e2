#pragma once

// Scenario configuration: the operator, grid, initial jet, optional source
// window, output times, and tolerance overrides that drive a simulation.
// Scenarios load from JSON files; schema violations are reported with
// JSON-pointer-style paths ("/source/T: must be > 0").

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dmodes/common.hpp"
#include "dmodes/csv.hpp"
#include "dmodes/expr.hpp"
#include "dmodes/grid.hpp"
#include "dmodes/operator.hpp"

#include "json.hpp"  // vendored nlohmann/json

namespace dmodes {

// Named numeric tolerances that scenario files and the CLI may override.
struct ToleranceSet {
  double eps_root = 1e-10;        // relative residual bound for branch roots
  double eps_lead_scale = 1e-12;  // leading-coefficient degeneracy scale
  double eps_deg_scale = 1e-9;    // branch-collision threshold scale

  void set(const std::string& key, double value) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw ValidationError("tolerance '" + key +
                            "' must be a positive finite number");
    }
    if (key == "eps_root") {
      eps_root = value;
    } else if (key == "eps_lead_scale") {
      eps_lead_scale = value;
    } else if (key == "eps_deg_scale") {
      eps_deg_scale = value;
    } else {
      throw ValidationError(
          "unknown tolerance key '" + key +
          "' (known: eps_root, eps_lead_scale, eps_deg_scale)");
    }
  }

  std::vector<std::pair<std::string, double>> items() const {
    return {{"eps_root", eps_root},
            {"eps_lead_scale", eps_lead_scale},
            {"eps_deg_scale", eps_deg_scale}};
  }
};

// One field of the initial jet: an analytic expression of (x, t) or a table
// of samples on the scenario grid.
struct FieldSpec {
  enum class Kind { Expression, Samples };
  Kind kind = Kind::Expression;
  Expr expr;
  std::vector<Complex> samples;
  std::string origin;  // expression text or sample-file path

  static FieldSpec expression(Expr e) {
    FieldSpec f;
    f.kind = Kind::Expression;
    f.origin = e.source();
    f.expr = std::move(e);
    return f;
  }
};

// Evaluates a field spec on the grid at a fixed time.
inline SpatialField realize(const FieldSpec& field, const GridSpec& grid,
                            double time) {
  SpatialField u = make_spatial(grid, time);
  if (field.kind == FieldSpec::Kind::Expression) {
    for (std::size_t m = 0; m < grid.n(); ++m) {
      u.values[m] = field.expr(grid.x(m), time);
    }
  } else {
    if (field.samples.size() != grid.n()) {
      throw ValidationError("sampled field has " +
                            std::to_string(field.samples.size()) +
                            " values but the grid has " +
                            std::to_string(grid.n()) + " points");
    }
    u.values = field.samples;
  }
  return u;
}

// Forcing f(x,t), active on the window -T < t < 0 and zero outside it.
// Sampled sources store uniformly spaced time slices spanning [-T, 0] and
// are interpolated in time with a cubic Lagrange stencil.
struct SourceSpec {
  enum class Kind { None, Analytic, Samples };
  Kind kind = Kind::None;
  double duration = 0.0;  // T > 0 when active
  Expr f;
  std::vector<double> sample_times;
  std::vector<std::vector<Complex>> sample_slices;  // [time slice][grid bin]
  std::string origin;

  bool active() const { return kind != Kind::None; }
};

namespace detail {

// Cubic Lagrange weights for query t over four abscissae.
inline void lagrange4(const double* ts, double t, double* w) {
  for (int a = 0; a < 4; ++a) {
    double acc = 1.0;
    for (int b = 0; b < 4; ++b) {
      if (b == a) continue;
      acc *= (t - ts[b]) / (ts[a] - ts[b]);
    }
    w[a] = acc;
  }
}

}  // namespace detail

// Spatial forcing samples at time t. Outside the source window the forcing
// is identically zero (endpoints included in the window).
inline SpatialField forcing_spatial(const SourceSpec& src,
                                    const GridSpec& grid, double t) {
  SpatialField f = make_spatial(grid, t);
  if (!src.active()) return f;
  const double slack = 1e-12 * (1.0 + src.duration);
  if (t < -src.duration - slack || t > slack) return f;

  if (src.kind == SourceSpec::Kind::Analytic) {
    for (std::size_t m = 0; m < grid.n(); ++m) {
      f.values[m] = src.f(grid.x(m), t);
    }
    return f;
  }

  const std::size_t n_slices = src.sample_times.size();
  if (n_slices < 2) {
    throw ValidationError("sampled source needs at least 2 time slices");
  }
  if (n_slices < 4) {
    // Not enough points for a cubic stencil: linear interpolation.
    const double t0 = src.sample_times.front();
    const double t1 = src.sample_times.back();
    const double lam = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    for (std::size_t m = 0; m < grid.n(); ++m) {
      f.values[m] = (1.0 - lam) * src.sample_slices.front()[m] +
                    lam * src.sample_slices.back()[m];
    }
    return f;
  }

  const double dt =
      (src.sample_times.back() - src.sample_times.front()) /
      static_cast<double>(n_slices - 1);
  double pos = (t - src.sample_times.front()) / dt;
  long i0 = static_cast<long>(std::floor(pos)) - 1;
  i0 = std::clamp(i0, 0L, static_cast<long>(n_slices) - 4);
  double w[4];
  detail::lagrange4(src.sample_times.data() + i0, t, w);
  for (std::size_t m = 0; m < grid.n(); ++m) {
    Complex acc(0.0, 0.0);
    for (int a = 0; a < 4; ++a) {
      acc += w[a] * src.sample_slices[static_cast<std::size_t>(i0 + a)][m];
    }
    f.values[m] = acc;
  }
  return f;
}

inline SpectralField forcing_spectrum(const SourceSpec& src,
                                      const GridSpec& grid, double t) {
  return forward(forcing_spatial(src, grid, t));
}

inline std::vector<SpectralField> forcing_spectra(
    const SourceSpec& src, const GridSpec& grid,
    const std::vector<double>& times) {
  std::vector<SpectralField> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(forcing_spectrum(src, grid, t));
  return out;
}

struct Diagnostic {
  enum class Severity { Error, Warning };
  Severity severity = Severity::Error;
  std::string message;
};

struct Scenario {
  std::string name;
  LinearOperator op;
  std::string operator_text;
  GridSpec grid{8, 1.0};
  std::vector<FieldSpec> initial;  // row q: q-th time derivative of u
  SourceSpec source;
  std::vector<double> output_times;
  ToleranceSet tol;
  std::uint64_t content_hash = 0;  // FNV-1a of the scenario file bytes

  // Initial data is given at the opening of the source window, or at t = 0
  // when there is no source.
  double initial_time() const {
    return source.active() ? -source.duration : 0.0;
  }
};

namespace detail {

// Fraction of spectral energy carried by the top eighth of the wavenumber
// band; used by the anti-aliasing check.
inline double high_band_fraction(const SpectralField& s) {
  const long cut = static_cast<long>((7 * s.grid.n()) / 16);
  double total = 0.0;
  double high = 0.0;
  for (std::size_t j = 0; j < s.values.size(); ++j) {
    const double e = std::norm(s.values[j]);
    total += e;
    if (std::labs(s.grid.k_index(j)) >= cut) high += e;
  }
  return total > 0.0 ? high / total : 0.0;
}

}  // namespace detail

// Checks scenario invariants. Errors make the scenario unrunnable; warnings
// flag suspicious but legal configurations (extra derivative fields,
// under-resolved spectra).
inline std::vector<Diagnostic> validate_scenario(const Scenario& s) {
  std::vector<Diagnostic> out;
  const auto error = [&out](std::string msg) {
    out.push_back({Diagnostic::Severity::Error, std::move(msg)});
  };
  const auto warning = [&out](std::string msg) {
    out.push_back({Diagnostic::Severity::Warning, std::move(msg)});
  };

  const int m = s.op.nt;
  const int have = static_cast<int>(s.initial.size());
  if (have < m) {
    for (int q = have; q < m; ++q) {
      error("initial data is missing time derivative " + std::to_string(q) +
            " (operator needs the wave and its first " +
            std::to_string(m - 1) + " derivatives)");
    }
  } else if (have > m) {
    warning("initial data supplies " + std::to_string(have - m) +
            " extra derivative field(s) beyond order " + std::to_string(m - 1) +
            "; they are ignored");
  }

  if (s.source.active() && !(s.source.duration > 0.0)) {
    error("source duration T must be > 0");
  }
  for (std::size_t q = 1; q < s.output_times.size(); ++q) {
    if (s.output_times[q] < s.output_times[q - 1]) {
      error("output_times must be sorted ascending (entry " +
            std::to_string(q) + " decreases)");
      break;
    }
  }

  for (std::size_t q = 0; q < s.initial.size(); ++q) {
    const FieldSpec& f = s.initial[q];
    if (f.kind == FieldSpec::Kind::Samples && f.samples.size() != s.grid.n()) {
      error("initial field " + std::to_string(q) + " has " +
            std::to_string(f.samples.size()) + " samples but the grid has " +
            std::to_string(s.grid.n()) + " points");
    }
  }

  // Anti-aliasing: phase-exact propagation assumes the truncated band is
  // empty, so flag any input carrying more than 1e-10 of its energy there.
  const double t0 = s.initial_time();
  for (std::size_t q = 0; q < s.initial.size() && static_cast<int>(q) < m;
       ++q) {
    double frac = 0.0;
    try {
      frac = detail::high_band_fraction(forward(realize(s.initial[q], s.grid, t0)));
    } catch (const ValidationError&) {
      continue;  // shape errors are reported above
    }
    if (frac > 1e-10) {
      std::ostringstream msg;
      msg << "initial field " << q << " carries " << frac
          << " of its spectral energy in the top eighth of the wavenumber "
             "band; increase grid.n or smooth the data";
      warning(msg.str());
    }
  }
  if (s.source.active() && s.source.duration > 0.0) {
    double frac = 0.0;
    for (int q = 0; q <= 8; ++q) {
      const double t = -s.source.duration +
                       (static_cast<double>(q) / 8.0) * s.source.duration;
      frac = std::max(frac,
                      detail::high_band_fraction(
                          forcing_spectrum(s.source, s.grid, t)));
    }
    if (frac > 1e-10) {
      std::ostringstream msg;
      msg << "source carries " << frac
          << " of its spectral energy in the top eighth of the wavenumber "
             "band; increase grid.n or smooth the forcing";
      warning(msg.str());
    }
  }
  return out;
}

namespace detail {

using nlohmann::json;

[[noreturn]] inline void schema_fail(const std::string& ptr,
                                     const std::string& msg) {
  throw ValidationError(ptr + ": " + msg);
}

inline const json& require_key(const json& obj, const std::string& ptr,
                               const std::string& key) {
  if (!obj.is_object()) schema_fail(ptr, "must be an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_fail(ptr + "/" + key, "is required");
  return *it;
}

inline double require_number(const json& v, const std::string& ptr) {
  if (!v.is_number()) schema_fail(ptr, "must be a number");
  return v.get<double>();
}

inline std::string require_string(const json& v, const std::string& ptr) {
  if (!v.is_string()) schema_fail(ptr, "must be a string");
  return v.get<std::string>();
}

inline void reject_unknown_keys(const json& obj, const std::string& ptr,
                                std::initializer_list<const char*> known) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : known) {
      if (item.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) schema_fail(ptr + "/" + item.key(), "unknown key");
  }
}

inline std::string dirname_of(const std::string& path) {
  const std::size_t slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string(".")
                                    : path.substr(0, slash);
}

inline Expr compile_expr(const std::string& text, const std::string& ptr,
                         const std::map<std::string, Complex>& params) {
  try {
    return Expr::compile(text, params);
  } catch (const ValidationError& e) {
    schema_fail(ptr, std::string("expression error: ") + e.what());
  }
}

// Field spec: either an expression string or {"file": "samples.csv"} with
// columns x,re,im matching the scenario grid.
inline FieldSpec parse_field(const json& v, const std::string& ptr,
                             const std::string& dir, const GridSpec& grid,
                             const std::map<std::string, Complex>& params) {
  FieldSpec field;
  if (v.is_string()) {
    field.kind = FieldSpec::Kind::Expression;
    field.origin = v.get<std::string>();
    field.expr = compile_expr(field.origin, ptr, params);
    return field;
  }
  if (!v.is_object()) {
    schema_fail(ptr, "must be an expression string or {\"file\": path}");
  }
  reject_unknown_keys(v, ptr, {"file"});
  const std::string rel =
      require_string(require_key(v, ptr, "file"), ptr + "/file");
  const std::string path = dir + "/" + rel;
  const csv::Table table = csv::read_table(path);
  const std::size_t cx = table.column("x");
  const std::size_t cre = table.column("re");
  const std::size_t cim = table.column("im");
  if (table.rows.size() != grid.n()) {
    schema_fail(ptr, path + " has " + std::to_string(table.rows.size()) +
                         " rows but the grid has " + std::to_string(grid.n()) +
                         " points");
  }
  field.kind = FieldSpec::Kind::Samples;
  field.origin = rel;
  field.samples.resize(grid.n());
  const double xtol = 1e-9 * grid.length();
  for (std::size_t m = 0; m < grid.n(); ++m) {
    if (std::abs(table.rows[m][cx] - grid.x(m)) > xtol) {
      schema_fail(ptr, path + " row " + std::to_string(m + 2) +
                           ": x does not match the scenario grid");
    }
    field.samples[m] = Complex(table.rows[m][cre], table.rows[m][cim]);
  }
  return field;
}

// Sampled source file: long-format CSV with columns t,x,re,im, grouped into
// uniformly spaced time slices spanning exactly [-T, 0].
inline void parse_source_samples(SourceSpec& src, const std::string& path,
                                 const std::string& ptr,
                                 const GridSpec& grid) {
  const csv::Table table = csv::read_table(path);
  const std::size_t ct = table.column("t");
  const std::size_t cx = table.column("x");
  const std::size_t cre = table.column("re");
  const std::size_t cim = table.column("im");
  const std::size_t n = grid.n();
  if (table.rows.empty() || table.rows.size() % n != 0) {
    schema_fail(ptr, path + ": row count must be a positive multiple of grid.n");
  }
  const std::size_t slices = table.rows.size() / n;
  if (slices < 2) schema_fail(ptr, path + ": needs at least 2 time slices");

  const double xtol = 1e-9 * grid.length();
  src.sample_times.resize(slices);
  src.sample_slices.assign(slices, std::vector<Complex>(n));
  for (std::size_t i = 0; i < slices; ++i) {
    const std::size_t base = i * n;
    src.sample_times[i] = table.rows[base][ct];
    for (std::size_t m = 0; m < n; ++m) {
      const auto& row = table.rows[base + m];
      if (std::abs(row[ct] - src.sample_times[i]) >
          1e-9 * (1.0 + src.duration)) {
        schema_fail(ptr, path + " row " + std::to_string(base + m + 2) +
                             ": time slices must be contiguous blocks");
      }
      if (std::abs(row[cx] - grid.x(m)) > xtol) {
        schema_fail(ptr, path + " row " + std::to_string(base + m + 2) +
                             ": x does not match the scenario grid");
      }
      src.sample_slices[i][m] = Complex(row[cre], row[cim]);
    }
  }
  const double ttol = 1e-9 * (1.0 + src.duration);
  if (std::abs(src.sample_times.front() + src.duration) > ttol ||
      std::abs(src.sample_times.back()) > ttol) {
    schema_fail(ptr, path + ": sample times must span [-T, 0]");
  }
  const double dt = (src.sample_times.back() - src.sample_times.front()) /
                    static_cast<double>(slices - 1);
  for (std::size_t i = 1; i < slices; ++i) {
    if (std::abs(src.sample_times[i] - src.sample_times[i - 1] - dt) > ttol) {
      schema_fail(ptr, path + ": sample times must be uniformly spaced");
    }
  }
}

inline Scenario load_scenario_json(const json& doc, const std::string& dir) {
  if (!doc.is_object()) schema_fail("", "top level must be an object");
  reject_unknown_keys(doc, "",
                      {"name", "description", "operator", "grid", "initial",
                       "source", "output_times", "tolerances"});

  Scenario s;
  if (doc.contains("name")) {
    s.name = require_string(doc["name"], "/name");
  }

  // Operator: "u_tt = ..." or {"text": ..., "params": {...}}.
  const json& jop = require_key(doc, "", "operator");
  std::map<std::string, Complex> params;
  if (jop.is_string()) {
    s.operator_text = jop.get<std::string>();
  } else if (jop.is_object()) {
    reject_unknown_keys(jop, "/operator", {"text", "params"});
    s.operator_text =
        require_string(require_key(jop, "/operator", "text"), "/operator/text");
    if (jop.contains("params")) {
      const json& jp = jop["params"];
      if (!jp.is_object()) schema_fail("/operator/params", "must be an object");
      for (const auto& item : jp.items()) {
        params[item.key()] = Complex(
            require_number(item.value(), "/operator/params/" + item.key()),
            0.0);
      }
    }
  } else {
    schema_fail("/operator", "must be a string or {text, params}");
  }
  try {
    s.op = parse_operator(s.operator_text, params);
  } catch (const ValidationError& e) {
    schema_fail("/operator", e.what());
  }

  const json& jgrid = require_key(doc, "", "grid");
  reject_unknown_keys(jgrid, "/grid", {"n", "length"});
  const json& jn = require_key(jgrid, "/grid", "n");
  if (!jn.is_number_integer() && !jn.is_number_unsigned()) {
    schema_fail("/grid/n", "must be an integer");
  }
  const long long n = jn.get<long long>();
  if (n < 8) schema_fail("/grid/n", "must be a power of two with N >= 8");
  const double length =
      require_number(require_key(jgrid, "/grid", "length"), "/grid/length");
  try {
    s.grid = GridSpec(static_cast<std::size_t>(n), length);
  } catch (const ValidationError& e) {
    schema_fail("/grid", e.what());
  }

  // Source first: its window fixes the initial time.
  if (doc.contains("source")) {
    const json& jsrc = doc["source"];
    reject_unknown_keys(jsrc, "/source", {"f", "T"});
    const double T =
        require_number(require_key(jsrc, "/source", "T"), "/source/T");
    if (!(T > 0.0) || !std::isfinite(T)) {
      schema_fail("/source/T", "must be > 0");
    }
    s.source.duration = T;
    const json& jf = require_key(jsrc, "/source", "f");
    if (jf.is_string()) {
      s.source.kind = SourceSpec::Kind::Analytic;
      s.source.origin = jf.get<std::string>();
      s.source.f = compile_expr(s.source.origin, "/source/f", params);
    } else if (jf.is_object()) {
      reject_unknown_keys(jf, "/source/f", {"file"});
      const std::string rel = require_string(
          require_key(jf, "/source/f", "file"), "/source/f/file");
      s.source.kind = SourceSpec::Kind::Samples;
      s.source.origin = rel;
      parse_source_samples(s.source, dir + "/" + rel, "/source/f", s.grid);
    } else {
      schema_fail("/source/f", "must be an expression string or {\"file\": path}");
    }
  }

  const json& jinit = require_key(doc, "", "initial");
  reject_unknown_keys(jinit, "/initial", {"u", "dudt"});
  s.initial.push_back(parse_field(require_key(jinit, "/initial", "u"),
                                  "/initial/u", dir, s.grid, params));
  if (jinit.contains("dudt")) {
    const json& jd = jinit["dudt"];
    if (jd.is_array()) {
      for (std::size_t q = 0; q < jd.size(); ++q) {
        s.initial.push_back(parse_field(jd[q],
                                        "/initial/dudt/" + std::to_string(q),
                                        dir, s.grid, params));
      }
    } else {
      s.initial.push_back(
          parse_field(jd, "/initial/dudt", dir, s.grid, params));
    }
  }

  const json& jtimes = require_key(doc, "", "output_times");
  if (!jtimes.is_array()) schema_fail("/output_times", "must be an array");
  for (std::size_t q = 0; q < jtimes.size(); ++q) {
    s.output_times.push_back(
        require_number(jtimes[q], "/output_times/" + std::to_string(q)));
  }
  for (std::size_t q = 1; q < s.output_times.size(); ++q) {
    if (s.output_times[q] < s.output_times[q - 1]) {
      schema_fail("/output_times", "must be sorted ascending");
    }
  }

  if (doc.contains("tolerances")) {
    const json& jtol = doc["tolerances"];
    if (!jtol.is_object()) schema_fail("/tolerances", "must be an object");
    for (const auto& item : jtol.items()) {
      try {
        s.tol.set(item.key(),
                  require_number(item.value(), "/tolerances/" + item.key()));
      } catch (const ValidationError& e) {
        schema_fail("/tolerances/" + item.key(), e.what());
      }
    }
  }
  return s;
}

}  // namespace detail

// Loads and fully resolves a scenario file. Throws ValidationError with the
// file path and a JSON-pointer-style location on any schema violation.
inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot open scenario file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": JSON parse error: " + e.what());
  }
  try {
    Scenario s = detail::load_scenario_json(doc, detail::dirname_of(path));
    s.content_hash = fnv1a64(bytes);
    if (s.name.empty()) {
      std::string stem = path.substr(path.find_last_of('/') + 1);
      const std::size_t dot = stem.find_last_of('.');
      if (dot != std::string::npos) stem.resize(dot);
      s.name = stem;
    }
    return s;
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace dmodes
