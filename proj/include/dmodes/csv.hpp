#pragma once

// Deterministic CSV serialization for fields and dispersion tables, plus a
// small reader for sample-table inputs. All floats are written as
// 17-significant-digit scientific notation with '.' as the decimal
// separator and LF line endings, so reruns of identical inputs produce
// byte-identical files on every platform.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dmodes/common.hpp"
#include "dmodes/dispersion.hpp"
#include "dmodes/grid.hpp"

namespace dmodes {
namespace csv {

inline std::string format_e17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.16e", v);
  return std::string(buf);
}

// Writes content to path via a temporary file and an atomic rename, so a
// failure mid-write never leaves a partial artifact behind.
inline void write_text_atomic(const std::string& path,
                              const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw ValidationError("cannot open for writing: " + tmp);
    }
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw ValidationError("write failed: " + tmp);
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw ValidationError("cannot rename " + tmp + " to " + path);
  }
}

inline std::string render_spatial(const SpatialField& u) {
  std::string out = "x,re,im\n";
  for (std::size_t m = 0; m < u.values.size(); ++m) {
    out += format_e17(u.grid.x(m));
    out += ',';
    out += format_e17(u.values[m].real());
    out += ',';
    out += format_e17(u.values[m].imag());
    out += '\n';
  }
  return out;
}

inline std::string render_spectral(const SpectralField& s) {
  std::string out = "k,re,im\n";
  for (std::size_t j = 0; j < s.values.size(); ++j) {
    out += format_e17(s.grid.k(j));
    out += ',';
    out += format_e17(s.values[j].real());
    out += ',';
    out += format_e17(s.values[j].imag());
    out += '\n';
  }
  return out;
}

/// One row per wavenumber bin: k followed by the real and imaginary parts of
// every branch frequency, branches numbered from 1.
inline std::string render_dispersion(const DispersionTable& t) {
  std::string out = "k";
  for (int l = 0; l < t.branches(); ++l) {
    out += ",re_omega_" + std::to_string(l + 1) + ",im_omega_" +
           std::to_string(l + 1);
  }
  out += '\n';
  for (std::size_t j = 0; j < t.k.size(); ++j) {
    out += format_e17(t.k[j]);
    for (int l = 0; l < t.branches(); ++l) {
      out += ',';
      out += format_e17(t.omega[l][j].real());
      out += ',';
      out += format_e17(t.omega[l][j].imag());
    }
    out += '\n';
  }
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return c;
    }
    throw ValidationError("CSV is missing a '" + name + "' column");
  }
};

inline Table read_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot open CSV file: " + path);
  }
  Table table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(
          start, comma == std::string::npos ? comma : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (lineno == 1) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": expected " +
                            std::to_string(table.header.size()) +
                            " columns, got " + std::to_string(cells.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const char* s = cells[c].c_str();
      char* end = nullptr;
      row[c] = std::strtod(s, &end);
      if (end == s || *end != '\0') {
        throw ValidationError(path + ":" + std::to_string(lineno) +
                              ": cannot parse '" + cells[c] + "' as a number");
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) {
    throw ValidationError(path + ": empty CSV file");
  }
  return table;
}

}  // namespace csv
}  // namespace dmodes
