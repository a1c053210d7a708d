#pragma once

// File formats.
//
// Density matrices: JSON {"window": {...}, "entries": [[[re, im], ...], ...]}
// with re/im as decimal strings of 17 significant digits (exact round trip).
// Spectrograms: CSV, header "sideband,<theta_0>,<theta_1>,...", one row per
// sideband index.  Every number is written with %.17g.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "squirrels/error.hpp"
#include "squirrels/forward.hpp"
#include "squirrels/reconstruction.hpp"

namespace squirrels {

using Json = nlohmann::ordered_json;

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ValidationError(where + ": not a number: '" + s + "'");
  return v;
}

// ---------------------------------------------------------------------------
// Windows, couplings, density matrices

inline Json window_to_json(const SidebandWindow& w) {
  return Json{{"n_min", w.n_min}, {"n_max", w.n_max}, {"support_stride", w.support_stride}};
}

inline Json density_to_json(const DensityMatrix& rho) {
  Json rows = Json::array();
  for (Eigen::Index k = 0; k < rho.entries.rows(); ++k) {
    Json row = Json::array();
    for (Eigen::Index l = 0; l < rho.entries.cols(); ++l)
      row.push_back(Json::array({format_double(rho.entries(k, l).real()), format_double(rho.entries(k, l).imag())}));
    rows.push_back(std::move(row));
  }
  return Json{{"window", window_to_json(rho.window)}, {"entries", std::move(rows)}};
}

namespace detail {

inline const Json& member(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(path + "." + key + ": missing");
  return j.at(key);
}

inline double number_at(const Json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_double(j.get<std::string>(), path);
  throw ValidationError(path + ": expected a number");
}

inline int integer_at(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ValidationError(path + ": expected an integer");
  return j.get<int>();
}

}  // namespace detail

inline SidebandWindow window_from_json(const Json& j, const std::string& path = "$.window") {
  if (!j.is_object()) throw ValidationError(path + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (key != "n_min" && key != "n_max" && key != "support_stride")
      throw ValidationError(path + "." + key + ": unknown key");
  SidebandWindow w;
  w.n_min = detail::integer_at(detail::member(j, "n_min", path), path + ".n_min");
  w.n_max = detail::integer_at(detail::member(j, "n_max", path), path + ".n_max");
  w.support_stride = j.contains("support_stride") ? detail::integer_at(j.at("support_stride"), path + ".support_stride") : 1;
  w.validate();
  return w;
}

inline DensityMatrix density_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("$: expected a density-matrix object");
  const SidebandWindow w = window_from_json(detail::member(j, "window", "$"));
  const Json& rows = detail::member(j, "entries", "$");
  if (!rows.is_array() || static_cast<int>(rows.size()) != w.size())
    throw ValidationError("$.entries: expected " + std::to_string(w.size()) + " rows");
  DensityMatrix rho = DensityMatrix::zero(w);
  for (int k = 0; k < w.size(); ++k) {
    const Json& row = rows[static_cast<std::size_t>(k)];
    const std::string rp = "$.entries[" + std::to_string(k) + "]";
    if (!row.is_array() || static_cast<int>(row.size()) != w.size())
      throw ValidationError(rp + ": expected " + std::to_string(w.size()) + " entries");
    for (int l = 0; l < w.size(); ++l) {
      const Json& e = row[static_cast<std::size_t>(l)];
      const std::string ep = rp + "[" + std::to_string(l) + "]";
      if (!e.is_array() || e.size() != 2) throw ValidationError(ep + ": expected [re, im]");
      rho.entries(k, l) = Complex(detail::number_at(e[0], ep + "[0]"), detail::number_at(e[1], ep + "[1]"));
    }
  }
  return rho;
}

// ---------------------------------------------------------------------------
// Spectrogram CSV

inline std::string spectrogram_to_csv(const Spectrogram& s) {
  std::string out = "sideband";
  for (double t : s.theta_grid) out += "," + format_double(t);
  out += "\n";
  for (int r = 0; r < s.rows(); ++r) {
    out += std::to_string(s.window.index_at(r));
    for (int c = 0; c < s.columns(); ++c) out += "," + format_double(s.populations(r, c));
    out += "\n";
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::vector<std::vector<std::string>> read_csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

}  // namespace detail

/// Parses a spectrogram CSV.  Sideband indices must be consecutive; the probe
/// is not stored in the file and is left at |g| = 0.
inline Spectrogram spectrogram_from_csv(const std::string& text) {
  const auto rows = detail::read_csv_rows(text);
  if (rows.size() < 2) throw ValidationError("spectrogram csv: need a header and at least one row");
  const auto& header = rows.front();
  if (header.size() < 2 || header[0] != "sideband")
    throw ValidationError("spectrogram csv: header must start with 'sideband'");
  Spectrogram s;
  for (std::size_t c = 1; c < header.size(); ++c)
    s.theta_grid.push_back(parse_double(header[c], "spectrogram csv header column " + std::to_string(c)));
  const int n_rows = static_cast<int>(rows.size()) - 1;
  s.populations = RMatrix(n_rows, static_cast<Eigen::Index>(s.theta_grid.size()));
  int first = 0;
  for (int r = 0; r < n_rows; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r + 1)];
    const std::string where = "spectrogram csv line " + std::to_string(r + 2);
    if (row.size() != header.size()) throw ValidationError(where + ": expected " + std::to_string(header.size()) + " cells");
    const double idx = parse_double(row[0], where + " sideband");
    if (idx != std::floor(idx)) throw ValidationError(where + ": sideband index must be an integer");
    if (r == 0) first = static_cast<int>(idx);
    if (static_cast<int>(idx) != first + r) throw ValidationError(where + ": sideband indices must be consecutive");
    for (std::size_t c = 1; c < row.size(); ++c)
      s.populations(r, static_cast<Eigen::Index>(c - 1)) = parse_double(row[c], where);
  }
  s.window = SidebandWindow{first, first + n_rows - 1, 1};
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Reports

inline Json report_to_json(const ReconstructionReport& r) {
  Json j;
  j["alpha"] = r.alpha_selected;
  j["delta"] = r.delta;
  j["snr"] = r.snr;
  j["converged"] = r.converged;
  j["residual_history"] = r.residual_history;
  j["flat_discrepancy_curve"] = r.selection.flat;
  j["alpha_grid"] = r.selection.grid;
  j["grid_residuals"] = r.selection.residuals;
  j["residual_at_alpha"] = r.selection.residual_at_alpha;
  j["monotonicity_slack"] = r.selection.monotonicity_slack;
  const auto inv = r.rho_hat.invariants();
  j["invariants"] = Json{{"hermiticity_error", inv.hermiticity_error},
                         {"trace_error", inv.trace_error},
                         {"min_eigenvalue", inv.min_eigenvalue}};
  return j;
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ValidationError("write to '" + path + "' failed");
}

inline Json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(what + ": malformed JSON (" + e.what() + ")");
  }
}

}  // namespace squirrels
