#pragma once

// File emission and parsing.  All numeric output is shortest-round-trip
// formatted (format.hpp), newlines are always LF, and JSON objects preserve
// insertion order, so a given configuration produces byte-identical files on
// every run.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "epl/counts.hpp"
#include "epl/errors.hpp"
#include "epl/format.hpp"
#include "epl/polcalc.hpp"

namespace epl::io {

using counts::CountRecord;
using counts::CountSetting;
using ordered_json = nlohmann::ordered_json;

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_file: cannot open " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write_file: write failed for " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_file: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// CSV primitives
// ---------------------------------------------------------------------------

namespace detail {

inline void check_field(std::string_view field) {
  if (field.find(',') != std::string_view::npos || field.find('\n') != std::string_view::npos)
    throw std::invalid_argument("csv: field may not contain ',' or newline: '" +
                                std::string(field) + "'");
}

inline std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::vector<std::string>> parse_csv(std::string_view text,
                                                       const std::string& expected_header) {
  auto lines = split(text, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw std::runtime_error("csv: empty file");
  if (lines.front() != expected_header)
    throw std::runtime_error("csv: header mismatch, expected '" + expected_header + "' got '" +
                             lines.front() + "'");
  std::vector<std::vector<std::string>> rows;
  const std::size_t n_cols = split(expected_header, ',').size();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto fields = split(lines[i], ',');
    if (fields.size() != n_cols)
      throw std::runtime_error("csv: row " + std::to_string(i) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(n_cols));
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Count records
// ---------------------------------------------------------------------------

inline constexpr const char* kCountRecordHeader =
    "setting_label,theta_s_deg,theta_i_deg,duration_s,n_signal,n_idler,n_coinc";

// Serialize count records.  Analyzer settings carry their Bloch-plane angles;
// computational and explicit-projector settings leave the angle cells empty
// (their meaning is carried by the label and any companion settings file).
inline std::string count_records_csv(std::span<const CountRecord> records) {
  std::string out(kCountRecordHeader);
  out += '\n';
  for (const auto& rec : records) {
    detail::check_field(rec.setting.label);
    out += rec.setting.label;
    out += ',';
    if (const auto* a = rec.setting.angles()) {
      out += format_double(a->theta_s_deg);
      out += ',';
      out += format_double(a->theta_i_deg);
    } else {
      out += ',';
    }
    out += ',';
    out += format_double(rec.duration_s);
    out += ',';
    out += format_uint(rec.n_signal);
    out += ',';
    out += format_uint(rec.n_idler);
    out += ',';
    out += format_uint(rec.n_coinc);
    out += '\n';
  }
  return out;
}

// Parse records back.  Angle cells restore an analyzer setting; empty cells
// restore a label-only (computational) setting.
inline std::vector<CountRecord> parse_count_records_csv(std::string_view text) {
  const auto rows = detail::parse_csv(text, kCountRecordHeader);
  std::vector<CountRecord> records;
  records.reserve(rows.size());
  for (const auto& row : rows) {
    CountRecord rec;
    const bool has_s = !row[1].empty();
    const bool has_i = !row[2].empty();
    if (has_s != has_i)
      throw std::runtime_error("count records: exactly one of theta_s/theta_i is empty");
    if (has_s) {
      rec.setting = CountSetting::analyzers(row[0], parse_double(row[1], "theta_s_deg"),
                                            parse_double(row[2], "theta_i_deg"));
    } else {
      rec.setting = CountSetting{row[0], std::monostate{}};
    }
    rec.duration_s = parse_double(row[3], "duration_s");
    rec.n_signal = parse_uint(row[4], "n_signal");
    rec.n_idler = parse_uint(row[5], "n_idler");
    rec.n_coinc = parse_uint(row[6], "n_coinc");
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Per-experiment CSV tables
// ---------------------------------------------------------------------------

struct RatesRow {
  double power_mw = 0.0;
  std::uint64_t n_signal = 0;
  std::uint64_t n_idler = 0;
  std::uint64_t coincidence = 0;
};

inline constexpr const char* kRatesHeader = "power_mw,n_signal,n_idler,coincidence";

inline std::string rates_csv(std::span<const RatesRow> rows) {
  std::string out(kRatesHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += format_double(r.power_mw);
    out += ',';
    out += format_uint(r.n_signal);
    out += ',';
    out += format_uint(r.n_idler);
    out += ',';
    out += format_uint(r.coincidence);
    out += '\n';
  }
  return out;
}

inline std::vector<RatesRow> parse_rates_csv(std::string_view text) {
  const auto raw = detail::parse_csv(text, kRatesHeader);
  std::vector<RatesRow> rows;
  for (const auto& r : raw)
    rows.push_back({parse_double(r[0], "power_mw"), parse_uint(r[1], "n_signal"),
                    parse_uint(r[2], "n_idler"), parse_uint(r[3], "coincidence")});
  return rows;
}

struct HeraldingRow {
  double power_mw = 0.0;
  double eta_signal = 0.0;
  double eta_idler = 0.0;
};

inline constexpr const char* kHeraldingHeader = "power_mw,eta_signal,eta_idler";

inline std::string heralding_csv(std::span<const HeraldingRow> rows) {
  std::string out(kHeraldingHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += format_double(r.power_mw);
    out += ',';
    out += format_double(r.eta_signal);
    out += ',';
    out += format_double(r.eta_idler);
    out += '\n';
  }
  return out;
}

inline std::vector<HeraldingRow> parse_heralding_csv(std::string_view text) {
  const auto raw = detail::parse_csv(text, kHeraldingHeader);
  std::vector<HeraldingRow> rows;
  for (const auto& r : raw)
    rows.push_back({parse_double(r[0], "power_mw"), parse_double(r[1], "eta_signal"),
                    parse_double(r[2], "eta_idler")});
  return rows;
}

struct PgrRow {
  double power_mw = 0.0;
  double pgr = 0.0;
};

inline constexpr const char* kPgrHeader = "power_mw,pgr";

inline std::string pgr_csv(std::span<const PgrRow> rows) {
  std::string out(kPgrHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += format_double(r.power_mw);
    out += ',';
    out += format_double(r.pgr);
    out += '\n';
  }
  return out;
}

inline std::vector<PgrRow> parse_pgr_csv(std::string_view text) {
  const auto raw = detail::parse_csv(text, kPgrHeader);
  std::vector<PgrRow> rows;
  for (const auto& r : raw) rows.push_back({parse_double(r[0], "power_mw"), parse_double(r[1], "pgr")});
  return rows;
}

struct FringeRow {
  double theta_s = 0.0;  // in the configured angle convention
  double theta_i = 0.0;
  std::uint64_t coincidence = 0;
  double fit_value = 0.0;  // fitted curve evaluated at theta_i
};

inline constexpr const char* kFringeHeader = "theta_s,theta_i,coincidence,fit_value";

inline std::string fringe_csv(std::span<const FringeRow> rows) {
  std::string out(kFringeHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += format_double(r.theta_s);
    out += ',';
    out += format_double(r.theta_i);
    out += ',';
    out += format_uint(r.coincidence);
    out += ',';
    out += format_double(r.fit_value);
    out += '\n';
  }
  return out;
}

inline std::vector<FringeRow> parse_fringe_csv(std::string_view text) {
  const auto raw = detail::parse_csv(text, kFringeHeader);
  std::vector<FringeRow> rows;
  for (const auto& r : raw)
    rows.push_back({parse_double(r[0], "theta_s"), parse_double(r[1], "theta_i"),
                    parse_uint(r[2], "coincidence"), parse_double(r[3], "fit_value")});
  return rows;
}

struct FidelityMatrixRow {
  std::string input;
  double phi_plus = 0.0;
  double phi_minus = 0.0;
  double psi_plus = 0.0;
  double psi_minus = 0.0;
};

inline constexpr const char* kFidelityMatrixHeader = "input,phi_plus,phi_minus,psi_plus,psi_minus";

inline std::string fidelity_matrix_csv(std::span<const FidelityMatrixRow> rows) {
  std::string out(kFidelityMatrixHeader);
  out += '\n';
  for (const auto& r : rows) {
    detail::check_field(r.input);
    out += r.input;
    out += ',';
    out += format_double(r.phi_plus);
    out += ',';
    out += format_double(r.phi_minus);
    out += ',';
    out += format_double(r.psi_plus);
    out += ',';
    out += format_double(r.psi_minus);
    out += '\n';
  }
  return out;
}

inline std::vector<FidelityMatrixRow> parse_fidelity_matrix_csv(std::string_view text) {
  const auto raw = detail::parse_csv(text, kFidelityMatrixHeader);
  std::vector<FidelityMatrixRow> rows;
  for (const auto& r : raw)
    rows.push_back({r[0], parse_double(r[1], "phi_plus"), parse_double(r[2], "phi_minus"),
                    parse_double(r[3], "psi_plus"), parse_double(r[4], "psi_minus")});
  return rows;
}

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

// Density matrix as a row-major nested array of [re, im] pairs.
inline ordered_json density_to_json(const Mat& rho) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < rho.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < rho.cols(); ++c)
      row.push_back(ordered_json::array({rho(r, c).real(), rho(r, c).imag()}));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat density_from_json(const ordered_json& j) {
  if (!j.is_array() || j.empty()) throw std::runtime_error("density_from_json: expected array");
  const auto n = static_cast<Eigen::Index>(j.size());
  Mat rho(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
      throw std::runtime_error("density_from_json: ragged matrix");
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto& cell = row.at(static_cast<std::size_t>(c));
      if (!cell.is_array() || cell.size() != 2)
        throw std::runtime_error("density_from_json: cell must be [re, im]");
      rho(r, c) = cd(cell.at(0).get<double>(), cell.at(1).get<double>());
    }
  }
  return rho;
}

inline std::string dump_json(const ordered_json& j) { return j.dump(2) + "\n"; }

inline ordered_json parse_json(std::string_view text) {
  return ordered_json::parse(text.begin(), text.end());
}

}  // namespace epl::io
