#pragma once

// Result tables and their CSV / JSON serialization.

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

namespace qbattery::cli {

inline constexpr const char* kVersion = "0.1.0";

struct ResultTable {
  std::string experiment;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  nlohmann::json config = nlohmann::json::object();   // effective config, defaults filled in
  nlohmann::json summary = nlohmann::json::object();  // scalar results (argmax, flags, ...)
  std::string version = kVersion;
  double wall_time_s = 0.0;  // JSON only; CSV stays byte-reproducible
  std::size_t numerical_failures = 0;  // rows flagged by the runner

  void add_row(std::vector<double> row) {
    if (row.size() != columns.size())
      throw std::logic_error("ResultTable: row has " + std::to_string(row.size()) + " values for " +
                             std::to_string(columns.size()) + " columns");
    rows.push_back(std::move(row));
  }

  bool operator==(const ResultTable& o) const {
    auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
    if (experiment != o.experiment || columns != o.columns || rows.size() != o.rows.size() || config != o.config ||
        summary != o.summary || version != o.version)
      return false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != o.rows[i].size()) return false;
      for (std::size_t j = 0; j < rows[i].size(); ++j) {
        if (!same(rows[i][j], o.rows[i][j])) return false;
      }
    }
    return true;
  }
};

/// Shortest-safe text for a double: 17 significant digits, '.' decimal point
/// regardless of locale, inf / -inf / nan for non-finite values.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  if (res.ec != std::errc()) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf, res.ptr);
}

/// '#' metadata lines (version, experiment, config, summary), then the header
/// and one line per row. The CLI always writes the metadata.
inline void write_csv(std::ostream& os, const ResultTable& t, bool metadata = true) {
  if (metadata) {
    os << "# qbattery " << t.version << '\n';
    os << "# experiment: " << t.experiment << '\n';
    os << "# config: " << t.config.dump() << '\n';
    os << "# summary: " << t.summary.dump() << '\n';
  }
  for (std::size_t j = 0; j < t.columns.size(); ++j) os << (j ? "," : "") << t.columns[j];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << format_number(row[j]);
    os << '\n';
  }
}

inline nlohmann::json json_number(double x) {
  if (std::isnan(x)) return "NaN";
  if (std::isinf(x)) return x > 0 ? "Infinity" : "-Infinity";
  return x;
}

inline double number_from_json(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "NaN") return std::nan("");
    if (s == "Infinity") return INFINITY;
    if (s == "-Infinity") return -INFINITY;
  }
  throw std::invalid_argument("result table: bad numeric cell " + v.dump());
}

inline nlohmann::json to_json(const ResultTable& t) {
  nlohmann::json j;
  j["metadata"] = {{"version", t.version},
                   {"experiment", t.experiment},
                   {"config", t.config},
                   {"summary", t.summary},
                   {"wall_time_s", t.wall_time_s}};
  j["columns"] = t.columns;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : t.rows) {
    nlohmann::json r = nlohmann::json::array();
    for (double x : row) r.push_back(json_number(x));
    j["rows"].push_back(r);
  }
  return j;
}

inline ResultTable table_from_json(const nlohmann::json& j) {
  ResultTable t;
  const auto& meta = j.at("metadata");
  t.version = meta.at("version").get<std::string>();
  t.experiment = meta.at("experiment").get<std::string>();
  t.config = meta.at("config");
  t.summary = meta.at("summary");
  t.wall_time_s = meta.at("wall_time_s").get<double>();
  t.columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& r : j.at("rows")) {
    std::vector<double> row;
    for (const auto& v : r) row.push_back(number_from_json(v));
    t.add_row(std::move(row));
  }
  return t;
}

inline ResultTable read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return table_from_json(nlohmann::json::parse(in));
}

enum class Format { csv, json };

inline Format format_from_string(const std::string& s) {
  if (s == "csv") return Format::csv;
  if (s == "json") return Format::json;
  throw std::invalid_argument("unknown format '" + s + "' (expected csv or json)");
}

inline void write(std::ostream& os, const ResultTable& t, Format f) {
  if (f == Format::csv) {
    write_csv(os, t);
  } else {
    os << to_json(t).dump(2) << '\n';
  }
}

/// Writes to `path`; failure to open or write is reported as runtime_error.
inline void emit(const ResultTable& t, Format f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file " + path);
  write(out, t, f);
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace qbattery::cli
