#ifndef MECHENT_CSV_HPP
#define MECHENT_CSV_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "mechent/core.hpp"

namespace mechent {

inline constexpr const char* kCsvMagic = "# mechent-csv v1";

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  /// run configuration, re-readable as a config file
  std::vector<std::pair<std::string, std::string>> config;
  /// derived metadata, written as "# @key: value"
  std::vector<std::pair<std::string, std::string>> meta;

  static std::string cell(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  void add_row(std::vector<std::string> r) {
    if (r.size() != columns.size()) throw Error("csv row width does not match the header");
    rows.push_back(std::move(r));
  }

  void add_row(const std::vector<double>& r) {
    std::vector<std::string> s;
    s.reserve(r.size());
    for (double v : r) s.push_back(cell(v));
    add_row(std::move(s));
  }

  std::string str() const {
    std::string out = std::string(kCsvMagic) + "\n";
    for (const auto& [k, v] : config) out += "# " + k + " = " + v + "\n";
    for (const auto& [k, v] : meta) out += "# @" + k + ": " + v + "\n";
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += quote(cells[i]);
      }
      out += "\r\n";
    };
    line(columns);
    for (const auto& r : rows) line(r);
    return out;
  }

  void write(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f << str();
    if (!f) throw Error("write failed: " + path.string());
  }

private:
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }
};

}  // namespace mechent

#endif  // MECHENT_CSV_HPP
