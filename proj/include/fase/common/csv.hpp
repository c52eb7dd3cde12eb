#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fase/common/error.hpp"

namespace fase::csv {

// Shortest representation that parses back to the same double.
inline std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep))
    out.push_back(cell);
  if (!line.empty() && line.back() == sep)
    out.emplace_back();
  return out;
}

inline double to_double(const std::string& s, const std::string& context) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ')
    ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || ptr != e)
    throw SchemaError(context + ": expected a number, got '" + s + "'");
  return v;
}

/// A parsed CSV file with a mandatory header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string source;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name)
        return i;
    throw SchemaError(source + ": missing column '" + name + "'");
  }

  double number(std::size_t row, std::size_t col) const {
    return to_double(rows[row][col], source + " line " + std::to_string(row + 2));
  }
};

inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw SchemaError("cannot open '" + path + "'");
  Table t;
  t.source = path;
  std::string line;
  if (!std::getline(in, line))
    throw SchemaError(path + ": empty file (header row expected)");
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    auto cells = split(line);
    if (cells.size() != t.header.size())
      throw SchemaError(path + " line " + std::to_string(lineno) + ": expected " +
                        std::to_string(t.header.size()) + " fields, got " +
                        std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline void require_header(const Table& t, const std::vector<std::string>& expected) {
  if (t.header != expected) {
    std::string want;
    for (const auto& h : expected)
      want += (want.empty() ? "" : ",") + h;
    throw SchemaError(t.source + ": header must be '" + want + "'");
  }
}

class Writer {
public:
  explicit Writer(const std::string& path) : out_(path) {
    if (!out_)
      throw Error("cannot write '" + path + "'");
  }

  template <class... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }

private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double v) { return fmt(v); }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I v) { return std::to_string(v); }

  std::ofstream out_;
};

} // namespace fase::csv
