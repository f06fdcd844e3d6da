#pragma once

#include <charconv>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "aqi/error.hpp"

namespace aqi::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number in the source
  std::vector<std::string> cells;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  }
};

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

/// Splits one line on commas. Double-quoted cells may contain commas and
/// doubled quotes; embedded newlines are not supported.
inline std::vector<std::string> split_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) {
    throw Error(ErrorCode::ParseError, "unterminated quote on line " + std::to_string(line_no),
                "line " + std::to_string(line_no));
  }
  cells.push_back(trim(cur));
  return cells;
}

inline Table read(std::istream& in) {
  Table table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || line.front() == '#') continue;
    auto cells = split_line(line, line_no);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) + " cells, got " +
                      std::to_string(cells.size()),
                  "line " + std::to_string(line_no));
    }
    table.rows.push_back({line_no, std::move(cells)});
  }
  if (!have_header) throw Error(ErrorCode::ParseError, "CSV input has no header row");
  return table;
}

inline std::string escape(std::string_view cell) {
  if (cell.find_first_of(",\"") == std::string_view::npos) return std::string(cell);
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << escape(cells[i]);
  }
  out << '\n';
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (!s.empty() && s.front() == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace aqi::csv
