#include "psyosr/csv.hpp"

#include <charconv>
#include <fstream>

#include "psyosr/error.hpp"

namespace psyosr::csv {

namespace {

bool needs_quoting(std::string_view s) {
  return s.find_first_of(",\"\r\n") != std::string_view::npos;
}

// Reads one logical record; returns false at end of input.
bool read_record(std::istream& in, Row& row) {
  row.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      row.push_back(std::move(field));
      return true;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (in_quotes) throw Error(ErrorKind::kParse, "unterminated quoted CSV field");
  if (!any) return false;
  row.push_back(std::move(field));
  return true;
}

}  // namespace

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error(ErrorKind::kParse, "CSV is missing column '" + std::string(name) + "'");
}

Table read(std::istream& in) {
  Table t;
  if (!read_record(in, t.header)) {
    throw Error(ErrorKind::kParse, "CSV has no header row");
  }
  // Tolerate a UTF-8 byte order mark.
  if (!t.header.empty() && t.header[0].rfind("\xEF\xBB\xBF", 0) == 0) {
    t.header[0].erase(0, 3);
  }
  Row row;
  while (read_record(in, row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != t.header.size()) {
      throw Error(ErrorKind::kParse, "CSV row " + std::to_string(t.rows.size() + 2) + " has " +
                                         std::to_string(row.size()) + " fields, expected " +
                                         std::to_string(t.header.size()));
    }
    t.rows.push_back(row);
  }
  return t;
}

Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return read(in);
}

void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    if (needs_quoting(row[i])) {
      out << '"';
      for (char c : row[i]) {
        if (c == '"') out << '"';
        out << c;
      }
      out << '"';
    } else {
      out << row[i];
    }
  }
  out << '\n';
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

double parse_double(std::string_view field, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw Error(ErrorKind::kParse, "bad number for " + std::string(what) + ": '" + std::string(field) + "'");
  }
  return v;
}

long long parse_int(std::string_view field, std::string_view what) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw Error(ErrorKind::kParse, "bad integer for " + std::string(what) + ": '" + std::string(field) + "'");
  }
  return v;
}

bool parse_bool(std::string_view field, std::string_view what) {
  if (field == "1" || field == "true" || field == "TRUE" || field == "True") return true;
  if (field == "0" || field == "false" || field == "FALSE" || field == "False") return false;
  throw Error(ErrorKind::kParse, "bad boolean for " + std::string(what) + ": '" + std::string(field) + "'");
}

}  // namespace psyosr::csv
