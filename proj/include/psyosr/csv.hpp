#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace psyosr::csv {

using Row = std::vector<std::string>;

/// Header-indexed table. Fields follow RFC 4180 quoting.
struct Table {
  Row header;
  std::vector<Row> rows;

  /// Index of a named column; throws kParse when absent.
  std::size_t column(std::string_view name) const;
};

Table read(std::istream& in);
Table read_file(const std::string& path);

void write_row(std::ostream& out, const Row& row);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

double parse_double(std::string_view field, std::string_view what);
long long parse_int(std::string_view field, std::string_view what);
bool parse_bool(std::string_view field, std::string_view what);

}  // namespace psyosr::csv
