#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace sdid::csv {

// In-memory CSV table. Header row is mandatory; fields are kept as raw
// strings and converted on demand.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, -1 if absent.
  int column(std::string_view name) const;
  // Same, but throws ParseError naming the missing column.
  int require_column(std::string_view name) const;
};

Table read(std::istream& in);
Table read_file(const std::string& path);

void write(std::ostream& out, const Table& table);

// Field-level helpers. `context` feeds the error message (file, row, column).
double parse_double(std::string_view field, const std::string& context);
long long parse_int(std::string_view field, const std::string& context);

// Shortest decimal representation that round-trips a double. Used for all
// emitted artifacts so byte-identical reruns hold.
std::string format_double(double value);

// Quotes a field per RFC 4180 when it contains separators or quotes.
std::string escape_field(std::string_view field);

}  // namespace sdid::csv
