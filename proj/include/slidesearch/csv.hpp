#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace slidesearch::csv {

// Minimal RFC 4180 reader: quoted fields may contain commas, doubled quotes
// and newlines. A trailing '\r' before the record terminator is dropped.
// Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields,
                 std::size_t& line_no);

// Quotes a field only when it contains a comma, quote, or line break.
std::string escape(std::string_view field);

void write_record(std::ostream& out, const std::vector<std::string>& fields);

// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

// Fixed-point text with the given number of decimals.
std::string format_fixed(double v, int decimals);

double parse_double(std::string_view text);
long long parse_int(std::string_view text);

// Header-indexed table read fully into memory.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  // Index of a named column; throws DataError when absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

Table read_table(const std::string& path);

}  // namespace slidesearch::csv
