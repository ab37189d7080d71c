#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace pcrowd::csv {

using Row = std::vector<std::string>;

// RFC 4180 table: quoted fields may contain commas, quotes ("") and newlines.
struct Table {
  Row header;
  std::vector<Row> rows;
  // 1-based source line on which each row starts.
  std::vector<std::size_t> row_lines;

  // Index of a header column; throws ValidationError if absent.
  std::size_t column(std::string_view name) const;
};

Table parse(std::istream& in);
Table read_file(const std::string& path);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

}  // namespace pcrowd::csv
