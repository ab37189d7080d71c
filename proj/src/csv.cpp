#include "pcrowd/csv.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "pcrowd/common.hpp"

namespace pcrowd::csv {

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ValidationError("csv: missing column '" + std::string(name) + "'");
}

Table parse(std::istream& in) {
  Table table;
  std::vector<Row> records;
  std::vector<std::size_t> lines;

  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t row_start = 1;
  char c = 0;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    // Skip blank lines.
    if (!(row.size() == 1 && row[0].empty())) {
      records.push_back(std::move(row));
      lines.push_back(row_start);
    }
    row.clear();
  };

  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      // tolerated before '\n'
    } else if (c == '\n') {
      end_row();
      ++line;
      row_start = line;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) {
    throw ValidationError("csv: unterminated quoted field starting on line " +
                          std::to_string(row_start));
  }
  if (!field.empty() || !row.empty() || field_started) end_row();

  if (records.empty()) return table;
  table.header = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != table.header.size()) {
      throw ValidationError("csv: line " + std::to_string(lines[i]) + ": expected " +
                            std::to_string(table.header.size()) + " fields, got " +
                            std::to_string(records[i].size()));
    }
    table.rows.push_back(std::move(records[i]));
    table.row_lines.push_back(lines[i]);
  }
  return table;
}

Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return parse(in);
}

std::string escape(std::string_view field) {
  bool needs_quotes = field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << escape(row[i]);
  }
  out << '\n';
}

}  // namespace pcrowd::csv
