#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crashlens::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // each row padded to header size

  int column(std::string_view name) const;  // -1 when absent
  bool has_column(std::string_view name) const { return column(name) >= 0; }
};

// RFC-4180-style parsing: quoted fields, "" escapes, embedded delimiters
// and newlines, CRLF tolerated.
Table parse(std::string_view text, char delimiter = ',');
Table read_file(const std::filesystem::path& path, char delimiter = ',');

std::string escape_field(std::string_view field, char delimiter = ',');
void write_row(std::ostream& out, std::span<const std::string> fields,
               char delimiter = ',');

}  // namespace crashlens::csv
