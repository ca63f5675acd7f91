#include "crashlens/csv.hpp"

#include <fstream>
#include <sstream>

#include "crashlens/common.hpp"

namespace crashlens::csv {

int Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

std::vector<std::vector<std::string>> parse_records(std::string_view text,
                                                    char delimiter) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any_field_content = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    any_field_content = true;
  };
  auto end_record = [&] {
    if (!record.empty() || any_field_content || !field.empty()) {
      end_field();
      records.push_back(std::move(record));
      record.clear();
      any_field_content = false;
    }
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      any_field_content = true;
    } else if (c == delimiter) {
      end_field();
    } else if (c == '\n') {
      end_record();
    } else if (c == '\r') {
      // swallowed; CRLF handled by the '\n' branch
    } else {
      field.push_back(c);
    }
  }
  end_record();
  return records;
}

}  // namespace

Table parse(std::string_view text, char delimiter) {
  auto records = parse_records(text, delimiter);
  Table table;
  if (records.empty()) return table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    auto& row = records[r];
    row.resize(table.header.size());
    table.rows.push_back(std::move(row));
  }
  return table;
}

Table read_file(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), delimiter);
}

std::string escape_field(std::string_view field, char delimiter) {
  bool needs_quotes = field.find_first_of("\"\r\n") != std::string_view::npos ||
                      field.find(delimiter) != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, std::span<const std::string> fields,
               char delimiter) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out.put(delimiter);
    out << escape_field(fields[i], delimiter);
  }
  out.put('\n');
}

}  // namespace crashlens::csv
