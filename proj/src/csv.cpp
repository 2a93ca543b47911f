#include "gig/csv.hpp"

#include <fstream>
#include <sstream>

#include "gig/error.hpp"

namespace gig::csv {

std::vector<Row> read(std::istream& in, char delimiter) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);

  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t quote_line = 0;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    bool blank = row.empty() && field.empty() && !field_started;
    if (!blank) {
      end_field();
      rows.push_back(std::move(row));
    }
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      in_quotes = true;
      field_started = true;
      quote_line = line;
    } else if (c == delimiter) {
      end_field();
      field_started = true;
    } else if (c == '\r') {
      // swallowed; '\n' terminates the row
    } else if (c == '\n') {
      end_row();
      ++line;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field", quote_line, 1);
  end_row();
  return rows;
}

std::vector<Row> read_file(const std::string& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read(in, delimiter);
}

std::string escape(const std::string& field, char delimiter) {
  bool needs_quotes = field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const Row& row, char delimiter) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i > 0) out << delimiter;
    out << escape(row[i], delimiter);
  }
  out << '\n';
}

}  // namespace gig::csv
