#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace gig::csv {

using Row = std::vector<std::string>;

// RFC 4180 reader: quoted fields, doubled quotes, embedded delimiters and
// newlines. Blank lines are skipped. A UTF-8 BOM on the first line is dropped.
std::vector<Row> read(std::istream& in, char delimiter = ',');
std::vector<Row> read_file(const std::string& path, char delimiter = ',');

// Quotes a field only when it contains the delimiter, a quote or a newline.
std::string escape(const std::string& field, char delimiter = ',');
void write_row(std::ostream& out, const Row& row, char delimiter = ',');

}  // namespace gig::csv
