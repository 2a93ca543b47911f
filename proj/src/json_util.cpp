#include "gig/json_util.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gig/error.hpp"

namespace gig {

json parse_json_document(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError("invalid JSON", line, column);
  }
}

json value_to_json(const AttributeValue& value) {
  if (value.is_missing()) return nullptr;
  if (value.is_text()) return value.text();
  double x = value.number();
  if (std::floor(x) == x && std::fabs(x) < 9007199254740992.0 && !(x == 0.0 && std::signbit(x))) {
    return static_cast<std::int64_t>(x);
  }
  return x;
}

AttributeValue value_from_json(const json& j) {
  if (j.is_null()) return AttributeValue::missing();
  if (j.is_string()) return AttributeValue(j.get<std::string>());
  if (j.is_number()) return AttributeValue(j.get<double>());
  throw ParseError("attribute values must be strings, numbers or null, got " + j.dump());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

}  // namespace gig
