#pragma once

#include <string>

#include <json.hpp>

#include "gig/value.hpp"

namespace gig {

using json = nlohmann::json;

// Parses a JSON document, reporting syntax errors as ParseError with the
// line and column of the offending byte.
json parse_json_document(const std::string& text);

// Missing <-> null; integral numbers below 2^53 are written as integers.
json value_to_json(const AttributeValue& value);
AttributeValue value_from_json(const json& j);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace gig
