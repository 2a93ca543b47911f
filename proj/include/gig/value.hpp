#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace gig {

struct Missing {
  friend bool operator==(Missing, Missing) { return true; }
  friend auto operator<=>(Missing, Missing) = default;
};

// A single attribute cell: text, a decimal number, or the missing marker.
// Missing is distinct from "" and from 0.
class AttributeValue {
 public:
  AttributeValue() = default;
  AttributeValue(Missing) {}
  AttributeValue(std::string text) : data_(std::move(text)) {}
  AttributeValue(const char* text) : data_(std::string(text)) {}
  AttributeValue(double number) : data_(number) {}

  static AttributeValue missing() { return AttributeValue(); }

  // Interprets a raw cell: a clean decimal whose canonical rendering equals
  // the input becomes a number ("2018"), anything else stays text ("£50",
  // "007", "1.50").
  static AttributeValue from_cell(std::string_view raw);

  bool is_missing() const { return std::holds_alternative<Missing>(data_); }
  bool is_number() const { return std::holds_alternative<double>(data_); }
  bool is_text() const { return std::holds_alternative<std::string>(data_); }

  const std::string& text() const { return std::get<std::string>(data_); }
  double number() const { return std::get<double>(data_); }

  // Canonical string form. Numbers use the shortest round-trip
  // representation; missing renders as "?".
  std::string render() const;

  friend bool operator==(const AttributeValue&, const AttributeValue&) = default;
  friend bool operator<(const AttributeValue& a, const AttributeValue& b) { return a.data_ < b.data_; }

 private:
  std::variant<Missing, std::string, double> data_;
};

std::string format_number(double value);

// Strict decimal grammar: optional '-', digits, optional '.' and digits.
// No exponent, no inf/nan, no surrounding whitespace.
std::optional<double> parse_clean_decimal(std::string_view text);

}  // namespace gig
