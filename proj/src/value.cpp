#include "gig/value.hpp"

#include <array>
#include <charconv>
#include <cctype>

namespace gig {

std::string format_number(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

std::optional<double> parse_clean_decimal(std::string_view text) {
  if (text.empty()) return std::nullopt;
  std::size_t i = 0;
  if (text[0] == '-') ++i;
  std::size_t int_digits = 0;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
    ++i;
    ++int_digits;
  }
  if (int_digits == 0) return std::nullopt;
  if (i < text.size() && text[i] == '.') {
    ++i;
    std::size_t frac_digits = 0;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      ++i;
      ++frac_digits;
    }
    if (frac_digits == 0) return std::nullopt;
  }
  if (i != text.size()) return std::nullopt;
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return out;
}

AttributeValue AttributeValue::from_cell(std::string_view raw) {
  if (auto number = parse_clean_decimal(raw); number && format_number(*number) == raw) {
    return AttributeValue(*number);
  }
  return AttributeValue(std::string(raw));
}

std::string AttributeValue::render() const {
  if (is_missing()) return "?";
  if (is_number()) return format_number(number());
  return text();
}

}  // namespace gig
