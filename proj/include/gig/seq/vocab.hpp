#pragma once

#include <map>
#include <string>
#include <vector>

#include "gig/gdd.hpp"

namespace gig::seq {

enum class TokenKind : std::uint8_t { Special = 0, ColumnRef = 1, Op = 2, Value = 3 };

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr int kSep = 4;

class Vocabulary {
 public:
  // Specials only.
  Vocabulary();

  // Ignored when the token is already present.
  int add(const std::string& token, TokenKind kind);
  // UNK for unknown tokens.
  int id(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  const std::string& token(int id) const;
  TokenKind kind(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<TokenKind>& kinds() const { return kinds_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.kinds_ == b.kinds_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<TokenKind> kinds_;
  std::map<std::string, int> index_;
};

// Whitespace-split tokens of a rendered value; an empty value is one empty token.
std::vector<std::string> value_tokens(const AttributeValue& value);

// Column-ref token of an operand: "x.Name", "x.eid", or "x.<relation>".
std::string ref_token(const Operand& operand);

// Specials, then every column-ref and op token of the rules, then the value
// tokens of every column sharing (label, attribute) with a column the rules
// reference. Non-special tokens are sorted.
Vocabulary build_vocab(const PseudoTable& table, const std::vector<Gdd>& rules);

}  // namespace gig::seq
