#include "gig/rule_dsl.hpp"

#include <cctype>
#include <filesystem>

#include "gig/error.hpp"

namespace gig {

namespace {

enum class Tok { Word, Number, String, Quoted, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::size_t line = 1;
  std::size_t column = 1;
};

bool word_char(char c) {
  auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '_' || c == '\'' || u >= 0x80;
}

class Lexer {
 public:
  explicit Lexer(const std::string& text) : s_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      Token t;
      t.line = line_;
      t.column = col_;
      if (i_ >= s_.size()) {
        out.push_back(t);
        return out;
      }
      char c = s_[i_];
      if (c == '"') {
        t.kind = Tok::String;
        t.text = read_string();
      } else if (c == '`') {
        t.kind = Tok::Quoted;
        advance();
        while (i_ < s_.size() && s_[i_] != '`' && s_[i_] != '\n') t.text.push_back(advance());
        if (i_ >= s_.size() || s_[i_] != '`') throw ParseError("unterminated backtick name", t.line, t.column);
        advance();
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '-' && i_ + 1 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_ + 1])))) {
        t.kind = Tok::Number;
        t.text = read_number();
      } else if (word_char(c)) {
        t.kind = Tok::Word;
        while (i_ < s_.size() && word_char(s_[i_])) t.text.push_back(advance());
      } else if (c == '<' && i_ + 1 < s_.size() && s_[i_ + 1] == '=') {
        t.kind = Tok::Punct;
        t.text = "<=";
        advance();
        advance();
      } else if (std::string("(),;:{}.*").find(c) != std::string::npos) {
        t.kind = Tok::Punct;
        t.text = std::string(1, advance());
      } else {
        throw ParseError(std::string("unexpected character '") + c + "'", t.line, t.column);
      }
      out.push_back(t);
    }
  }

 private:
  char advance() {
    char c = s_[i_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (i_ < s_.size()) {
      char c = s_[i_];
      if (c == '#') {
        while (i_ < s_.size() && s_[i_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        return;
      }
    }
  }

  std::string read_string() {
    std::size_t line = line_, col = col_;
    advance();
    std::string out;
    while (i_ < s_.size() && s_[i_] != '"') {
      char c = advance();
      if (c == '\\') {
        if (i_ >= s_.size()) break;
        char e = advance();
        out.push_back(e == 'n' ? '\n' : e);
      } else {
        out.push_back(c);
      }
    }
    if (i_ >= s_.size()) throw ParseError("unterminated string", line, col);
    advance();
    return out;
  }

  std::string read_number() {
    std::string out;
    if (s_[i_] == '-') out.push_back(advance());
    while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) out.push_back(advance());
    if (i_ + 1 < s_.size() && s_[i_] == '.' && std::isdigit(static_cast<unsigned char>(s_[i_ + 1]))) {
      out.push_back(advance());
      while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) out.push_back(advance());
    }
    if (i_ < s_.size() && word_char(s_[i_])) throw ParseError("malformed number", line_, col_);
    return out;
  }

  const std::string& s_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

  std::vector<Gdd> run() {
    std::vector<Gdd> rules;
    while (peek().kind != Tok::End) {
      Gdd g;
      if (is_word("rule")) {
        next();
        g.name = expect_name("rule name");
        if (is_word("on")) {
          next();
          g.scope = expect_name("pattern name");
        }
        expect_punct("{");
        body(g);
        expect_punct("}");
      } else if (is_word("LHS")) {
        g.name = "r" + std::to_string(rules.size() + 1);
        body(g);
      } else {
        fail("expected 'rule' or 'LHS'");
      }
      if (g.rhs.empty()) fail("rule " + g.name + " has an empty RHS");
      g.normalize();
      rules.push_back(std::move(g));
    }
    return rules;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const { return t_[std::min(pos_ + ahead, t_.size() - 1)]; }
  const Token& next() { return t_[std::min(pos_++, t_.size() - 1)]; }

  [[noreturn]] void fail(const std::string& what) const {
    const Token& t = peek();
    std::string near = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    throw ParseError(what + " near " + near, t.line, t.column);
  }

  bool is_word(const char* w) const { return peek().kind == Tok::Word && peek().text == w; }
  bool is_punct(const char* p) const { return peek().kind == Tok::Punct && peek().text == p; }

  void expect_punct(const char* p) {
    if (!is_punct(p)) fail(std::string("expected '") + p + "'");
    next();
  }

  std::string expect_name(const char* what) {
    if (peek().kind != Tok::Word && peek().kind != Tok::Quoted) fail(std::string("expected ") + what);
    return next().text;
  }

  bool at_section_end() const {
    return peek().kind == Tok::End || is_punct("}") || is_word("RHS") || is_word("LHS") || is_word("rule");
  }

  void body(Gdd& g) {
    if (!is_word("LHS")) fail("expected 'LHS'");
    next();
    expect_punct(":");
    constraints(g.lhs);
    if (!is_word("RHS")) fail("expected 'RHS'");
    next();
    expect_punct(":");
    constraints(g.rhs);
  }

  void constraints(ConstraintSet& out) {
    while (!at_section_end()) {
      if (is_punct(";")) {
        next();
        continue;
      }
      out.push_back(constraint());
      if (!at_section_end()) expect_punct(";");
    }
  }

  // var, var.attr, var.eid, "text", number, *
  Operand operand() {
    if (is_punct("*")) {
      next();
      return Operand::wildcard();
    }
    if (peek().kind == Tok::String) return Operand::value(AttributeValue(next().text));
    if (peek().kind == Tok::Number) return Operand::value(AttributeValue(std::stod(next().text)));
    std::string var = expect_name("operand");
    expect_punct(".");
    if (peek().kind == Tok::Word && (peek().text == "eid" || peek().text == "id")) {
      next();
      return Operand::eid(var);
    }
    return Operand::cell(var, expect_name("attribute"));
  }

  double threshold() {
    expect_punct("<=");
    if (peek().kind != Tok::Number) fail("expected a threshold");
    const Token& t = next();
    double v = std::stod(t.text);
    if (v < 0) throw ParseError("thresholds must be non-negative", t.line, t.column);
    return v;
  }

  DistanceConstraint constraint() {
    const Token start = peek();
    if (start.kind != Tok::Word) fail("expected a constraint");
    std::string fn = next().text;
    expect_punct("(");
    try {
      if (fn == "rel") {
        std::string var = expect_name("variable");
        expect_punct(",");
        if (peek().kind != Tok::String) fail("expected a quoted relation name");
        std::string rela = next().text;
        expect_punct(",");
        Operand right;
        if (peek().kind == Tok::String) {
          right = Operand::value(AttributeValue(next().text));
        } else if (is_punct("*")) {
          next();
        } else {
          right = Operand::relation(expect_name("variable"), rela);
        }
        expect_punct(")");
        return DistanceConstraint::rel_eq(Operand::relation(var, rela), right);
      }
      Operand a = operand();
      expect_punct(",");
      Operand b = operand();
      expect_punct(")");
      bool eid_form = a.kind == Operand::Kind::Eid || b.kind == Operand::Kind::Eid;
      if (fn == "eq") {
        if (!eid_form) return DistanceConstraint::exact(a, b);
        for (const Operand* o : {&a, &b}) {
          if (o->kind == Operand::Kind::Cell) fail("eq() cannot compare an eid with an attribute");
        }
        return DistanceConstraint::eid_eq(a, b);
      }
      if (eid_form) fail(fn + "() does not apply to eids");
      if (fn == "edit") return DistanceConstraint::edit(a, b, threshold());
      if (fn == "abs") return DistanceConstraint::abs_diff(a, b, threshold());
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), start.line, start.column);
    }
    throw ParseError("unknown constraint '" + fn + "'", start.line, start.column);
  }

  std::vector<Token> t_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<Gdd> parse_rules(const std::string& text) { return Parser(Lexer(text).run()).run(); }

std::vector<Gdd> parse_rules(const std::string& text, const std::vector<Column>& columns) {
  auto rules = parse_rules(text);
  for (const auto& r : rules) validate_against(r, columns);
  return rules;
}

std::string render_rule(const Gdd& rule) {
  std::string out = "rule " + rule.name;
  if (!rule.scope.empty()) out += " on " + rule.scope;
  out += " {\n  LHS:";
  if (rule.lhs.empty()) out += " ;";
  for (const auto& c : rule.lhs) out += " " + c.render() + ";";
  out += "\n  RHS:";
  for (const auto& c : rule.rhs) out += " " + c.render() + ";";
  out += "\n}\n";
  return out;
}

std::string render_rules(const std::vector<Gdd>& rules) {
  std::string out;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    if (i) out += "\n";
    out += render_rule(rules[i]);
  }
  return out;
}

std::vector<Gdd> load_rules(const std::string& path) {
  auto rules = parse_rules(read_text_file(path));
  std::string sidecar = path + ".json";
  if (std::filesystem::exists(sidecar)) apply_rules_metadata(rules, parse_json_document(read_text_file(sidecar)));
  return rules;
}

void save_rules(const std::vector<Gdd>& rules, const std::string& path) {
  write_text_file(path, render_rules(rules));
}

json rules_metadata(const std::vector<Gdd>& rules, const json& extra) {
  json doc = extra.is_object() ? extra : json::object();
  json list = json::array();
  for (const auto& r : rules) {
    list.push_back({{"name", r.name},
                    {"support", r.provenance.support},
                    {"confidence", r.provenance.confidence},
                    {"mined", r.provenance.mined}});
  }
  doc["rules"] = list;
  return doc;
}

void apply_rules_metadata(std::vector<Gdd>& rules, const json& metadata) {
  if (!metadata.contains("rules")) return;
  for (const auto& entry : metadata.at("rules")) {
    std::string name = entry.at("name").get<std::string>();
    for (auto& r : rules) {
      if (r.name != name) continue;
      r.provenance.support = entry.value("support", std::size_t{0});
      r.provenance.confidence = entry.value("confidence", 0.0);
      r.provenance.mined = entry.value("mined", false);
    }
  }
}

}  // namespace gig
