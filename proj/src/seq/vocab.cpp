#include "gig/seq/vocab.hpp"

#include <sstream>

#include "gig/error.hpp"

namespace gig::seq {

Vocabulary::Vocabulary() {
  for (const char* s : {"<pad>", "<bos>", "<eos>", "<unk>", "<sep>"}) add(s, TokenKind::Special);
}

int Vocabulary::add(const std::string& token, TokenKind kind) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  kinds_.push_back(kind);
  index_.emplace(token, id);
  return id;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) throw Error("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

TokenKind Vocabulary::kind(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= kinds_.size()) throw Error("token id " + std::to_string(id) + " out of range");
  return kinds_[static_cast<std::size_t>(id)];
}

std::vector<std::string> value_tokens(const AttributeValue& value) {
  std::istringstream in(value.render());
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  if (out.empty()) out.emplace_back();
  return out;
}

std::string ref_token(const Operand& o) {
  switch (o.kind) {
    case Operand::Kind::Cell:
      return o.variable + "." + o.attribute;
    case Operand::Kind::Eid:
      return o.variable + ".eid";
    case Operand::Kind::Relation:
      return o.variable + "." + o.attribute;
    default:
      throw Error("operand " + o.render() + " has no column-ref token");
  }
}

Vocabulary build_vocab(const PseudoTable& table, const std::vector<Gdd>& rules) {
  std::map<std::string, TokenKind> found;
  std::vector<bool> value_column(table.columns.size(), false);
  auto mark_like = [&](std::size_t col) {
    const Column& ref = table.columns[col];
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      const Column& other = table.columns[c];
      bool compatible = ref.label.empty() || other.label.empty() || ref.label == other.label;
      if (other.attribute == ref.attribute && compatible) {
        value_column[c] = true;
      }
    }
  };
  for (const auto& rule : rules) {
    for (const ConstraintSet* side : {&rule.lhs, &rule.rhs}) {
      for (const auto& c : *side) {
        for (const Operand* o : {&c.left, &c.right}) {
          if (o->kind == Operand::Kind::Cell || o->kind == Operand::Kind::Eid || o->kind == Operand::Kind::Relation) {
            found.emplace(ref_token(*o), TokenKind::ColumnRef);
          }
        }
        found.emplace(c.op_token(), TokenKind::Op);
        for (auto col : referenced_columns(c, table.columns)) mark_like(col);
      }
    }
  }
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (!value_column[c]) continue;
    for (const auto& row : table.rows) {
      if (row.cells[c].is_missing()) continue;
      for (auto& t : value_tokens(row.cells[c])) found.emplace(std::move(t), TokenKind::Value);
    }
  }
  Vocabulary vocab;
  for (const auto& [token, kind] : found) vocab.add(token, kind);
  return vocab;
}

}  // namespace gig::seq
