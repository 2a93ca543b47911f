#include "gig/seq/encoding.hpp"

#include "gig/error.hpp"

namespace gig::seq {

namespace {

bool carries_column(const Operand& o) {
  return o.kind == Operand::Kind::Cell || o.kind == Operand::Kind::Eid || o.kind == Operand::Kind::Relation;
}

std::size_t operand_column(const Operand& o, const std::vector<Column>& columns) {
  std::string attribute = o.kind == Operand::Kind::Cell ? o.attribute : "id";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].variable == o.variable && columns[i].attribute == attribute) return i;
  }
  throw ValidationError("no column " + o.variable + "." + attribute);
}

// Shared walk for encoding and templates: emits structural tokens and calls
// `cell` for each carried column.
template <typename CellFn>
bool walk_literals(const ConstraintSet& phi, const std::vector<Column>& columns, const Vocabulary& vocab,
                   std::vector<int>& out, CellFn&& cell) {
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const auto& c = phi[i];
    if (i > 0) out.push_back(kSep);
    for (const Operand* o : {&c.left, &c.right}) {
      if (carries_column(*o)) out.push_back(vocab.id(ref_token(*o)));
    }
    out.push_back(vocab.id(c.op_token()));
    auto cells = literal_cells(c, columns);
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j > 0) out.push_back(kSep);
      if (!cell(cells[j])) return false;
    }
  }
  return true;
}

}  // namespace

std::vector<std::size_t> literal_cells(const DistanceConstraint& c, const std::vector<Column>& columns) {
  std::vector<std::size_t> out;
  for (const Operand* o : {&c.left, &c.right}) {
    if (carries_column(*o)) out.push_back(operand_column(*o, columns));
  }
  return out;
}

std::optional<std::vector<int>> encode_literals(const PseudoTable& table, const TableRow& row, const ConstraintSet& phi,
                                                const Vocabulary& vocab) {
  std::vector<int> out;
  bool ok = walk_literals(phi, table.columns, vocab, out, [&](std::size_t col) {
    const auto& v = row.cells[col];
    if (v.is_missing()) return false;
    for (const auto& t : value_tokens(v)) out.push_back(vocab.id(t));
    return true;
  });
  if (!ok) return std::nullopt;
  return out;
}

std::optional<std::vector<int>> encoder_input(const PseudoTable& table, const TableRow& row, const Gdd& rule,
                                              const Vocabulary& vocab) {
  auto out = encode_literals(table, row, rule.lhs, vocab);
  if (out) out->push_back(kEos);
  return out;
}

DecodeTemplate decode_template(const Gdd& rule, const std::vector<Column>& columns, const Vocabulary& vocab) {
  DecodeTemplate t;
  walk_literals(rule.rhs, columns, vocab, t.items, [&](std::size_t col) {
    t.items.push_back(-1);
    t.slot_cells.push_back(col);
    return true;
  });
  t.items.push_back(kEos);
  return t;
}

std::optional<std::size_t> slot_for_column(const DecodeTemplate& tmpl, std::size_t column) {
  for (std::size_t i = 0; i < tmpl.slot_cells.size(); ++i) {
    if (tmpl.slot_cells[i] == column) return i;
  }
  return std::nullopt;
}

std::optional<std::vector<int>> slot_values(const DecodeTemplate& tmpl, const std::vector<int>& decoded, std::size_t slot) {
  std::size_t p = 0;
  std::size_t seen = 0;
  std::optional<std::vector<int>> result;
  for (std::size_t i = 0; i < tmpl.items.size(); ++i) {
    int item = tmpl.items[i];
    if (item >= 0) {
      if (p >= decoded.size() || decoded[p] != item) return std::nullopt;
      ++p;
      continue;
    }
    int stop = tmpl.items[i + 1];
    std::vector<int> values;
    while (p < decoded.size() && decoded[p] != stop) values.push_back(decoded[p++]);
    if (values.empty()) return std::nullopt;
    if (seen++ == slot) result = std::move(values);
  }
  return result;
}

std::vector<TrainingPair> make_training_pairs(const PseudoTable& table, const std::vector<Gdd>& rules,
                                              const Vocabulary& vocab, std::size_t max_len, const PropertyGraph* graph) {
  std::vector<TrainingPair> pairs;
  for (std::size_t r = 0; r < rules.size(); ++r) {
    auto status = evaluate_rule(table, rules[r], graph);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      if (status[i] != RowStatus::Holds) continue;
      const auto& row = table.rows[i];
      auto enc = encoder_input(table, row, rules[r], vocab);
      auto rhs = encode_literals(table, row, rules[r].rhs, vocab);
      if (!enc || !rhs) continue;
      TrainingPair pair;
      pair.enc = std::move(*enc);
      pair.dec.push_back(kBos);
      pair.dec.insert(pair.dec.end(), rhs->begin(), rhs->end());
      pair.dec.push_back(kEos);
      pair.rule_index = r;
      pair.match_id = row.match_id;
      if (max_len > 0 && (pair.enc.size() > max_len || pair.dec.size() > max_len)) continue;
      pairs.push_back(std::move(pair));
    }
  }
  return pairs;
}

}  // namespace gig::seq
