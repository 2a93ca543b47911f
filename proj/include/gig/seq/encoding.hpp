#pragma once

#include <optional>
#include <vector>

#include "gig/gdd.hpp"
#include "gig/seq/vocab.hpp"

namespace gig::seq {

struct TrainingPair {
  std::vector<int> enc;
  std::vector<int> dec;  // BOS ... EOS
  std::size_t rule_index = 0;
  std::size_t match_id = 0;
};

// Columns whose values a literal carries, in operand order.
std::vector<std::size_t> literal_cells(const DistanceConstraint& c, const std::vector<Column>& columns);

// Literals joined by SEP. A literal is its column-ref tokens, its op token and
// the value tokens of each carried cell, cells separated by SEP. nullopt if
// any carried cell is missing.
std::optional<std::vector<int>> encode_literals(const PseudoTable& table, const TableRow& row, const ConstraintSet& phi,
                                                const Vocabulary& vocab);

// Encoder input: LHS literals followed by EOS.
std::optional<std::vector<int>> encoder_input(const PseudoTable& table, const TableRow& row, const Gdd& rule,
                                              const Vocabulary& vocab);

// The shape every decoder output of a rule takes: forced structural tokens
// with value slots in between. Slot i belongs to cell slot_cells[i].
struct DecodeTemplate {
  // -1 marks a value slot; each slot is followed by a forced SEP or EOS.
  std::vector<int> items;
  std::vector<std::size_t> slot_cells;  // table column per value slot
};

DecodeTemplate decode_template(const Gdd& rule, const std::vector<Column>& columns, const Vocabulary& vocab);

// Index of the value slot carrying `column`, if any.
std::optional<std::size_t> slot_for_column(const DecodeTemplate& tmpl, std::size_t column);

// Value token ids of slot `slot` in a decoded sequence (BOS excluded) that
// follows the template; nullopt if the sequence does not.
std::optional<std::vector<int>> slot_values(const DecodeTemplate& tmpl, const std::vector<int>& decoded, std::size_t slot);

// One pair per (rule, row) where the rule holds on the row. Pairs longer than
// max_len (0: unlimited) are dropped.
std::vector<TrainingPair> make_training_pairs(const PseudoTable& table, const std::vector<Gdd>& rules,
                                              const Vocabulary& vocab, std::size_t max_len = 0,
                                              const PropertyGraph* graph = nullptr);

}  // namespace gig::seq
