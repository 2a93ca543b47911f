#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gig/graph.hpp"
#include "gig/pattern.hpp"

namespace gig {

enum class DistanceFn {
  Edit,      // Levenshtein over code points, unit costs, case-sensitive
  AbsDiff,   // |a - b| over numbers
  Exact,     // 0 if the rendered values are equal, else 1
  EidEq,     // 0 if the entity ids are equal, else 1
  RelEq,     // 0 if the relation ends at the same node, else 1
};

const char* to_string(DistanceFn fn);

struct Operand {
  enum class Kind { Cell, Constant, Wildcard, Eid, Relation };

  Kind kind = Kind::Wildcard;
  std::string variable;   // Cell, Eid, Relation
  std::string attribute;  // Cell: attribute name; Relation: relation name
  AttributeValue constant;

  static Operand cell(std::string variable, std::string attribute);
  static Operand value(AttributeValue constant);
  static Operand wildcard();
  static Operand eid(std::string variable);
  static Operand relation(std::string variable, std::string relation);

  bool is_cell() const { return kind == Kind::Cell; }
  bool is_wildcard() const { return kind == Kind::Wildcard; }
  std::string render() const;
  friend bool operator==(const Operand&, const Operand&) = default;
};

enum class CompareOp { LessEq, Eq };

struct DistanceConstraint {
  DistanceFn fn = DistanceFn::Exact;
  Operand left;
  Operand right;
  CompareOp op = CompareOp::Eq;
  double threshold = 0.0;

  static DistanceConstraint edit(Operand a, Operand b, double threshold);
  static DistanceConstraint abs_diff(Operand a, Operand b, double threshold);
  static DistanceConstraint exact(Operand a, Operand b);
  static DistanceConstraint eid_eq(Operand a, Operand b);
  static DistanceConstraint rel_eq(Operand a, Operand b);

  // A cell compared against '*': within one row it always holds; across the
  // rows of a table it asks that the cell agree with its group (see
  // evaluate_rule).
  bool is_free_literal() const;
  // The cell operand of a free literal.
  const Operand& free_cell() const;

  // Operands of symmetric functions are ordered so equal constraints render
  // identically.
  void canonicalize();
  std::string render() const;
  // Token used by the sequence model: "=0" or "≤k".
  std::string op_token() const;
};

bool operator==(const DistanceConstraint& a, const DistanceConstraint& b);
bool operator<(const DistanceConstraint& a, const DistanceConstraint& b);

using ConstraintSet = std::vector<DistanceConstraint>;
// Canonicalizes every constraint, then sorts and deduplicates.
void normalize(ConstraintSet& set);

struct Provenance {
  bool mined = false;
  std::size_t support = 0;
  double confidence = 0.0;
};

// (Q[z], phi_x -> phi_y). The scope is referred to by pattern name; cell
// operands are checked against a concrete table layout on use.
struct Gdd {
  std::string name;
  std::string scope;
  ConstraintSet lhs;
  ConstraintSet rhs;
  Provenance provenance;

  void normalize();
  // "LHS: ...; RHS: ...;" with constraints in canonical order. Identifies a
  // rule independently of its name.
  std::string body() const;
};

// Confidence desc, support desc, then body.
bool rule_rank_less(const Gdd& a, const Gdd& b);

// ---- evaluation -------------------------------------------------------------

struct Wildcard {
  friend bool operator==(Wildcard, Wildcard) { return true; }
};
using DistanceInput = std::variant<Wildcard, AttributeValue>;

std::size_t levenshtein(std::string_view a, std::string_view b);

// nullopt means undefined: a side is missing. A wildcard side gives 0.
// Throws TypeError when AbsDiff meets text that is not a clean decimal.
std::optional<double> eval_distance(DistanceFn fn, const DistanceInput& a, const DistanceInput& b);

enum class Truth { Holds, Fails, Undefined };
const char* to_string(Truth t);

// Relation constraints need `graph`; everything else resolves from the row.
Truth check_constraint(const DistanceConstraint& c, const PseudoTable& table, const TableRow& row,
                       const PropertyGraph* graph = nullptr);
// Conjunction: Fails if any fails, else Undefined if any undefined, else Holds.
Truth satisfies(const PseudoTable& table, const TableRow& row, const ConstraintSet& phi,
                const PropertyGraph* graph = nullptr);

// Column indices a constraint touches. Eid and relation operands map to the
// variable's id column.
std::vector<std::size_t> referenced_columns(const DistanceConstraint& c, const std::vector<Column>& columns);
std::vector<std::size_t> referenced_columns(const ConstraintSet& phi, const std::vector<Column>& columns);

// Throws ValidationError if a constraint references a variable or attribute
// absent from the layout.
void validate_against(const Gdd& rule, const std::vector<Column>& columns);

enum class RowStatus { Undefined, LhsFails, Holds, Violates };

// Per-row status of a rule over a table.
//  - Undefined: some referenced cell is missing (or a constraint is undefined).
//  - LhsFails: phi_x fails on the row.
//  - otherwise the row supports the rule. It Holds when every bound
//    constraint of phi_y holds and every free literal of phi_y agrees with the
//    consensus of its group, where rows are grouped by the values of the free
//    literals of phi_x and the consensus is the most frequent value (ties to
//    the smallest rendering) among supporting rows of the group.
// Rules without free literals reduce to plain per-row checking.
std::vector<RowStatus> evaluate_rule(const PseudoTable& table, const Gdd& rule, const PropertyGraph* graph = nullptr);

struct SatisfactionReport {
  bool satisfied = true;
  std::vector<std::size_t> violations;  // match ids
  std::vector<std::size_t> undefined;   // match ids skipped for missing cells
};

// Throws ValidationError if the rule's scope names a different pattern or
// references columns the table lacks.
SatisfactionReport table_satisfies(const PseudoTable& table, const Gdd& rule, const PropertyGraph* graph = nullptr);

// Merges rules sharing phi_x (union of phi_y) and rules sharing phi_y (union of
// phi_x) until neither applies. Output sorted by body; idempotent. Merged
// provenance keeps the weakest support/confidence; callers re-score.
std::vector<Gdd> consolidate(const std::vector<Gdd>& rules);

// ---- positional masks ---------------------------------------------------------

struct PositionalMask {
  std::vector<bool> bits;
  std::vector<bool> rhs_bits;

  std::size_t popcount() const;
  // "(0,1,0,...)"
  std::string to_string() const;
  friend bool operator==(const PositionalMask&, const PositionalMask&) = default;
};

PositionalMask to_mask(const Gdd& rule, const std::vector<Column>& columns);

}  // namespace gig
