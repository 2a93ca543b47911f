#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gig/graph.hpp"

namespace gig {

struct PatternVariable {
  std::string name;
  std::string label;
  // Attribute projection for this variable's table columns; the label's
  // full schema order when absent.
  std::optional<std::vector<std::string>> attributes;
};

struct PatternEdge {
  std::string src;
  std::string rela;
  std::string dst;
};

// The scope of a dependency: typed variables joined by labelled edges.
struct GraphPattern {
  std::string name;
  std::vector<PatternVariable> variables;
  std::vector<PatternEdge> edges;
  // Same-label variables must bind different nodes.
  bool distinct = true;
  // Pairs (a, b) requiring eid(a) < eid(b) under EidLess; breaks the
  // symmetry between interchangeable variables.
  std::vector<std::pair<std::string, std::string>> ordered;

  // Throws ValidationError: duplicate or undeclared variables, disconnected
  // pattern with two or more variables.
  void validate() const;
  std::size_t index_of(const std::string& variable) const;
};

GraphPattern parse_pattern_json(const std::string& text);
std::string pattern_to_json(const GraphPattern& pattern);
GraphPattern load_pattern(const std::string& path);

// Bound eids, one per pattern variable in declaration order.
struct Match {
  std::vector<std::string> binding;
  friend bool operator==(const Match&, const Match&) = default;
};

// Lexicographic over bindings with EidLess.
bool match_less(const Match& a, const Match& b);

// All bindings realising labels, edges, distinctness and ordering, sorted by
// match_less. `workers` > 1 splits the first variable's candidates across
// threads; the output does not depend on it.
std::vector<Match> find_matches(const PropertyGraph& graph, const GraphPattern& pattern, unsigned workers = 1);

struct Column {
  std::string variable;
  std::string attribute;  // "id" for the per-variable entity-id column
  std::string label;      // empty when read back from CSV

  bool is_id() const { return attribute == "id"; }
  std::string ref() const { return variable + "." + attribute; }
  friend bool operator==(const Column&, const Column&) = default;
};

struct TableRow {
  std::size_t match_id = 0;
  std::vector<AttributeValue> cells;
};

// Pseudo-relational view: one row per match, columns grouped per variable
// with the id column first.
struct PseudoTable {
  std::string pattern_name;
  std::vector<Column> columns;
  std::vector<TableRow> rows;

  std::optional<std::size_t> find_column(const std::string& variable, const std::string& attribute) const;
  // Throws ValidationError for unknown columns.
  std::size_t column_index(const std::string& variable, const std::string& attribute) const;
  // The eid bound to `variable` in `row`.
  const std::string& eid(const TableRow& row, const std::string& variable) const;
  std::vector<std::string> variables() const;
};

PseudoTable build_pseudo_table(const PropertyGraph& graph, const GraphPattern& pattern, unsigned workers = 1);

// Layout only: the columns a table over this pattern would have.
std::vector<Column> table_columns(const PropertyGraph& graph, const GraphPattern& pattern);

// CSV with "var.attr" headers and "?" for missing cells.
std::string table_to_csv(const PseudoTable& table);
PseudoTable parse_table_csv(const std::string& text);
PseudoTable load_table_csv(const std::string& path);
void save_table_csv(const PseudoTable& table, const std::string& path);

}  // namespace gig
