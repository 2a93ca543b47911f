#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gig/csv.hpp"
#include "gig/value.hpp"

namespace gig {

// Entity ids that are both plain non-negative integers compare numerically
// ("9" < "10"); everything else compares bytewise, integers first.
struct EidLess {
  bool operator()(const std::string& a, const std::string& b) const;
};

struct Node {
  std::string eid;
  std::string label;
  std::map<std::string, AttributeValue> attrs;

  const AttributeValue& value(const std::string& attribute) const;
  friend bool operator==(const Node&, const Node&) = default;
};

struct Edge {
  std::string src;
  std::string rela;
  std::string dst;

  friend bool operator==(const Edge&, const Edge&) = default;
};
bool operator<(const Edge& a, const Edge& b);

struct CellUpdate {
  std::string eid;
  std::string attribute;
  AttributeValue value;
};

// Typed nodes with attribute maps and labelled edges. Immutable once built;
// every node carries exactly the attributes its label's schema lists (absent
// ones are stored as missing).
class PropertyGraph {
 public:
  using Schema = std::map<std::string, std::vector<std::string>>;
  using NodeMap = std::map<std::string, Node, EidLess>;

  PropertyGraph() = default;
  // Throws ValidationError on duplicate eids, unknown labels/attributes or
  // dangling edges.
  PropertyGraph(Schema schema, std::vector<Node> nodes, std::vector<Edge> edges);

  const Schema& schema() const { return schema_; }
  const NodeMap& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }

  bool has_label(const std::string& label) const { return schema_.count(label) > 0; }
  const std::vector<std::string>& attributes(const std::string& label) const;
  const Node* find(const std::string& eid) const;
  const Node& node(const std::string& eid) const;
  // Eids of nodes with this label, in EidLess order.
  const std::vector<std::string>& nodes_with_label(const std::string& label) const;
  // Indices into edges() leaving / entering the node.
  const std::vector<std::size_t>& out_edges(const std::string& eid) const;
  const std::vector<std::size_t>& in_edges(const std::string& eid) const;
  bool has_edge(const std::string& src, const std::string& rela, const std::string& dst) const;

  // Total attribute cells, i.e. sum over nodes of their schema width.
  std::size_t cell_count() const;

  PropertyGraph with_values(const std::vector<CellUpdate>& updates) const;

  friend bool operator==(const PropertyGraph& a, const PropertyGraph& b) {
    return a.schema_ == b.schema_ && a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
  }

 private:
  void build_indexes();

  Schema schema_;
  NodeMap nodes_;
  std::vector<Edge> edges_;
  std::map<std::string, std::vector<std::string>> by_label_;
  std::unordered_map<std::string, std::vector<std::size_t>> out_;
  std::unordered_map<std::string, std::vector<std::size_t>> in_;
};

// ---- ingestion --------------------------------------------------------------

struct ColumnRoles {
  std::optional<std::string> id_column;
  // column name -> label of the nodes it references
  std::map<std::string, std::string> references;
};

// One node per data row labelled `table_name`. Reference columns become edges
// (row node -[label]-> referenced node); the rest become attributes. Without
// an id column eids are "<table>:<ordinal>". References resolve against
// `base` and the new rows; the result contains `base` as well.
PropertyGraph ingest_csv(const std::vector<csv::Row>& rows, const std::string& table_name,
                         const ColumnRoles& roles = {}, const PropertyGraph* base = nullptr);

// ---- persistence ------------------------------------------------------------

PropertyGraph parse_graph_json(const std::string& text);
std::string graph_to_json(const PropertyGraph& graph);
PropertyGraph load_graph(const std::string& path);
void save_graph(const PropertyGraph& graph, const std::string& path);

// ---- missing-value injection --------------------------------------------------

struct GroundTruthEntry {
  std::string eid;
  std::string attribute;
  AttributeValue value;
  friend bool operator==(const GroundTruthEntry&, const GroundTruthEntry&) = default;
};

struct GroundTruth {
  std::vector<GroundTruthEntry> entries;
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

std::string ground_truth_to_json(const GroundTruth& truth);
GroundTruth parse_ground_truth_json(const std::string& text);
GroundTruth load_ground_truth(const std::string& path);
void save_ground_truth(const GroundTruth& truth, const std::string& path);

// round(pct * cells), half away from zero.
std::size_t missing_cell_count(double pct, std::size_t cells);

// Blanks exactly missing_cell_count(pct, eligible cells) attribute cells,
// chosen uniformly without replacement from the non-missing eligible cells.
// `only_attributes` restricts eligibility to the named attributes.
std::pair<PropertyGraph, GroundTruth> inject_missing(const PropertyGraph& graph, double pct, std::uint64_t seed,
                                                     const std::set<std::string>& only_attributes = {});

// ---- attribute domains --------------------------------------------------------

enum class ValueKind { Numeric, Text };
const char* to_string(ValueKind kind);

struct AttributeDomain {
  std::set<AttributeValue> values;
  ValueKind kind = ValueKind::Text;

  bool contains_rendered(const std::string& rendered) const;
};

// Kind is Numeric when strictly more observed values parse as clean decimals
// than not.
ValueKind infer_kind(const std::vector<AttributeValue>& values);
AttributeDomain attribute_domain(const PropertyGraph& graph, const std::string& label, const std::string& attribute);

}  // namespace gig
