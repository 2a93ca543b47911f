#include "gig/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "gig/error.hpp"
#include "gig/json_util.hpp"

namespace gig {

namespace {

bool is_plain_integer(const std::string& s) {
  if (s.empty() || s.size() > 18) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

const std::vector<std::size_t> kNoEdges;
const std::vector<std::string> kNoEids;

}  // namespace

bool EidLess::operator()(const std::string& a, const std::string& b) const {
  bool ai = is_plain_integer(a);
  bool bi = is_plain_integer(b);
  if (ai && bi) {
    auto na = std::stoull(a);
    auto nb = std::stoull(b);
    if (na != nb) return na < nb;
    return a < b;  // "07" vs "7"
  }
  if (ai != bi) return ai;
  return a < b;
}

bool operator<(const Edge& a, const Edge& b) {
  EidLess less;
  if (a.src != b.src) return less(a.src, b.src);
  if (a.rela != b.rela) return a.rela < b.rela;
  return less(a.dst, b.dst);
}

const AttributeValue& Node::value(const std::string& attribute) const {
  auto it = attrs.find(attribute);
  if (it == attrs.end()) throw ValidationError("node " + eid + " has no attribute " + attribute);
  return it->second;
}

PropertyGraph::PropertyGraph(Schema schema, std::vector<Node> nodes, std::vector<Edge> edges)
    : schema_(std::move(schema)) {
  for (const auto& [label, attrs] : schema_) {
    std::set<std::string> seen;
    for (const auto& a : attrs) {
      if (a == "id" || a == "eid") throw ValidationError("attribute name '" + a + "' is reserved (label " + label + ")");
      if (!seen.insert(a).second) throw ValidationError("duplicate attribute " + a + " in schema of " + label);
    }
  }
  for (auto& n : nodes) {
    auto schema_it = schema_.find(n.label);
    if (schema_it == schema_.end()) throw ValidationError("node " + n.eid + " has unknown label " + n.label);
    for (const auto& [name, value] : n.attrs) {
      if (std::find(schema_it->second.begin(), schema_it->second.end(), name) == schema_it->second.end()) {
        throw ValidationError("node " + n.eid + " has attribute " + name + " outside the schema of " + n.label);
      }
    }
    for (const auto& a : schema_it->second) n.attrs.try_emplace(a, AttributeValue::missing());
    std::string eid = n.eid;
    if (!nodes_.emplace(eid, std::move(n)).second) throw ValidationError("duplicate eid " + eid);
  }
  for (const auto& e : edges) {
    if (!nodes_.count(e.src)) throw ValidationError("edge " + e.src + " -" + e.rela + "-> " + e.dst + ": unknown source node");
    if (!nodes_.count(e.dst)) throw ValidationError("edge " + e.src + " -" + e.rela + "-> " + e.dst + ": unknown target node");
  }
  edges_ = std::move(edges);
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  build_indexes();
}

void PropertyGraph::build_indexes() {
  by_label_.clear();
  out_.clear();
  in_.clear();
  for (const auto& [eid, n] : nodes_) by_label_[n.label].push_back(eid);
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    out_[edges_[i].src].push_back(i);
    in_[edges_[i].dst].push_back(i);
  }
}

const std::vector<std::string>& PropertyGraph::attributes(const std::string& label) const {
  auto it = schema_.find(label);
  if (it == schema_.end()) throw ValidationError("unknown label " + label);
  return it->second;
}

const Node* PropertyGraph::find(const std::string& eid) const {
  auto it = nodes_.find(eid);
  return it == nodes_.end() ? nullptr : &it->second;
}

const Node& PropertyGraph::node(const std::string& eid) const {
  const Node* n = find(eid);
  if (!n) throw ValidationError("unknown eid " + eid);
  return *n;
}

const std::vector<std::string>& PropertyGraph::nodes_with_label(const std::string& label) const {
  auto it = by_label_.find(label);
  return it == by_label_.end() ? kNoEids : it->second;
}

const std::vector<std::size_t>& PropertyGraph::out_edges(const std::string& eid) const {
  auto it = out_.find(eid);
  return it == out_.end() ? kNoEdges : it->second;
}

const std::vector<std::size_t>& PropertyGraph::in_edges(const std::string& eid) const {
  auto it = in_.find(eid);
  return it == in_.end() ? kNoEdges : it->second;
}

bool PropertyGraph::has_edge(const std::string& src, const std::string& rela, const std::string& dst) const {
  for (auto i : out_edges(src)) {
    if (edges_[i].rela == rela && edges_[i].dst == dst) return true;
  }
  return false;
}

std::size_t PropertyGraph::cell_count() const {
  std::size_t total = 0;
  for (const auto& [eid, n] : nodes_) total += schema_.at(n.label).size();
  return total;
}

PropertyGraph PropertyGraph::with_values(const std::vector<CellUpdate>& updates) const {
  PropertyGraph out = *this;
  for (const auto& u : updates) {
    auto it = out.nodes_.find(u.eid);
    if (it == out.nodes_.end()) throw ValidationError("unknown eid " + u.eid);
    auto attr = it->second.attrs.find(u.attribute);
    if (attr == it->second.attrs.end()) throw ValidationError("node " + u.eid + " has no attribute " + u.attribute);
    attr->second = u.value;
  }
  return out;
}

// ---- ingestion --------------------------------------------------------------

PropertyGraph ingest_csv(const std::vector<csv::Row>& rows, const std::string& table_name, const ColumnRoles& roles,
                         const PropertyGraph* base) {
  if (rows.empty()) throw ValidationError("CSV input for table " + table_name + " has no header row");
  if (base && base->has_label(table_name)) throw ValidationError("label " + table_name + " already present in graph");
  const csv::Row& header = rows.front();

  auto column_of = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ValidationError("table " + table_name + " has no column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };

  std::optional<std::size_t> id_col;
  if (roles.id_column) id_col = column_of(*roles.id_column);
  std::map<std::size_t, std::string> ref_cols;
  for (const auto& [col, label] : roles.references) ref_cols[column_of(col)] = label;

  std::vector<std::string> attrs;
  std::vector<std::size_t> attr_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (id_col && *id_col == c) continue;
    if (ref_cols.count(c)) continue;
    attrs.push_back(header[c]);
    attr_cols.push_back(c);
  }

  PropertyGraph::Schema schema = base ? base->schema() : PropertyGraph::Schema{};
  schema[table_name] = attrs;

  std::vector<Node> nodes;
  std::vector<Edge> edges;
  if (base) {
    for (const auto& [eid, n] : base->nodes()) nodes.push_back(n);
    edges = base->edges();
  }
  std::map<std::string, std::size_t> first_row;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw ValidationError("table " + table_name + ": row " + std::to_string(r + 1) + " has " +
                            std::to_string(row.size()) + " fields, header has " + std::to_string(header.size()));
    }
    Node n;
    n.label = table_name;
    n.eid = id_col ? row[*id_col] : table_name + ":" + std::to_string(r);
    if (n.eid.empty()) throw ValidationError("table " + table_name + ": empty id at row " + std::to_string(r + 1));
    auto [it, fresh] = first_row.emplace(n.eid, r + 1);
    if (!fresh || (base && base->find(n.eid))) {
      std::string where = fresh ? "the base graph" : "row " + std::to_string(it->second);
      throw ValidationError("table " + table_name + ": duplicate eid " + n.eid + " at row " + std::to_string(r + 1) +
                            " (already defined at " + where + ")");
    }
    for (std::size_t i = 0; i < attrs.size(); ++i) {
      const std::string& cell = row[attr_cols[i]];
      n.attrs[attrs[i]] = cell.empty() ? AttributeValue::missing() : AttributeValue::from_cell(cell);
    }
    for (const auto& [col, label] : ref_cols) {
      if (row[col].empty()) continue;
      edges.push_back(Edge{n.eid, label, row[col]});
    }
    nodes.push_back(std::move(n));
  }

  PropertyGraph graph(std::move(schema), std::move(nodes), std::move(edges));
  for (const auto& e : graph.edges()) {
    auto ref = std::find_if(ref_cols.begin(), ref_cols.end(), [&](const auto& kv) { return kv.second == e.rela; });
    if (ref == ref_cols.end() || graph.node(e.src).label != table_name) continue;
    if (graph.node(e.dst).label != e.rela) {
      throw ValidationError("table " + table_name + ": reference " + e.dst + " is a " + graph.node(e.dst).label +
                            ", expected " + e.rela);
    }
  }
  return graph;
}

// ---- persistence ------------------------------------------------------------

PropertyGraph parse_graph_json(const std::string& text) {
  json doc = parse_json_document(text);
  if (!doc.is_object()) throw ParseError("graph document must be a JSON object", 1, 1);
  try {
    PropertyGraph::Schema schema;
    for (const auto& [label, attrs] : doc.at("schema").items()) {
      schema[label] = attrs.get<std::vector<std::string>>();
    }
    std::vector<Node> nodes;
    for (const auto& jn : doc.at("nodes")) {
      Node n;
      n.eid = jn.at("eid").get<std::string>();
      n.label = jn.at("label").get<std::string>();
      if (jn.contains("attrs")) {
        for (const auto& [name, v] : jn.at("attrs").items()) n.attrs[name] = value_from_json(v);
      }
      nodes.push_back(std::move(n));
    }
    std::vector<Edge> edges;
    if (doc.contains("edges")) {
      for (const auto& je : doc.at("edges")) {
        edges.push_back(Edge{je.at("src").get<std::string>(), je.at("rela").get<std::string>(),
                             je.at("dst").get<std::string>()});
      }
    }
    return PropertyGraph(std::move(schema), std::move(nodes), std::move(edges));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed graph document: ") + e.what());
  }
}

std::string graph_to_json(const PropertyGraph& graph) {
  json doc;
  doc["schema"] = json::object();
  for (const auto& [label, attrs] : graph.schema()) doc["schema"][label] = attrs;
  doc["nodes"] = json::array();
  for (const auto& [eid, n] : graph.nodes()) {
    json jn;
    jn["eid"] = n.eid;
    jn["label"] = n.label;
    jn["attrs"] = json::object();
    for (const auto& [name, v] : n.attrs) jn["attrs"][name] = value_to_json(v);
    doc["nodes"].push_back(std::move(jn));
  }
  doc["edges"] = json::array();
  for (const auto& e : graph.edges()) doc["edges"].push_back({{"src", e.src}, {"rela", e.rela}, {"dst", e.dst}});
  return doc.dump(2) + "\n";
}

PropertyGraph load_graph(const std::string& path) { return parse_graph_json(read_text_file(path)); }

void save_graph(const PropertyGraph& graph, const std::string& path) { write_text_file(path, graph_to_json(graph)); }

std::string ground_truth_to_json(const GroundTruth& truth) {
  json doc;
  doc["entries"] = json::array();
  for (const auto& e : truth.entries) {
    doc["entries"].push_back({{"eid", e.eid}, {"attribute", e.attribute}, {"value", value_to_json(e.value)}});
  }
  return doc.dump(2) + "\n";
}

GroundTruth parse_ground_truth_json(const std::string& text) {
  json doc = parse_json_document(text);
  GroundTruth truth;
  try {
    for (const auto& je : doc.at("entries")) {
      truth.entries.push_back(GroundTruthEntry{je.at("eid").get<std::string>(), je.at("attribute").get<std::string>(),
                                               value_from_json(je.at("value"))});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed ground-truth document: ") + e.what());
  }
  return truth;
}

GroundTruth load_ground_truth(const std::string& path) { return parse_ground_truth_json(read_text_file(path)); }

void save_ground_truth(const GroundTruth& truth, const std::string& path) {
  write_text_file(path, ground_truth_to_json(truth));
}

// ---- missing-value injection --------------------------------------------------

std::size_t missing_cell_count(double pct, std::size_t cells) {
  return static_cast<std::size_t>(std::llround(pct * static_cast<double>(cells)));
}

std::pair<PropertyGraph, GroundTruth> inject_missing(const PropertyGraph& graph, double pct, std::uint64_t seed,
                                                     const std::set<std::string>& only_attributes) {
  if (!(pct >= 0.0 && pct <= 1.0)) throw ValidationError("missing fraction must lie in [0, 1]");

  struct Cell {
    const std::string* eid;
    const std::string* attribute;
  };
  std::size_t eligible = 0;
  std::vector<Cell> available;
  for (const auto& [eid, n] : graph.nodes()) {
    for (const auto& attribute : graph.attributes(n.label)) {
      if (!only_attributes.empty() && !only_attributes.count(attribute)) continue;
      ++eligible;
      if (!n.attrs.at(attribute).is_missing()) available.push_back(Cell{&n.eid, &attribute});
    }
  }
  std::size_t count = missing_cell_count(pct, eligible);
  if (count > available.size()) {
    throw ValidationError("cannot blank " + std::to_string(count) + " cells: only " + std::to_string(available.size()) +
                          " non-missing cells are eligible");
  }

  std::mt19937_64 rng(seed);
  std::vector<Cell> chosen;
  chosen.reserve(count);
  std::sample(available.begin(), available.end(), std::back_inserter(chosen), count, rng);

  GroundTruth truth;
  std::vector<CellUpdate> updates;
  for (const auto& c : chosen) {
    truth.entries.push_back(GroundTruthEntry{*c.eid, *c.attribute, graph.node(*c.eid).attrs.at(*c.attribute)});
    updates.push_back(CellUpdate{*c.eid, *c.attribute, AttributeValue::missing()});
  }
  return {graph.with_values(updates), std::move(truth)};
}

// ---- attribute domains --------------------------------------------------------

const char* to_string(ValueKind kind) { return kind == ValueKind::Numeric ? "numeric" : "text"; }

bool AttributeDomain::contains_rendered(const std::string& rendered) const {
  return std::any_of(values.begin(), values.end(), [&](const AttributeValue& v) { return v.render() == rendered; });
}

ValueKind infer_kind(const std::vector<AttributeValue>& values) {
  std::size_t numeric = 0;
  std::size_t text = 0;
  for (const auto& v : values) {
    if (v.is_missing()) continue;
    if (v.is_number() || parse_clean_decimal(v.render())) {
      ++numeric;
    } else {
      ++text;
    }
  }
  return numeric > text ? ValueKind::Numeric : ValueKind::Text;
}

AttributeDomain attribute_domain(const PropertyGraph& graph, const std::string& label, const std::string& attribute) {
  const auto& attrs = graph.attributes(label);
  if (std::find(attrs.begin(), attrs.end(), attribute) == attrs.end()) {
    throw ValidationError("label " + label + " has no attribute " + attribute);
  }
  AttributeDomain domain;
  std::vector<AttributeValue> observed;
  for (const auto& eid : graph.nodes_with_label(label)) {
    const auto& v = graph.node(eid).attrs.at(attribute);
    if (v.is_missing()) continue;
    domain.values.insert(v);
    observed.push_back(v);
  }
  domain.kind = infer_kind(observed);
  return domain;
}

}  // namespace gig
