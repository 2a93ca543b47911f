#include "gig/pattern.hpp"

#include <algorithm>
#include <future>
#include <set>
#include <sstream>

#include "gig/error.hpp"
#include "gig/json_util.hpp"

namespace gig {

void GraphPattern::validate() const {
  std::set<std::string> names;
  for (const auto& v : variables) {
    if (v.name.empty()) throw ValidationError("pattern variable with empty name");
    if (v.name.find('.') != std::string::npos) throw ValidationError("pattern variable " + v.name + " contains '.'");
    if (!names.insert(v.name).second) throw ValidationError("duplicate pattern variable " + v.name);
  }
  for (const auto& e : edges) {
    if (!names.count(e.src) || !names.count(e.dst)) {
      throw ValidationError("pattern edge " + e.src + " -" + e.rela + "-> " + e.dst + " uses an undeclared variable");
    }
  }
  for (const auto& [a, b] : ordered) {
    if (!names.count(a) || !names.count(b)) throw ValidationError("ordering constraint on undeclared variable");
  }
  if (variables.size() < 2) return;
  std::set<std::string> reached{variables.front().name};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& e : edges) {
      bool s = reached.count(e.src) > 0;
      bool d = reached.count(e.dst) > 0;
      if (s != d) {
        reached.insert(s ? e.dst : e.src);
        grew = true;
      }
    }
  }
  if (reached.size() != variables.size()) throw ValidationError("pattern " + name + " is disconnected");
}

std::size_t GraphPattern::index_of(const std::string& variable) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i].name == variable) return i;
  }
  throw ValidationError("unknown pattern variable " + variable);
}

GraphPattern parse_pattern_json(const std::string& text) {
  json doc = parse_json_document(text);
  GraphPattern p;
  try {
    p.name = doc.value("name", std::string());
    for (const auto& jv : doc.at("variables")) {
      PatternVariable v;
      v.name = jv.at(0).get<std::string>();
      v.label = jv.at(1).get<std::string>();
      if (jv.size() > 2) v.attributes = jv.at(2).get<std::vector<std::string>>();
      p.variables.push_back(std::move(v));
    }
    if (doc.contains("edges")) {
      for (const auto& je : doc.at("edges")) {
        p.edges.push_back(
            PatternEdge{je.at(0).get<std::string>(), je.at(1).get<std::string>(), je.at(2).get<std::string>()});
      }
    }
    p.distinct = doc.value("distinct", true);
    if (doc.contains("ordered")) {
      for (const auto& jo : doc.at("ordered")) p.ordered.emplace_back(jo.at(0).get<std::string>(), jo.at(1).get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed pattern document: ") + e.what());
  }
  p.validate();
  return p;
}

std::string pattern_to_json(const GraphPattern& pattern) {
  json doc;
  doc["name"] = pattern.name;
  doc["variables"] = json::array();
  for (const auto& v : pattern.variables) {
    json jv = json::array({v.name, v.label});
    if (v.attributes) jv.push_back(*v.attributes);
    doc["variables"].push_back(jv);
  }
  doc["edges"] = json::array();
  for (const auto& e : pattern.edges) doc["edges"].push_back(json::array({e.src, e.rela, e.dst}));
  doc["distinct"] = pattern.distinct;
  doc["ordered"] = json::array();
  for (const auto& [a, b] : pattern.ordered) doc["ordered"].push_back(json::array({a, b}));
  return doc.dump(2) + "\n";
}

GraphPattern load_pattern(const std::string& path) { return parse_pattern_json(read_text_file(path)); }

bool match_less(const Match& a, const Match& b) {
  return std::lexicographical_compare(a.binding.begin(), a.binding.end(), b.binding.begin(), b.binding.end(), EidLess{});
}

namespace {

struct IndexedEdge {
  std::size_t src;
  std::string rela;
  std::size_t dst;
};

class Matcher {
 public:
  Matcher(const PropertyGraph& graph, const GraphPattern& pattern) : graph_(graph), pattern_(pattern) {
    for (const auto& e : pattern.edges) {
      edges_.push_back(IndexedEdge{pattern.index_of(e.src), e.rela, pattern.index_of(e.dst)});
    }
    for (const auto& [a, b] : pattern.ordered) ordered_.emplace_back(pattern.index_of(a), pattern.index_of(b));
    plan_order();
  }

  std::size_t first_variable() const { return order_.front(); }

  void run(const std::vector<std::string>& first_candidates, std::vector<Match>& out) const {
    std::vector<std::string> binding(pattern_.variables.size());
    std::vector<bool> bound(pattern_.variables.size(), false);
    for (const auto& eid : first_candidates) {
      if (!admissible(order_[0], eid, binding, bound)) continue;
      binding[order_[0]] = eid;
      bound[order_[0]] = true;
      extend(1, binding, bound, out);
      bound[order_[0]] = false;
    }
  }

 private:
  // Breadth-first from variable 0 so every later variable touches an
  // already-bound one.
  void plan_order() {
    std::size_t n = pattern_.variables.size();
    std::vector<bool> placed(n, false);
    order_.push_back(0);
    placed[0] = true;
    while (order_.size() < n) {
      bool progressed = false;
      for (std::size_t v = 0; v < n && !progressed; ++v) {
        if (placed[v]) continue;
        for (const auto& e : edges_) {
          if ((e.src == v && placed[e.dst]) || (e.dst == v && placed[e.src])) {
            order_.push_back(v);
            placed[v] = true;
            progressed = true;
            break;
          }
        }
      }
      if (!progressed) throw ValidationError("pattern " + pattern_.name + " is disconnected");
    }
  }

  bool admissible(std::size_t v, const std::string& eid, const std::vector<std::string>& binding,
                  const std::vector<bool>& bound) const {
    const Node& node = graph_.node(eid);
    if (node.label != pattern_.variables[v].label) return false;
    for (std::size_t u = 0; u < binding.size(); ++u) {
      if (!bound[u] || u == v) continue;
      if (pattern_.distinct && pattern_.variables[u].label == pattern_.variables[v].label && binding[u] == eid) {
        return false;
      }
    }
    EidLess less;
    for (const auto& [a, b] : ordered_) {
      if (a == v && bound[b] && !less(eid, binding[b])) return false;
      if (b == v && bound[a] && !less(binding[a], eid)) return false;
    }
    for (const auto& e : edges_) {
      bool touches = e.src == v || e.dst == v;
      if (!touches) continue;
      std::size_t other = e.src == v ? e.dst : e.src;
      if (other != v && !bound[other]) continue;
      const std::string& s = e.src == v ? eid : binding[e.src];
      const std::string& d = e.dst == v ? eid : binding[e.dst];
      if (!graph_.has_edge(s, e.rela, d)) return false;
    }
    return true;
  }

  void extend(std::size_t depth, std::vector<std::string>& binding, std::vector<bool>& bound,
              std::vector<Match>& out) const {
    if (depth == order_.size()) {
      out.push_back(Match{binding});
      return;
    }
    std::size_t v = order_[depth];
    for (const auto& eid : candidates(v, binding, bound)) {
      if (!admissible(v, eid, binding, bound)) continue;
      binding[v] = eid;
      bound[v] = true;
      extend(depth + 1, binding, bound, out);
      bound[v] = false;
    }
  }

  std::vector<std::string> candidates(std::size_t v, const std::vector<std::string>& binding,
                                      const std::vector<bool>& bound) const {
    for (const auto& e : edges_) {
      if (e.dst == v && e.src != v && bound[e.src]) {
        std::vector<std::string> out;
        for (auto i : graph_.out_edges(binding[e.src])) {
          if (graph_.edges()[i].rela == e.rela) out.push_back(graph_.edges()[i].dst);
        }
        return out;
      }
      if (e.src == v && e.dst != v && bound[e.dst]) {
        std::vector<std::string> out;
        for (auto i : graph_.in_edges(binding[e.dst])) {
          if (graph_.edges()[i].rela == e.rela) out.push_back(graph_.edges()[i].src);
        }
        return out;
      }
    }
    return graph_.nodes_with_label(pattern_.variables[v].label);
  }

  const PropertyGraph& graph_;
  const GraphPattern& pattern_;
  std::vector<IndexedEdge> edges_;
  std::vector<std::pair<std::size_t, std::size_t>> ordered_;
  std::vector<std::size_t> order_;
};

}  // namespace

std::vector<Match> find_matches(const PropertyGraph& graph, const GraphPattern& pattern, unsigned workers) {
  pattern.validate();
  for (const auto& v : pattern.variables) {
    if (!graph.has_label(v.label)) throw ValidationError("pattern variable " + v.name + " has unknown label " + v.label);
  }
  if (pattern.variables.empty()) return {};

  Matcher matcher(graph, pattern);
  const auto& firsts = graph.nodes_with_label(pattern.variables[matcher.first_variable()].label);
  std::vector<Match> out;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(firsts.size())));
  if (workers <= 1) {
    matcher.run(firsts, out);
  } else {
    std::vector<std::future<std::vector<Match>>> parts;
    std::size_t chunk = (firsts.size() + workers - 1) / workers;
    for (std::size_t start = 0; start < firsts.size(); start += chunk) {
      std::vector<std::string> slice(firsts.begin() + static_cast<std::ptrdiff_t>(start),
                                     firsts.begin() + static_cast<std::ptrdiff_t>(std::min(firsts.size(), start + chunk)));
      parts.push_back(std::async(std::launch::async, [&matcher, slice = std::move(slice)] {
        std::vector<Match> local;
        matcher.run(slice, local);
        return local;
      }));
    }
    for (auto& f : parts) {
      auto local = f.get();
      out.insert(out.end(), std::make_move_iterator(local.begin()), std::make_move_iterator(local.end()));
    }
  }
  std::sort(out.begin(), out.end(), match_less);
  return out;
}

// ---- pseudo table -------------------------------------------------------------

std::optional<std::size_t> PseudoTable::find_column(const std::string& variable, const std::string& attribute) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].variable == variable && columns[i].attribute == attribute) return i;
  }
  return std::nullopt;
}

std::size_t PseudoTable::column_index(const std::string& variable, const std::string& attribute) const {
  auto idx = find_column(variable, attribute);
  if (!idx) throw ValidationError("pseudo table has no column " + variable + "." + attribute);
  return *idx;
}

const std::string& PseudoTable::eid(const TableRow& row, const std::string& variable) const {
  const auto& cell = row.cells.at(column_index(variable, "id"));
  if (!cell.is_text()) throw ValidationError("id column of " + variable + " does not hold an eid");
  return cell.text();
}

std::vector<std::string> PseudoTable::variables() const {
  std::vector<std::string> out;
  for (const auto& c : columns) {
    if (c.is_id()) out.push_back(c.variable);
  }
  return out;
}

std::vector<Column> table_columns(const PropertyGraph& graph, const GraphPattern& pattern) {
  std::vector<Column> columns;
  for (const auto& v : pattern.variables) {
    const auto& schema = graph.attributes(v.label);
    columns.push_back(Column{v.name, "id", v.label});
    const auto& attrs = v.attributes ? *v.attributes : schema;
    for (const auto& a : attrs) {
      if (std::find(schema.begin(), schema.end(), a) == schema.end()) {
        throw ValidationError("pattern variable " + v.name + " projects unknown attribute " + a);
      }
      columns.push_back(Column{v.name, a, v.label});
    }
  }
  return columns;
}

PseudoTable build_pseudo_table(const PropertyGraph& graph, const GraphPattern& pattern, unsigned workers) {
  PseudoTable table;
  table.pattern_name = pattern.name;
  auto matches = find_matches(graph, pattern, workers);
  table.columns = table_columns(graph, pattern);
  for (std::size_t m = 0; m < matches.size(); ++m) {
    TableRow row;
    row.match_id = m;
    for (const auto& c : table.columns) {
      const std::string& eid = matches[m].binding[pattern.index_of(c.variable)];
      row.cells.push_back(c.is_id() ? AttributeValue(eid) : graph.node(eid).attrs.at(c.attribute));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string table_to_csv(const PseudoTable& table) {
  std::ostringstream out;
  csv::Row header;
  for (const auto& c : table.columns) header.push_back(c.ref());
  csv::write_row(out, header);
  for (const auto& row : table.rows) {
    csv::Row line;
    for (const auto& cell : row.cells) line.push_back(cell.render());
    csv::write_row(out, line);
  }
  return out.str();
}

PseudoTable parse_table_csv(const std::string& text) {
  std::istringstream in(text);
  auto rows = csv::read(in);
  if (rows.empty()) throw ParseError("pseudo table CSV has no header", 1, 1);
  PseudoTable table;
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    const auto& h = rows[0][i];
    auto dot = h.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == h.size()) {
      throw ParseError("pseudo table header '" + h + "' is not of the form var.attr", 1, i + 1);
    }
    table.columns.push_back(Column{h.substr(0, dot), h.substr(dot + 1), ""});
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != table.columns.size()) {
      throw ParseError("pseudo table row has " + std::to_string(rows[r].size()) + " fields, expected " +
                           std::to_string(table.columns.size()),
                       r + 1, 1);
    }
    TableRow row;
    row.match_id = r - 1;
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const auto& raw = rows[r][c];
      if (table.columns[c].is_id()) {
        row.cells.emplace_back(raw);
      } else {
        row.cells.push_back(raw == "?" ? AttributeValue::missing() : AttributeValue::from_cell(raw));
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

PseudoTable load_table_csv(const std::string& path) { return parse_table_csv(read_text_file(path)); }

void save_table_csv(const PseudoTable& table, const std::string& path) { write_text_file(path, table_to_csv(table)); }

}  // namespace gig
