#include "gig/gdd.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "gig/error.hpp"

namespace gig {

namespace {

// Slack for float thresholds: |0.3 - 0.1| <= 0.2 must hold.
constexpr double kThresholdSlack = 1e-9;

bool plain_identifier(const std::string& s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) return false;
  if (s == "eid" || s == "id") return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' ||
           static_cast<unsigned char>(c) >= 0x80;
  });
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string render_name(const std::string& a) { return plain_identifier(a) ? a : "`" + a + "`"; }

int kind_rank(Operand::Kind k) {
  switch (k) {
    case Operand::Kind::Cell:
    case Operand::Kind::Eid:
    case Operand::Kind::Relation:
      return 0;
    case Operand::Kind::Constant:
      return 1;
    case Operand::Kind::Wildcard:
      return 2;
  }
  return 3;
}

std::vector<std::uint32_t> code_points(std::string_view s) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    if (i + len > s.size()) len = 1;
    std::uint32_t cp = len == 1 ? c : (c & (0xFF >> (len + 1)));
    for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string set_key(const ConstraintSet& set) {
  std::string key;
  for (const auto& c : set) {
    key += c.render();
    key += "; ";
  }
  return key;
}

double as_number(const AttributeValue& v) {
  if (v.is_number()) return v.number();
  if (auto n = parse_clean_decimal(v.render())) return *n;
  throw TypeError("absolute difference needs numbers, got '" + v.render() + "'");
}

}  // namespace

const char* to_string(DistanceFn fn) {
  switch (fn) {
    case DistanceFn::Edit:
      return "edit";
    case DistanceFn::AbsDiff:
      return "abs";
    case DistanceFn::Exact:
      return "eq";
    case DistanceFn::EidEq:
      return "eid-eq";
    case DistanceFn::RelEq:
      return "rel";
  }
  return "?";
}

const char* to_string(Truth t) {
  switch (t) {
    case Truth::Holds:
      return "holds";
    case Truth::Fails:
      return "fails";
    case Truth::Undefined:
      return "undefined";
  }
  return "?";
}

// ---- operands & constraints ---------------------------------------------------

Operand Operand::cell(std::string variable, std::string attribute) {
  Operand o;
  o.kind = Kind::Cell;
  o.variable = std::move(variable);
  o.attribute = std::move(attribute);
  return o;
}

Operand Operand::value(AttributeValue constant) {
  if (constant.is_missing()) throw ValidationError("a constant operand cannot be missing");
  Operand o;
  o.kind = Kind::Constant;
  o.constant = std::move(constant);
  return o;
}

Operand Operand::wildcard() { return Operand{}; }

Operand Operand::eid(std::string variable) {
  Operand o;
  o.kind = Kind::Eid;
  o.variable = std::move(variable);
  return o;
}

Operand Operand::relation(std::string variable, std::string relation) {
  Operand o;
  o.kind = Kind::Relation;
  o.variable = std::move(variable);
  o.attribute = std::move(relation);
  return o;
}

std::string Operand::render() const {
  switch (kind) {
    case Kind::Cell:
      return render_name(variable) + "." + render_name(attribute);
    case Kind::Constant:
      return constant.is_number() ? format_number(constant.number()) : quote(constant.text());
    case Kind::Wildcard:
      return "*";
    case Kind::Eid:
      return render_name(variable) + ".eid";
    case Kind::Relation:
      return render_name(variable);
  }
  return "?";
}

DistanceConstraint DistanceConstraint::edit(Operand a, Operand b, double threshold) {
  if (!(threshold >= 0.0) || std::floor(threshold) != threshold) {
    throw ValidationError("edit-distance thresholds must be non-negative integers");
  }
  DistanceConstraint c{DistanceFn::Edit, std::move(a), std::move(b), CompareOp::LessEq, threshold};
  c.canonicalize();
  return c;
}

DistanceConstraint DistanceConstraint::abs_diff(Operand a, Operand b, double threshold) {
  if (!(threshold >= 0.0) || !std::isfinite(threshold)) throw ValidationError("thresholds must be finite and non-negative");
  DistanceConstraint c{DistanceFn::AbsDiff, std::move(a), std::move(b), CompareOp::LessEq, threshold};
  c.canonicalize();
  return c;
}

DistanceConstraint DistanceConstraint::exact(Operand a, Operand b) {
  DistanceConstraint c{DistanceFn::Exact, std::move(a), std::move(b), CompareOp::Eq, 0.0};
  c.canonicalize();
  return c;
}

DistanceConstraint DistanceConstraint::eid_eq(Operand a, Operand b) {
  DistanceConstraint c{DistanceFn::EidEq, std::move(a), std::move(b), CompareOp::Eq, 0.0};
  c.canonicalize();
  return c;
}

DistanceConstraint DistanceConstraint::rel_eq(Operand a, Operand b) {
  DistanceConstraint c{DistanceFn::RelEq, std::move(a), std::move(b), CompareOp::Eq, 0.0};
  c.canonicalize();
  return c;
}

bool DistanceConstraint::is_free_literal() const {
  return (left.is_cell() && right.is_wildcard()) || (left.is_wildcard() && right.is_cell());
}

const Operand& DistanceConstraint::free_cell() const { return left.is_cell() ? left : right; }

void DistanceConstraint::canonicalize() {
  int lr = kind_rank(left.kind);
  int rr = kind_rank(right.kind);
  if (rr < lr || (rr == lr && right.render() < left.render())) std::swap(left, right);
}

std::string DistanceConstraint::render() const {
  switch (fn) {
    case DistanceFn::Edit:
      return "edit(" + left.render() + ", " + right.render() + ") <= " + format_number(threshold);
    case DistanceFn::AbsDiff:
      return "abs(" + left.render() + ", " + right.render() + ") <= " + format_number(threshold);
    case DistanceFn::Exact:
    case DistanceFn::EidEq:
      return "eq(" + left.render() + ", " + right.render() + ")";
    case DistanceFn::RelEq:
      return "rel(" + left.render() + ", " + quote(left.attribute) + ", " + right.render() + ")";
  }
  return "?";
}

std::string DistanceConstraint::op_token() const {
  if (op == CompareOp::Eq) return "=0";
  return "≤" + format_number(threshold);
}

bool operator==(const DistanceConstraint& a, const DistanceConstraint& b) { return a.render() == b.render(); }
bool operator<(const DistanceConstraint& a, const DistanceConstraint& b) { return a.render() < b.render(); }

void normalize(ConstraintSet& set) {
  for (auto& c : set) c.canonicalize();
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
}

void Gdd::normalize() {
  gig::normalize(lhs);
  gig::normalize(rhs);
}

std::string Gdd::body() const {
  std::string out = "LHS:";
  for (std::size_t i = 0; i < lhs.size(); ++i) out += (i ? "; " : " ") + lhs[i].render();
  out += "; RHS:";
  for (std::size_t i = 0; i < rhs.size(); ++i) out += (i ? "; " : " ") + rhs[i].render();
  out += ";";
  return out;
}

bool rule_rank_less(const Gdd& a, const Gdd& b) {
  if (a.provenance.confidence != b.provenance.confidence) return a.provenance.confidence > b.provenance.confidence;
  if (a.provenance.support != b.provenance.support) return a.provenance.support > b.provenance.support;
  return a.body() < b.body();
}

// ---- evaluation -------------------------------------------------------------

std::size_t levenshtein(std::string_view a, std::string_view b) {
  auto x = code_points(a);
  auto y = code_points(b);
  if (x.empty()) return y.size();
  if (y.empty()) return x.size();
  std::vector<std::size_t> row(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (x[i - 1] == y[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[y.size()];
}

std::optional<double> eval_distance(DistanceFn fn, const DistanceInput& a, const DistanceInput& b) {
  if (std::holds_alternative<Wildcard>(a) || std::holds_alternative<Wildcard>(b)) return 0.0;
  const auto& va = std::get<AttributeValue>(a);
  const auto& vb = std::get<AttributeValue>(b);
  if (va.is_missing() || vb.is_missing()) return std::nullopt;
  switch (fn) {
    case DistanceFn::Edit:
      return static_cast<double>(levenshtein(va.render(), vb.render()));
    case DistanceFn::AbsDiff:
      return std::fabs(as_number(va) - as_number(vb));
    case DistanceFn::Exact:
    case DistanceFn::EidEq:
    case DistanceFn::RelEq:
      return va.render() == vb.render() ? 0.0 : 1.0;
  }
  return std::nullopt;
}

namespace {

std::size_t operand_column(const Operand& o, const std::vector<Column>& columns) {
  std::string attribute = o.kind == Operand::Kind::Cell ? o.attribute : "id";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].variable == o.variable && columns[i].attribute == attribute) return i;
  }
  throw ValidationError("no column " + o.variable + "." + attribute + " for operand " + o.render());
}

DistanceInput resolve(const Operand& o, const PseudoTable& table, const TableRow& row) {
  switch (o.kind) {
    case Operand::Kind::Wildcard:
      return Wildcard{};
    case Operand::Kind::Constant:
      return o.constant;
    case Operand::Kind::Cell:
    case Operand::Kind::Eid:
      return row.cells.at(operand_column(o, table.columns));
    case Operand::Kind::Relation:
      break;
  }
  throw ValidationError("relation operand " + o.render() + " outside rel()");
}

std::set<std::string> relation_targets(const PropertyGraph& graph, const std::string& eid, const std::string& rela) {
  std::set<std::string> out;
  for (auto i : graph.out_edges(eid)) {
    if (graph.edges()[i].rela == rela) out.insert(graph.edges()[i].dst);
  }
  return out;
}

Truth check_relation(const DistanceConstraint& c, const PseudoTable& table, const TableRow& row,
                     const PropertyGraph* graph) {
  if (!graph) throw Error("relation constraint " + c.render() + " needs the graph");
  if (c.left.kind != Operand::Kind::Relation) throw ValidationError("malformed relation constraint " + c.render());
  auto left = relation_targets(*graph, table.eid(row, c.left.variable), c.left.attribute);
  if (c.right.is_wildcard()) return Truth::Holds;
  if (c.right.kind == Operand::Kind::Constant) {
    return left.count(c.right.constant.render()) ? Truth::Holds : Truth::Fails;
  }
  if (c.right.kind != Operand::Kind::Relation) throw ValidationError("malformed relation constraint " + c.render());
  auto right = relation_targets(*graph, table.eid(row, c.right.variable), c.right.attribute);
  for (const auto& t : left) {
    if (right.count(t)) return Truth::Holds;
  }
  return Truth::Fails;
}

}  // namespace

Truth check_constraint(const DistanceConstraint& c, const PseudoTable& table, const TableRow& row,
                       const PropertyGraph* graph) {
  if (c.fn == DistanceFn::RelEq) return check_relation(c, table, row, graph);
  auto a = resolve(c.left, table, row);
  auto b = resolve(c.right, table, row);
  auto is_missing = [](const DistanceInput& in) {
    return std::holds_alternative<AttributeValue>(in) && std::get<AttributeValue>(in).is_missing();
  };
  if (is_missing(a) || is_missing(b)) return Truth::Undefined;
  auto d = eval_distance(c.fn, a, b);
  if (!d) return Truth::Undefined;
  if (c.op == CompareOp::Eq) return *d == 0.0 ? Truth::Holds : Truth::Fails;
  return *d <= c.threshold + kThresholdSlack ? Truth::Holds : Truth::Fails;
}

Truth satisfies(const PseudoTable& table, const TableRow& row, const ConstraintSet& phi, const PropertyGraph* graph) {
  bool undefined = false;
  for (const auto& c : phi) {
    Truth t = check_constraint(c, table, row, graph);
    if (t == Truth::Fails) return Truth::Fails;
    if (t == Truth::Undefined) undefined = true;
  }
  return undefined ? Truth::Undefined : Truth::Holds;
}

std::vector<std::size_t> referenced_columns(const DistanceConstraint& c, const std::vector<Column>& columns) {
  std::vector<std::size_t> out;
  for (const Operand* o : {&c.left, &c.right}) {
    if (o->kind == Operand::Kind::Cell || o->kind == Operand::Kind::Eid || o->kind == Operand::Kind::Relation) {
      out.push_back(operand_column(*o, columns));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::size_t> referenced_columns(const ConstraintSet& phi, const std::vector<Column>& columns) {
  std::vector<std::size_t> out;
  for (const auto& c : phi) {
    auto cols = referenced_columns(c, columns);
    out.insert(out.end(), cols.begin(), cols.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void validate_against(const Gdd& rule, const std::vector<Column>& columns) {
  try {
    referenced_columns(rule.lhs, columns);
    referenced_columns(rule.rhs, columns);
  } catch (const ValidationError& e) {
    throw ValidationError("rule " + rule.name + ": " + e.what());
  }
  if (rule.rhs.empty()) throw ValidationError("rule " + rule.name + " has an empty RHS");
}

std::vector<RowStatus> evaluate_rule(const PseudoTable& table, const Gdd& rule, const PropertyGraph* graph) {
  std::vector<std::size_t> all_cols = referenced_columns(rule.lhs, table.columns);
  auto rhs_cols = referenced_columns(rule.rhs, table.columns);
  all_cols.insert(all_cols.end(), rhs_cols.begin(), rhs_cols.end());

  ConstraintSet lhs_bound;
  std::vector<std::size_t> lhs_free;
  for (const auto& c : rule.lhs) {
    if (c.is_free_literal()) {
      lhs_free.push_back(operand_column(c.free_cell(), table.columns));
    } else {
      lhs_bound.push_back(c);
    }
  }
  ConstraintSet rhs_bound;
  std::vector<std::size_t> rhs_free;
  for (const auto& c : rule.rhs) {
    if (c.is_free_literal()) {
      rhs_free.push_back(operand_column(c.free_cell(), table.columns));
    } else {
      rhs_bound.push_back(c);
    }
  }

  std::vector<RowStatus> status(table.rows.size(), RowStatus::Undefined);
  std::vector<bool> bound_ok(table.rows.size(), false);
  std::vector<std::vector<std::string>> keys(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    bool missing = std::any_of(all_cols.begin(), all_cols.end(), [&](std::size_t c) { return row.cells[c].is_missing(); });
    if (missing) continue;
    Truth lhs = satisfies(table, row, lhs_bound, graph);
    if (lhs == Truth::Undefined) continue;
    if (lhs == Truth::Fails) {
      status[r] = RowStatus::LhsFails;
      continue;
    }
    Truth rhs = satisfies(table, row, rhs_bound, graph);
    if (rhs == Truth::Undefined) continue;
    status[r] = RowStatus::Holds;
    bound_ok[r] = rhs == Truth::Holds;
    for (auto c : lhs_free) keys[r].push_back(row.cells[c].render());
  }

  if (!rhs_free.empty()) {
    // group key -> per free RHS column -> value -> count
    std::map<std::vector<std::string>, std::vector<std::map<std::string, std::size_t>>> counts;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      if (status[r] != RowStatus::Holds) continue;
      auto& per_col = counts[keys[r]];
      per_col.resize(rhs_free.size());
      for (std::size_t k = 0; k < rhs_free.size(); ++k) ++per_col[k][table.rows[r].cells[rhs_free[k]].render()];
    }
    std::map<std::vector<std::string>, std::vector<std::string>> consensus;
    for (const auto& [key, per_col] : counts) {
      auto& out = consensus[key];
      for (const auto& values : per_col) {
        // std::map iterates in ascending order, so the first maximum is the
        // smallest rendering among the most frequent values.
        auto best = values.begin();
        for (auto it = values.begin(); it != values.end(); ++it) {
          if (it->second > best->second) best = it;
        }
        out.push_back(best->first);
      }
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      if (status[r] != RowStatus::Holds) continue;
      const auto& want = consensus.at(keys[r]);
      for (std::size_t k = 0; k < rhs_free.size(); ++k) {
        if (table.rows[r].cells[rhs_free[k]].render() != want[k]) bound_ok[r] = false;
      }
    }
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (status[r] == RowStatus::Holds && !bound_ok[r]) status[r] = RowStatus::Violates;
  }
  return status;
}

SatisfactionReport table_satisfies(const PseudoTable& table, const Gdd& rule, const PropertyGraph* graph) {
  if (!rule.scope.empty() && !table.pattern_name.empty() && rule.scope != table.pattern_name) {
    throw ValidationError("rule " + rule.name + " is scoped to " + rule.scope + ", table is over " + table.pattern_name);
  }
  validate_against(rule, table.columns);
  SatisfactionReport report;
  auto status = evaluate_rule(table, rule, graph);
  for (std::size_t r = 0; r < status.size(); ++r) {
    if (status[r] == RowStatus::Violates) report.violations.push_back(table.rows[r].match_id);
    if (status[r] == RowStatus::Undefined) report.undefined.push_back(table.rows[r].match_id);
  }
  report.satisfied = report.violations.empty();
  return report;
}

std::vector<Gdd> consolidate(const std::vector<Gdd>& rules) {
  std::vector<Gdd> current = rules;
  if (current.empty()) return current;
  for (auto& r : current) {
    r.normalize();
    if (r.scope != current.front().scope) {
      throw ValidationError("cannot consolidate rules over different scopes (" + current.front().scope + ", " + r.scope + ")");
    }
  }

  auto merge_by = [](std::vector<Gdd>& in, bool by_lhs) {
    std::vector<Gdd> out;
    std::map<std::string, std::size_t> slot;
    bool changed = false;
    for (auto& r : in) {
      std::string key = set_key(by_lhs ? r.lhs : r.rhs);
      auto [it, fresh] = slot.emplace(key, out.size());
      if (fresh) {
        out.push_back(std::move(r));
        continue;
      }
      Gdd& into = out[it->second];
      ConstraintSet& grow = by_lhs ? into.rhs : into.lhs;
      const ConstraintSet& extra = by_lhs ? r.rhs : r.lhs;
      grow.insert(grow.end(), extra.begin(), extra.end());
      normalize(grow);
      into.provenance.mined = into.provenance.mined && r.provenance.mined;
      into.provenance.support = std::min(into.provenance.support, r.provenance.support);
      into.provenance.confidence = std::min(into.provenance.confidence, r.provenance.confidence);
      changed = true;
    }
    in = std::move(out);
    return changed;
  };

  bool changed = true;
  while (changed) {
    bool a = merge_by(current, true);
    bool b = merge_by(current, false);
    changed = a || b;
  }
  std::sort(current.begin(), current.end(), [](const Gdd& x, const Gdd& y) { return x.body() < y.body(); });
  return current;
}

// ---- positional masks ---------------------------------------------------------

std::size_t PositionalMask::popcount() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), true)); }

std::string PositionalMask::to_string() const {
  std::string out = "(";
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (i) out += ",";
    out += bits[i] ? "1" : "0";
  }
  return out + ")";
}

PositionalMask to_mask(const Gdd& rule, const std::vector<Column>& columns) {
  PositionalMask mask;
  mask.bits.assign(columns.size(), false);
  mask.rhs_bits.assign(columns.size(), false);
  for (auto c : referenced_columns(rule.lhs, columns)) mask.bits[c] = true;
  for (auto c : referenced_columns(rule.rhs, columns)) {
    mask.bits[c] = true;
    mask.rhs_bits[c] = true;
  }
  return mask;
}

}  // namespace gig
