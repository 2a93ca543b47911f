#include "gig/miner.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "gig/error.hpp"
#include "gig/parallel.hpp"

namespace gig {

void MinerConfig::validate() const {
  if (max_lhs_size < 1) throw ValidationError("max_lhs_size must be at least 1");
  if (min_support < 1) throw ValidationError("min_support must be at least 1");
  if (!(min_confidence > 0.0 && min_confidence <= 1.0)) throw ValidationError("min_confidence must be in (0, 1]");
  if (top_k_per_rhs < 1) throw ValidationError("top_k_per_rhs must be at least 1");
  for (double t : edit_thresholds) {
    if (!(t >= 0) || std::floor(t) != t) throw ValidationError("edit thresholds must be non-negative integers");
  }
  for (double t : numeric_thresholds) {
    if (!(t >= 0) || !std::isfinite(t)) throw ValidationError("numeric thresholds must be finite and non-negative");
  }
}

MinerConfig miner_config_from_json(const json& j) {
  MinerConfig c;
  if (!j.is_object()) throw ValidationError("miner config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "max_lhs" || key == "max_lhs_size") {
      c.max_lhs_size = value.get<std::size_t>();
    } else if (key == "edit_thresholds") {
      c.edit_thresholds = value.get<std::vector<double>>();
    } else if (key == "numeric_thresholds") {
      c.numeric_thresholds = value.get<std::vector<double>>();
    } else if (key == "min_support") {
      c.min_support = value.get<std::size_t>();
    } else if (key == "min_confidence") {
      c.min_confidence = value.get<double>();
    } else if (key == "top_k_per_rhs") {
      c.top_k_per_rhs = value.get<std::size_t>();
    } else if (key == "workers") {
      c.workers = value.get<unsigned>();
    } else {
      throw ValidationError("unknown miner setting '" + key + "'");
    }
  }
  c.validate();
  return c;
}

json miner_config_to_json(const MinerConfig& c) {
  return {{"max_lhs", c.max_lhs_size},           {"edit_thresholds", c.edit_thresholds},
          {"numeric_thresholds", c.numeric_thresholds}, {"min_support", c.min_support},
          {"min_confidence", c.min_confidence},  {"top_k_per_rhs", c.top_k_per_rhs}};
}

namespace {

std::vector<AttributeValue> column_values(const PseudoTable& table, std::size_t col) {
  std::vector<AttributeValue> out;
  for (const auto& row : table.rows) {
    if (!row.cells[col].is_missing()) out.push_back(row.cells[col]);
  }
  return out;
}

bool labels_compatible(const Column& a, const Column& b) {
  return a.label.empty() || b.label.empty() || a.label == b.label;
}

}  // namespace

std::vector<DistanceConstraint> candidate_constraints(const PseudoTable& table, const MinerConfig& config) {
  std::vector<DistanceConstraint> out;
  const auto& cols = table.columns;
  std::vector<double> edits = config.edit_thresholds;
  std::vector<double> numerics = config.numeric_thresholds;
  std::sort(edits.begin(), edits.end());
  edits.erase(std::unique(edits.begin(), edits.end()), edits.end());
  std::sort(numerics.begin(), numerics.end());
  numerics.erase(std::unique(numerics.begin(), numerics.end()), numerics.end());

  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i].is_id()) continue;
    for (std::size_t j = i + 1; j < cols.size(); ++j) {
      if (cols[j].is_id() || cols[j].attribute != cols[i].attribute || !labels_compatible(cols[i], cols[j])) continue;
      auto values = column_values(table, i);
      auto more = column_values(table, j);
      values.insert(values.end(), more.begin(), more.end());
      Operand a = Operand::cell(cols[i].variable, cols[i].attribute);
      Operand b = Operand::cell(cols[j].variable, cols[j].attribute);
      if (infer_kind(values) == ValueKind::Numeric) {
        for (double t : numerics) out.push_back(DistanceConstraint::abs_diff(a, b, t));
      } else {
        for (double t : edits) out.push_back(DistanceConstraint::edit(a, b, t));
      }
    }
  }
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i].is_id()) continue;
    std::map<std::string, std::pair<AttributeValue, std::size_t>> counts;
    for (const auto& v : column_values(table, i)) {
      auto& slot = counts.try_emplace(v.render(), v, 0).first->second;
      ++slot.second;
    }
    for (const auto& [text, entry] : counts) {
      if (entry.second >= config.min_support) {
        out.push_back(DistanceConstraint::exact(Operand::cell(cols[i].variable, cols[i].attribute), Operand::value(entry.first)));
      }
    }
  }
  for (const auto& c : cols) {
    if (c.is_id()) continue;
    out.push_back(DistanceConstraint::exact(Operand::cell(c.variable, c.attribute), Operand::wildcard()));
  }
  return out;
}

RuleScore score(const PseudoTable& table, const ConstraintSet& phi_x, const ConstraintSet& phi_y, const PropertyGraph* graph) {
  Gdd rule;
  rule.lhs = phi_x;
  rule.rhs = phi_y;
  RuleScore s;
  for (RowStatus st : evaluate_rule(table, rule, graph)) {
    if (st == RowStatus::Holds || st == RowStatus::Violates) ++s.support;
    if (st == RowStatus::Holds) ++s.holds;
  }
  if (s.support > 0) s.confidence = static_cast<double>(s.holds) / static_cast<double>(s.support);
  return s;
}

namespace {

enum : std::uint8_t { kHolds = 0, kFails = 1, kUndefined = 2 };

// Per-candidate row truths and interned cell values, so that scoring a rule
// never touches AttributeValue again.
struct Prepared {
  std::vector<std::vector<std::uint8_t>> truth;  // [candidate][row]
  std::vector<int> free_column;                  // -1 for bound candidates
  std::vector<std::vector<std::size_t>> columns; // referenced columns per candidate
  std::vector<std::vector<int>> value_id;        // [column][row], ids ordered like renderings, -1 missing
};

Prepared prepare(const PseudoTable& table, const std::vector<DistanceConstraint>& cands) {
  Prepared p;
  p.value_id.assign(table.columns.size(), std::vector<int>(table.rows.size(), -1));
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    std::set<std::string> distinct;
    for (const auto& row : table.rows) {
      if (!row.cells[c].is_missing()) distinct.insert(row.cells[c].render());
    }
    std::map<std::string, int> rank;
    for (const auto& v : distinct) rank.emplace(v, static_cast<int>(rank.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      if (!table.rows[r].cells[c].is_missing()) p.value_id[c][r] = rank.at(table.rows[r].cells[c].render());
    }
  }
  for (const auto& cand : cands) {
    std::vector<std::uint8_t> t(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      Truth v = check_constraint(cand, table, table.rows[r]);
      t[r] = v == Truth::Holds ? kHolds : v == Truth::Fails ? kFails : kUndefined;
    }
    p.truth.push_back(std::move(t));
    p.columns.push_back(referenced_columns(cand, table.columns));
    p.free_column.push_back(cand.is_free_literal() ? static_cast<int>(p.columns.back().front()) : -1);
  }
  return p;
}

std::size_t lhs_support(const Prepared& p, const std::vector<std::size_t>& lhs, std::size_t rows) {
  std::size_t n = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    bool ok = true;
    for (auto c : lhs) ok = ok && p.truth[c][r] == kHolds;
    n += ok;
  }
  return n;
}

RuleScore fast_score(const Prepared& p, const std::vector<std::size_t>& lhs, std::size_t rhs, std::size_t rows) {
  RuleScore s;
  std::vector<int> key_cols;
  for (auto c : lhs) {
    if (p.free_column[c] >= 0) key_cols.push_back(p.free_column[c]);
  }
  int target = p.free_column[rhs];
  std::map<std::vector<int>, std::map<int, std::size_t>> groups;
  std::vector<std::size_t> supporting;
  for (std::size_t r = 0; r < rows; ++r) {
    bool undefined = p.truth[rhs][r] == kUndefined;
    bool fails = false;
    for (auto c : lhs) {
      undefined = undefined || p.truth[c][r] == kUndefined;
      fails = fails || p.truth[c][r] == kFails;
    }
    if (undefined || fails) continue;
    ++s.support;
    if (target < 0) {
      s.holds += p.truth[rhs][r] == kHolds;
      continue;
    }
    supporting.push_back(r);
    std::vector<int> key;
    for (int c : key_cols) key.push_back(p.value_id[c][r]);
    ++groups[key][p.value_id[target][r]];
  }
  if (target >= 0) {
    std::map<std::vector<int>, int> consensus;
    for (const auto& [key, counts] : groups) {
      auto best = counts.begin();
      for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) best = it;
      }
      consensus[key] = best->first;
    }
    for (auto r : supporting) {
      std::vector<int> key;
      for (int c : key_cols) key.push_back(p.value_id[c][r]);
      s.holds += p.value_id[target][r] == consensus.at(key);
    }
  }
  if (s.support > 0) s.confidence = static_cast<double>(s.holds) / static_cast<double>(s.support);
  return s;
}

bool passes(const RuleScore& s, const MinerConfig& config) {
  return s.support >= config.min_support &&
         static_cast<double>(s.holds) >= config.min_confidence * static_cast<double>(s.support) - 1e-12;
}

struct Found {
  std::vector<std::size_t> lhs;
  std::size_t rhs;
  RuleScore score;
};

}  // namespace

std::vector<Gdd> mine(const PseudoTable& table, const MinerConfig& config) {
  config.validate();
  if (table.rows.empty()) return {};
  const auto cands = candidate_constraints(table, config);
  const Prepared p = prepare(table, cands);
  const std::size_t rows = table.rows.size();

  auto single_column = [&](std::size_t c) { return p.columns[c].size() == 1; };
  auto clashes = [&](const std::vector<std::size_t>& lhs, std::size_t add) {
    if (!single_column(add)) return false;
    for (auto c : lhs) {
      if (single_column(c) && p.columns[c][0] == p.columns[add][0]) return true;
    }
    return false;
  };

  std::map<std::pair<std::vector<std::size_t>, std::size_t>, RuleScore> passing;
  std::vector<std::vector<std::size_t>> level;
  for (std::size_t c = 0; c < cands.size(); ++c) level.push_back({c});

  for (std::size_t size = 1; size <= config.max_lhs_size && !level.empty(); ++size) {
    std::vector<std::size_t> support(level.size());
    parallel_for(level.size(), config.workers, [&](std::size_t i) { support[i] = lhs_support(p, level[i], rows); });
    std::vector<std::vector<std::size_t>> frequent;
    for (std::size_t i = 0; i < level.size(); ++i) {
      if (support[i] >= config.min_support) frequent.push_back(level[i]);
    }

    std::vector<std::vector<Found>> found(frequent.size());
    parallel_for(frequent.size(), config.workers, [&](std::size_t i) {
      const auto& lhs = frequent[i];
      std::set<std::size_t> lhs_cols;
      for (auto c : lhs) lhs_cols.insert(p.columns[c].begin(), p.columns[c].end());
      for (std::size_t rhs = 0; rhs < cands.size(); ++rhs) {
        bool trivial = std::all_of(p.columns[rhs].begin(), p.columns[rhs].end(),
                                   [&](std::size_t col) { return lhs_cols.count(col) > 0; });
        if (trivial) continue;
        RuleScore s = fast_score(p, lhs, rhs, rows);
        if (passes(s, config)) found[i].push_back(Found{lhs, rhs, s});
      }
    });
    for (auto& list : found) {
      for (auto& f : list) passing.emplace(std::make_pair(f.lhs, f.rhs), f.score);
    }

    if (size == config.max_lhs_size) break;
    std::set<std::vector<std::size_t>> frequent_set(frequent.begin(), frequent.end());
    std::vector<std::vector<std::size_t>> next;
    for (const auto& lhs : frequent) {
      for (std::size_t add = lhs.back() + 1; add < cands.size(); ++add) {
        if (clashes(lhs, add)) continue;
        std::vector<std::size_t> grown = lhs;
        grown.push_back(add);
        bool all_frequent = true;
        for (std::size_t drop = 0; drop < grown.size() && all_frequent; ++drop) {
          std::vector<std::size_t> sub = grown;
          sub.erase(sub.begin() + static_cast<std::ptrdiff_t>(drop));
          all_frequent = frequent_set.count(sub) > 0;
        }
        if (all_frequent) next.push_back(std::move(grown));
      }
    }
    level = std::move(next);
  }

  std::vector<Gdd> rules;
  for (const auto& [key, s] : passing) {
    const auto& [lhs, rhs] = key;
    bool minimal = true;
    // every proper non-empty subset, as bitmasks over lhs positions
    for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << lhs.size()) && minimal; ++mask) {
      std::vector<std::size_t> sub;
      for (std::size_t b = 0; b < lhs.size(); ++b) {
        if (mask & (std::size_t{1} << b)) sub.push_back(lhs[b]);
      }
      minimal = passing.count({sub, rhs}) == 0;
    }
    if (!minimal) continue;
    Gdd g;
    g.scope = table.pattern_name;
    for (auto c : lhs) g.lhs.push_back(cands[c]);
    g.rhs.push_back(cands[rhs]);
    g.provenance = Provenance{true, s.support, *s.confidence};
    g.normalize();
    rules.push_back(std::move(g));
  }
  std::sort(rules.begin(), rules.end(), rule_rank_less);
  for (std::size_t i = 0; i < rules.size(); ++i) rules[i].name = "r" + std::to_string(i + 1);
  return rules;
}

std::vector<Gdd> select_rules(const std::vector<Gdd>& rules, std::size_t top_k_per_rhs) {
  auto target = [](const Gdd& g) {
    std::set<std::string> refs;
    for (const auto& c : g.rhs) {
      for (const Operand* o : {&c.left, &c.right}) {
        if (o->kind == Operand::Kind::Cell) refs.insert(o->variable + "." + o->attribute);
        if (o->kind == Operand::Kind::Eid || o->kind == Operand::Kind::Relation) refs.insert(o->variable + ".id");
      }
    }
    std::string key;
    for (const auto& r : refs) key += r + "|";
    return key;
  };
  std::vector<Gdd> sorted = rules;
  std::sort(sorted.begin(), sorted.end(), rule_rank_less);
  std::map<std::string, std::size_t> kept;
  std::vector<Gdd> out;
  for (auto& g : sorted) {
    if (kept[target(g)]++ < top_k_per_rhs) out.push_back(std::move(g));
  }
  return out;
}

}  // namespace gig
