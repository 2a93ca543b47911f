#include "gig/imputer.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "gig/error.hpp"
#include "gig/parallel.hpp"
#include "gig/seq/beam.hpp"

namespace gig {

std::vector<MissingSite> find_missing_sites(const PseudoTable& table) {
  std::vector<MissingSite> sites;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      const Column& col = table.columns[c];
      if (col.is_id() || !row.cells[c].is_missing()) continue;
      const std::string& eid = table.eid(row, col.variable);
      auto key = std::make_pair(eid, col.attribute);
      auto it = seen.find(key);
      if (it != seen.end()) {
        sites[it->second].alternatives.emplace_back(r, c);
        continue;
      }
      seen.emplace(key, sites.size());
      MissingSite s;
      s.match_id = row.match_id;
      s.row = r;
      s.column = c;
      s.variable = col.variable;
      s.attribute = col.attribute;
      s.eid = eid;
      sites.push_back(std::move(s));
    }
  }
  return sites;
}

std::vector<MaskedRule> mask_rules(const std::vector<Gdd>& rules, const std::vector<Column>& columns) {
  std::vector<MaskedRule> out;
  out.reserve(rules.size());
  for (const Gdd& r : rules) out.push_back({r, to_mask(r, columns)});
  return out;
}

std::vector<const MaskedRule*> applicable_rules(const std::vector<MaskedRule>& masks, std::size_t column) {
  std::vector<const MaskedRule*> out;
  for (const auto& m : masks) {
    if (column < m.mask.rhs_bits.size() && m.mask.rhs_bits[column]) out.push_back(&m);
  }
  std::stable_sort(out.begin(), out.end(), [](const MaskedRule* a, const MaskedRule* b) {
    return rule_rank_less(a->rule, b->rule);
  });
  return out;
}

std::optional<std::vector<int>> assemble_input(const PseudoTable& table, const TableRow& row, const Gdd& rule,
                                               const seq::Vocabulary& vocab) {
  return seq::encoder_input(table, row, rule, vocab);
}

namespace {

std::string site_label(const MissingSite& site, const PropertyGraph& graph) {
  return graph.node(site.eid).label;
}

std::optional<AttributeValue> admissible_in(const std::string& value, const AttributeDomain& domain) {
  if (value == "<unk>") return std::nullopt;
  for (const auto& v : domain.values) {
    if (v.render() == value) return v;
  }
  if (domain.values.size() >= 2) return std::nullopt;
  AttributeValue typed = AttributeValue::from_cell(value);
  if (infer_kind({typed}) != domain.kind) return std::nullopt;
  return typed;
}

}  // namespace

std::optional<AttributeValue> admissible_value(const std::string& value, const MissingSite& site,
                                               const PropertyGraph& graph) {
  return admissible_in(value, attribute_domain(graph, site_label(site, graph), site.attribute));
}

bool validate_semantic(const std::string& value, const MissingSite& site, const PropertyGraph& graph) {
  return admissible_value(value, site, graph).has_value();
}

const char* to_string(DecisionStatus s) {
  switch (s) {
    case DecisionStatus::Imputed: return "imputed";
    case DecisionStatus::RejectedInconsistent: return "rejected-inconsistent";
    case DecisionStatus::AbstainedNoRule: return "abstained-no-rule";
    case DecisionStatus::AbstainedMissingLhs: return "abstained-missing-lhs";
    case DecisionStatus::AbstainedUnk: return "abstained-unk";
  }
  return "?";
}

DecisionStatus decision_status_from_string(const std::string& s) {
  for (auto st : {DecisionStatus::Imputed, DecisionStatus::RejectedInconsistent, DecisionStatus::AbstainedNoRule,
                  DecisionStatus::AbstainedMissingLhs, DecisionStatus::AbstainedUnk}) {
    if (s == to_string(st)) return st;
  }
  throw ParseError("unknown decision status '" + s + "'");
}

PredictorOutput ModelPredictor::predict(const std::vector<int>& enc, const seq::DecodeTemplate& tmpl,
                                        std::size_t slot) const {
  auto p = seq::predict_topk(checkpoint_.model, checkpoint_.vocab, enc, beam_width_, &tmpl);
  PredictorOutput out;
  out.unk_input = p.unk_input;
  if (p.hypotheses.empty()) return out;
  const auto& best = p.hypotheses.front();
  out.score = best.score;
  auto values = seq::slot_values(tmpl, best.tokens, slot);
  if (!values) return out;
  std::string joined;
  for (std::size_t i = 0; i < values->size(); ++i) {
    int t = (*values)[i];
    if (t == seq::kUnk) return out;
    if (i) joined += ' ';
    joined += checkpoint_.vocab.token(t);
  }
  out.value = joined;
  return out;
}

ImputeResult impute_graph(const PropertyGraph& graph, const PseudoTable& table, const std::vector<MaskedRule>& rules,
                          const Predictor& predictor, unsigned workers) {
  for (const auto& m : rules) {
    if (m.mask.bits.size() != table.columns.size() || m.mask.rhs_bits.size() != table.columns.size()) {
      throw ValidationError("mask of rule " + m.rule.name + " has " + std::to_string(m.mask.bits.size()) +
                            " positions, table has " + std::to_string(table.columns.size()) + " columns");
    }
  }
  const auto sites = find_missing_sites(table);
  const auto& vocab = predictor.vocab();

  // Domains and templates are shared across sites; build them up front.
  std::map<std::pair<std::string, std::string>, AttributeDomain> domains;
  for (const auto& s : sites) {
    auto key = std::make_pair(site_label(s, graph), s.attribute);
    if (!domains.count(key)) domains.emplace(key, attribute_domain(graph, key.first, key.second));
  }
  std::vector<seq::DecodeTemplate> templates;
  templates.reserve(rules.size());
  for (const auto& m : rules) templates.push_back(seq::decode_template(m.rule, table.columns, vocab));

  std::vector<ImputationDecision> decisions(sites.size());
  parallel_for(sites.size(), workers, [&](std::size_t i) {
    const MissingSite& site = sites[i];
    ImputationDecision& d = decisions[i];
    d.site = site;
    d.status = DecisionStatus::AbstainedNoRule;

    std::vector<std::pair<std::size_t, std::size_t>> occurrences{{site.row, site.column}};
    occurrences.insert(occurrences.end(), site.alternatives.begin(), site.alternatives.end());
    for (auto [r, c] : occurrences) {
      const TableRow& row = table.rows[r];
      const MaskedRule* chosen = nullptr;
      for (const MaskedRule* m : applicable_rules(rules, c)) {
        if (satisfies(table, row, m->rule.lhs, &graph) != Truth::Fails) {
          chosen = m;
          break;
        }
      }
      if (!chosen) continue;
      auto enc = assemble_input(table, row, chosen->rule, vocab);
      if (!enc) {
        d.status = DecisionStatus::AbstainedMissingLhs;
        d.rule = chosen->rule.name;
        d.lhs_columns = referenced_columns(chosen->rule.lhs, table.columns);
        d.used_match = row.match_id;
        continue;
      }
      const auto& tmpl = templates[static_cast<std::size_t>(chosen - rules.data())];
      auto slot = seq::slot_for_column(tmpl, c);
      if (!slot) continue;

      d.rule = chosen->rule.name;
      d.lhs_columns = referenced_columns(chosen->rule.lhs, table.columns);
      d.used_match = row.match_id;
      d.model_called = true;
      PredictorOutput out = predictor.predict(*enc, tmpl, *slot);
      d.unk_input = out.unk_input;
      d.score = out.score;
      if (!out.value) {
        d.status = DecisionStatus::AbstainedUnk;
      } else {
        d.predicted = out.value;
        const auto& domain = domains.at({site_label(site, graph), site.attribute});
        d.status = admissible_in(*out.value, domain) ? DecisionStatus::Imputed : DecisionStatus::RejectedInconsistent;
      }
      break;
    }
  });

  ImputeResult result;
  std::vector<CellUpdate> updates;
  for (const auto& d : decisions) {
    result.model_calls += d.model_called;
    if (d.status != DecisionStatus::Imputed) continue;
    const auto& domain = domains.at({site_label(d.site, graph), d.site.attribute});
    updates.push_back({d.site.eid, d.site.attribute, *admissible_in(*d.predicted, domain)});
  }
  result.graph = graph.with_values(updates);
  result.decisions = std::move(decisions);
  return result;
}

ImputeResult impute_graph(const PropertyGraph& graph, const PseudoTable& table, const std::vector<MaskedRule>& rules,
                          const seq::Checkpoint& checkpoint, std::size_t beam_width, unsigned workers) {
  ModelPredictor predictor(checkpoint, beam_width);
  return impute_graph(graph, table, rules, predictor, workers);
}

namespace {

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

json decision_to_json(const ImputationDecision& d) {
  json alts = json::array();
  for (auto [r, c] : d.site.alternatives) alts.push_back({r, c});
  return json{{"match_id", d.site.match_id},
              {"row", d.site.row},
              {"M", d.site.column},
              {"variable", d.site.variable},
              {"attribute", d.site.attribute},
              {"eid", d.site.eid},
              {"alternatives", alts},
              {"rule", opt(d.rule)},
              {"I", d.lhs_columns},
              {"used_match", opt(d.used_match)},
              {"predicted", opt(d.predicted)},
              {"score", opt(d.score)},
              {"status", to_string(d.status)},
              {"unk_input", d.unk_input},
              {"model_called", d.model_called}};
}

ImputationDecision decision_from_json(const json& j) {
  try {
    ImputationDecision d;
    d.site.match_id = j.at("match_id").get<std::size_t>();
    d.site.row = j.value("row", std::size_t{0});
    d.site.column = j.at("M").get<std::size_t>();
    d.site.variable = j.at("variable").get<std::string>();
    d.site.attribute = j.at("attribute").get<std::string>();
    d.site.eid = j.at("eid").get<std::string>();
    if (j.contains("alternatives")) {
      for (const auto& a : j.at("alternatives")) d.site.alternatives.emplace_back(a.at(0), a.at(1));
    }
    d.rule = get_opt<std::string>(j, "rule");
    if (j.contains("I")) d.lhs_columns = j.at("I").get<std::vector<std::size_t>>();
    d.used_match = get_opt<std::size_t>(j, "used_match");
    d.predicted = get_opt<std::string>(j, "predicted");
    d.score = get_opt<double>(j, "score");
    d.status = decision_status_from_string(j.at("status").get<std::string>());
    d.unk_input = j.value("unk_input", false);
    d.model_called = j.value("model_called", false);
    return d;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad decision record: ") + e.what());
  }
}

std::string decision_log(const std::vector<ImputationDecision>& decisions) {
  std::string out;
  for (const auto& d : decisions) out += decision_to_json(d).dump() + "\n";
  return out;
}

std::vector<ImputationDecision> parse_decision_log(const std::string& text) {
  std::vector<ImputationDecision> out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("decision log: ") + e.what(), n, e.byte);
    }
    out.push_back(decision_from_json(j));
  }
  return out;
}

}  // namespace gig
