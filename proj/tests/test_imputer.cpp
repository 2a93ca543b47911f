#include <doctest.h>

#include "gig/error.hpp"
#include "gig/imputer.hpp"
#include "gig/rule_dsl.hpp"
#include "gig/seq/train.hpp"
#include "oracles.hpp"

using namespace gig;

namespace {

PseudoTable table1() { return build_pseudo_table(oracle::table1_graph(), oracle::table1_pattern()); }

std::vector<Gdd> rules(const std::string& text) { return parse_rules(text); }

class Silent : public Predictor {
 public:
  explicit Silent(seq::Vocabulary v) : v_(std::move(v)) {}
  const seq::Vocabulary& vocab() const override { return v_; }
  PredictorOutput predict(const std::vector<int>&, const seq::DecodeTemplate&, std::size_t) const override {
    return {};
  }

 private:
  seq::Vocabulary v_;
};

const std::string kNameRule = "rule r1 on table1 { LHS: eq(x.Name, *); RHS: eq(y.Name, *); }";

}  // namespace

TEST_SUITE("imputer") {

TEST_CASE("the games fixture has one missing site with a second occurrence") {
  auto t = table1();
  auto sites = find_missing_sites(t);
  REQUIRE(sites.size() == 1);
  const auto& s = sites[0];
  CHECK(s.eid == "7");
  CHECK(s.variable == "y");
  CHECK(s.attribute == "Name");
  CHECK(t.columns[s.column].variable == "y");
  CHECK(t.columns[s.column].attribute == "Name");
  CHECK(t.rows[s.row].match_id == s.match_id);
  REQUIRE(s.alternatives.size() == 1);
  CHECK(s.alternatives[0].second == s.column);
  CHECK(t.rows[s.alternatives[0].first].cells[s.column].is_missing());
}

TEST_CASE("covering rules come best first") {
  auto t = table1();
  auto rs = rules(
      "rule a on table1 { LHS: eq(x.Name, *); RHS: eq(y.Name, *); }\n"
      "rule b on table1 { LHS: eq(y.Genre, *); RHS: eq(y.Name, *); }\n"
      "rule c on table1 { LHS: eq(y.Genre, *); RHS: eq(y.Year, *); }\n");
  rs[0].provenance.confidence = 0.9;
  rs[0].provenance.support = 10;
  rs[1].provenance.confidence = 1.0;
  rs[1].provenance.support = 2;
  auto masked = mask_rules(rs, t.columns);
  auto name = t.column_index("y", "Name");
  auto app = applicable_rules(masked, name);
  REQUIRE(app.size() == 2);
  CHECK(app[0]->rule.name == "b");
  CHECK(app[1]->rule.name == "a");
  CHECK(applicable_rules(masked, t.column_index("x", "Name")).empty());
}

TEST_CASE("encoder input carries the LHS values") {
  auto t = table1();
  auto r = rules(kNameRule)[0];
  auto v = seq::build_vocab(t, {r});
  auto in = assemble_input(t, t.rows[1], r, v);
  REQUIRE(in);
  CHECK(std::find(in->begin(), in->end(), v.id("EA")) != in->end());
  auto r2 = rules("LHS: eq(y.Name, *); RHS: eq(y.Genre, *);")[0];
  CHECK_FALSE(assemble_input(t, t.rows[1], r2, seq::build_vocab(t, {r2})).has_value());
}

TEST_CASE("semantic validation uses the attribute domain") {
  auto g = oracle::table1_graph();
  auto site = find_missing_sites(table1()).at(0);
  CHECK(validate_semantic("F20", site, g));
  CHECK(validate_semantic(" F20 ", site, g) == validate_semantic(" F20 ", site, g));
  CHECK_FALSE(validate_semantic("2020", site, g));
  CHECK_FALSE(validate_semantic("<unk>", site, g));
  CHECK_FALSE(validate_semantic("Zelda", site, g));
}

TEST_CASE("rejected predictions leave the graph alone") {
  auto g = oracle::table1_graph();
  auto t = table1();
  auto rs = rules(kNameRule);
  auto v = seq::build_vocab(t, rs);
  auto res = impute_graph(g, t, mask_rules(rs, t.columns), FixedPredictor(v, "2020"));
  REQUIRE(res.decisions.size() == 1);
  CHECK(res.decisions[0].status == DecisionStatus::RejectedInconsistent);
  CHECK(res.decisions[0].predicted == "2020");
  CHECK(res.graph == g);
  CHECK(res.model_calls == 1);
}

TEST_CASE("accepted predictions write exactly the site") {
  auto g = oracle::table1_graph();
  auto t = table1();
  auto rs = rules(kNameRule);
  auto v = seq::build_vocab(t, rs);
  auto res = impute_graph(g, t, mask_rules(rs, t.columns), FixedPredictor(v, "F20"));
  REQUIRE(res.decisions.size() == 1);
  const auto& d = res.decisions[0];
  CHECK(d.status == DecisionStatus::Imputed);
  CHECK(d.rule == "r1");
  CHECK(d.lhs_columns == std::vector<std::size_t>{t.column_index("x", "Name")});
  CHECK(d.used_match == t.rows[1].match_id);
  CHECK(res.graph.node("7").value("Name") == AttributeValue("F20"));
  for (const auto& [eid, n] : g.nodes()) {
    for (const auto& [attr, val] : n.attrs) {
      if (eid == "7" && attr == "Name") continue;
      CHECK(res.graph.node(eid).value(attr) == val);
    }
  }
  CHECK(res.graph.edges() == g.edges());
}

TEST_CASE("abstentions") {
  auto g = oracle::table1_graph();
  auto t = table1();
  SUBCASE("no rule") {
    auto rs = rules("LHS: eq(y.Genre, *); RHS: eq(y.Year, *);");
    auto res = impute_graph(g, t, mask_rules(rs, t.columns), FixedPredictor(seq::build_vocab(t, rs), "F20"));
    CHECK(res.decisions.at(0).status == DecisionStatus::AbstainedNoRule);
    CHECK(res.model_calls == 0);
  }
  SUBCASE("no value decoded") {
    auto rs = rules(kNameRule);
    auto res = impute_graph(g, t, mask_rules(rs, t.columns), Silent(seq::build_vocab(t, rs)));
    CHECK(res.decisions.at(0).status == DecisionStatus::AbstainedUnk);
    CHECK(res.graph == g);
  }
}

TEST_CASE("a complete graph comes back unchanged") {
  auto g = oracle::planted_fd_graph(30, 4);
  GraphPattern p;
  p.name = "one";
  p.variables.push_back({"t", "rec", std::nullopt});
  auto t = build_pseudo_table(g, p);
  auto rs = rules("LHS: eq(t.A, *); RHS: eq(t.B, *);");
  auto res = impute_graph(g, t, mask_rules(rs, t.columns), FixedPredictor(seq::build_vocab(t, rs), "b1"));
  CHECK(res.graph == g);
  CHECK(res.decisions.empty());
  CHECK(decision_log(res.decisions).empty());
}

TEST_CASE("one model call per site at most") {
  auto g = oracle::planted_fd_graph(200, 9);
  auto [holey, truth] = inject_missing(g, 0.05, 3);
  GraphPattern p;
  p.name = "one";
  p.variables.push_back({"t", "rec", std::nullopt});
  auto t = build_pseudo_table(holey, p);
  auto rs = rules("LHS: eq(t.A, *); RHS: eq(t.B, *);\nLHS: eq(t.B, *); RHS: eq(t.C, *);");
  auto res = impute_graph(holey, t, mask_rules(rs, t.columns), FixedPredictor(seq::build_vocab(t, rs), "b1"), 3);
  CHECK(res.decisions.size() == truth.entries.size());
  CHECK(res.model_calls <= res.decisions.size());
  std::size_t called = 0;
  for (const auto& d : res.decisions) called += d.model_called;
  CHECK(called == res.model_calls);
}

TEST_CASE("mask width must match the table") {
  auto t = table1();
  auto rs = rules(kNameRule);
  auto masked = mask_rules(rs, t.columns);
  masked[0].mask.bits.pop_back();
  CHECK_THROWS_AS(impute_graph(oracle::table1_graph(), t, masked, FixedPredictor(seq::build_vocab(t, rs), "F20")),
                  ValidationError);
}

TEST_CASE("decision log round trip") {
  auto g = oracle::table1_graph();
  auto t = table1();
  auto rs = rules(kNameRule);
  auto res = impute_graph(g, t, mask_rules(rs, t.columns), FixedPredictor(seq::build_vocab(t, rs), "F20"));
  auto text = decision_log(res.decisions);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  auto back = parse_decision_log(text);
  REQUIRE(back.size() == 1);
  CHECK(back[0].site == res.decisions[0].site);
  CHECK(back[0].status == res.decisions[0].status);
  CHECK(back[0].rule == res.decisions[0].rule);
  CHECK(back[0].predicted == res.decisions[0].predicted);
  CHECK(back[0].lhs_columns == res.decisions[0].lhs_columns);
  CHECK_THROWS_AS(parse_decision_log(text + "{not json\n"), ParseError);
  for (auto s : {DecisionStatus::Imputed, DecisionStatus::RejectedInconsistent, DecisionStatus::AbstainedNoRule,
                 DecisionStatus::AbstainedMissingLhs, DecisionStatus::AbstainedUnk}) {
    CHECK(decision_status_from_string(to_string(s)) == s);
  }
}

TEST_CASE("a trained model fills the games cell") {
  auto g = oracle::table1_graph();
  auto t = table1();
  auto rs = rules(kNameRule);
  auto v = seq::build_vocab(t, rs);
  seq::ModelParams p;
  p.embed_dim = 16;
  p.feedforward_dim = 32;
  p.learning_rate = 1e-2;
  p.epochs = 100;
  auto ck = seq::train(seq::make_training_pairs(t, rs, v), v, p);
  auto res = impute_graph(g, t, mask_rules(rs, t.columns), ck, 2);
  REQUIRE(res.decisions.size() == 1);
  CHECK(res.decisions[0].status == DecisionStatus::Imputed);
  CHECK(res.graph.node("7").value("Name") == AttributeValue("F20"));
}

}
