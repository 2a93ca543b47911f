#include <doctest.h>

#include <filesystem>

#include "gig/error.hpp"
#include "gig/eval.hpp"
#include "gig/pipeline.hpp"
#include "oracles.hpp"

using namespace gig;

namespace {

ImputationDecision decision(const std::string& eid, const std::string& attr, DecisionStatus status,
                            std::optional<std::string> predicted = std::nullopt) {
  ImputationDecision d;
  d.site.eid = eid;
  d.site.attribute = attr;
  d.status = status;
  d.predicted = std::move(predicted);
  return d;
}

GroundTruth five() {
  GroundTruth t;
  for (int i = 1; i <= 5; ++i) t.entries.push_back({std::to_string(i), "A", AttributeValue("v" + std::to_string(i))});
  return t;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("precision, recall and F1 from counts") {
  std::vector<ImputationDecision> ds{
      decision("1", "A", DecisionStatus::Imputed, "v1"),
      decision("2", "A", DecisionStatus::Imputed, " v2 "),
      decision("3", "A", DecisionStatus::Imputed, "v3"),
      decision("4", "A", DecisionStatus::Imputed, "wrong"),
      decision("5", "A", DecisionStatus::AbstainedUnk),
  };
  auto r = score(five(), ds);
  CHECK(r.missing == 5);
  CHECK(r.imputed == 4);
  CHECK(r.true_count == 3);
  CHECK(r.precision == doctest::Approx(0.75));
  CHECK(r.recall == doctest::Approx(0.6));
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.precision * static_cast<double>(r.imputed) == doctest::Approx(static_cast<double>(r.true_count)));
  CHECK_FALSE(r.precision_undefined);
  CHECK(r.per_attribute.at("A").true_count == 3);
}

TEST_CASE("rejected predictions count as not imputed") {
  std::vector<ImputationDecision> ds{decision("1", "A", DecisionStatus::RejectedInconsistent, "v1")};
  auto r = score(five(), ds);
  CHECK(r.imputed == 0);
  CHECK(r.true_count == 0);
  CHECK(r.precision == 0.0);
  CHECK(r.precision_undefined);
  CHECK(r.f1 == 0.0);
}

TEST_CASE("perfect run") {
  std::vector<ImputationDecision> ds;
  for (const auto& e : five().entries) ds.push_back(decision(e.eid, "A", DecisionStatus::Imputed, e.value.render()));
  auto r = score(five(), ds);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.f1 == 1.0);
}

TEST_CASE("decisions must refer to known cells, once") {
  std::vector<ImputationDecision> ds{decision("9", "A", DecisionStatus::Imputed, "x")};
  CHECK_THROWS_AS(score(five(), ds), Error);
  CHECK(score(five(), ds, true).imputed == 0);
  std::vector<ImputationDecision> dup{decision("1", "A", DecisionStatus::Imputed, "v1"),
                                      decision("1", "A", DecisionStatus::Imputed, "v1")};
  CHECK_THROWS_AS(score(five(), dup), Error);
}

TEST_CASE("CSV and JSON reports agree and are sorted by pct") {
  std::vector<EvalReport> reports;
  for (double pct : {0.2, 0.05, 0.1, 0.01, 0.15}) {
    EvalReport r;
    r.dataset = "d";
    r.pct = pct;
    r.missing = static_cast<std::size_t>(pct * 100);
    reports.push_back(r);
  }
  auto csv = reports_csv(reports);
  auto lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == 6);
  CHECK(csv.rfind("dataset,pct,missing,imputed,true,precision,recall,f1,runtime_s\n", 0) == 0);
  CHECK(csv.find("d,0.01,") < csv.find("d,0.05,"));
  CHECK(csv.find("d,0.15,") < csv.find("d,0.2,"));
  auto j = reports_json(reports);
  REQUIRE(j.at("reports").size() == 5);
  double prev = 0;
  for (const auto& r : j.at("reports")) {
    CHECK(r.at("pct").get<double>() > prev);
    prev = r.at("pct").get<double>();
    CHECK(csv.find("d," + format_number(prev) + "," + std::to_string(r.at("missing").get<std::size_t>()) + ",") !=
          std::string::npos);
  }
  CHECK_THROWS_AS(report_format_from_string("xml"), Error);
}

}

TEST_SUITE("pipeline") {

TEST_CASE("run config validation") {
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"name":"x"})")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(json::parse(R"({"name":"x","dataset":"g.json","pattern":"p.json","bogus":1})")),
                  ConfigError);
  CHECK_THROWS_AS(
      parse_run_config(json::parse(R"({"name":"x","dataset":"g.json","pattern":"p.json","missing_pct":[0.1,1.5]})")),
      ConfigError);
  CHECK_THROWS_AS(parse_run_config(json::parse(
                      R"({"name":"x","dataset":"g.json","pattern":"p.json","missing_pct":0.1,"truth":"t.json"})")),
                  ConfigError);
  auto c = parse_run_config(
      json::parse(R"({"name":"x","dataset":"g.json","pattern":"p.json","missing_pct":[0.1,0.2],"seed":3})"), "/base");
  CHECK(c.graph_path == "/base/g.json");
  CHECK(c.missing_pct == std::vector<double>{0.1, 0.2});
  CHECK(c.model.seed == 3);
  CHECK(c.beam_width == 1);
  CHECK_THROWS_AS(load_run_config("/nonexistent/run.json"), ConfigError);
}

TEST_CASE("games fixture end to end") {
  auto c = load_run_config(oracle::fixture("table1_run.json"));
  auto out = std::filesystem::temp_directory_path() / "gig_unit_table1";
  std::filesystem::remove_all(out);
  c.output_dir = out.string();
  c.model.epochs = 60;
  auto res = run_pipeline(c);
  REQUIRE(res.reports.size() == 1);
  const auto& r = res.reports[0];
  CHECK_FALSE(r.pct.has_value());
  CHECK(r.missing == 1);
  CHECK(r.true_count == 1);
  CHECK(r.f1 == 1.0);
  for (const char* f : {"rules.gdd", "rules.gdd.json", "model.ckpt", "train_log.csv", "report.csv", "report.json",
                        "given/decisions.jsonl", "given/imputed.json", "given/truth.json", "given/report.json"}) {
    CHECK_MESSAGE(std::filesystem::exists(out / f), f);
  }
  std::filesystem::remove_all(out);
}

TEST_CASE("an empty pct list produces no reports") {
  auto c = load_run_config(oracle::fixture("table1_run.json"));
  c.truth_path.reset();
  c.model.epochs = 1;
  auto out = std::filesystem::temp_directory_path() / "gig_unit_empty";
  c.output_dir = out.string();
  CHECK(run_pipeline(c).reports.empty());
  std::filesystem::remove_all(out);
}

TEST_CASE("stage failures name the stage") {
  auto c = load_run_config(oracle::fixture("table1_run.json"));
  c.pattern_path = "/nonexistent/pattern.json";
  c.output_dir = (std::filesystem::temp_directory_path() / "gig_unit_fail").string();
  try {
    run_pipeline(c);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "match");
  }
  std::filesystem::remove_all(c.output_dir);
}

}
