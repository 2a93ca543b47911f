// Acceptance runner: one PASS/FAIL line per criterion; exits non-zero if any
// fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "gig/imputer.hpp"
#include "gig/pipeline.hpp"
#include "gig/rule_dsl.hpp"
#include "gig/seq/train.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace gig;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

int failures = 0;

void run(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit_s > 0 && s >= limit_s) {
    o.ok = false;
    o.detail += " [over time limit " + format_number(limit_s) + " s]";
  }
  failures += !o.ok;
  std::ostringstream line;
  line.precision(3);
  line << std::fixed << (o.ok ? "PASS" : "FAIL") << " " << id << " " << name << " (" << s << " s)";
  if (!o.detail.empty()) line << ": " << o.detail;
  std::cout << line.str() << std::endl;
}

Gdd rule_from(const std::string& body, const std::vector<Column>& columns) {
  auto rules = parse_rules(body, columns);
  return rules.at(0);
}

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::current_path() / "acceptance_out" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig table1_config(const fs::path& out) {
  RunConfig c = load_run_config(oracle::fixture("table1_run.json"));
  c.output_dir = out.string();
  return c;
}

// --- 3: random games-shaped graphs ----------------------------------------

struct RejectionCase {
  PropertyGraph graph;
  std::string forced;
};

RejectionCase random_rejection_case(std::mt19937_64& rng) {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::size_t pubs = 1 + rng() % 3;
  for (std::size_t p = 0; p < pubs; ++p) {
    nodes.push_back({"p" + std::to_string(p), "publisher", {{"Name", "P" + std::to_string(rng() % 5)}}});
  }
  std::size_t games = 3 + rng() % 6;
  for (std::size_t g = 0; g < games; ++g) {
    std::string eid = "g" + std::to_string(g);
    // Names differ per game so the Name domain has at least two values.
    nodes.push_back({eid,
                     "game",
                     {{"Name", "N" + std::to_string(g) + "x" + std::to_string(rng() % 7)},
                      {"Genre", rng() % 2 ? "Racing" : "Soccer"},
                      {"Year", AttributeValue(static_cast<double>(2015 + rng() % 8))},
                      {"Price", "£" + std::to_string(40 + rng() % 30)}}});
    edges.push_back({"p" + std::to_string(rng() % pubs), "publishes", eid});
  }
  std::size_t blank = 1 + rng() % games;  // nodes[pubs + blank - 1]
  nodes[pubs + blank - 1].attrs["Name"] = AttributeValue::missing();
  // Out-of-domain: a year, a price, or a fresh string.
  std::string forced;
  switch (rng() % 3) {
    case 0: forced = format_number(static_cast<double>(2015 + rng() % 8)); break;
    case 1: forced = "£" + std::to_string(40 + rng() % 30); break;
    default: forced = "unseen" + std::to_string(rng() % 100); break;
  }
  return {PropertyGraph({{"publisher", {"Name"}}, {"game", {"Name", "Genre", "Year", "Price"}}}, nodes, edges),
          forced};
}

}  // namespace

int main() {
  run(1, "mask reproduction on the games layout", 1.0, [] {
    auto cols = table_columns(oracle::table1_graph(), oracle::table1_pattern());
    auto genre = to_mask(rule_from("LHS: eq(x.Name, *); RHS: eq(y.Genre, *);", cols), cols).to_string();
    auto name = to_mask(rule_from("LHS: eq(x.Name, *); RHS: eq(y.Name, *);", cols), cols).to_string();
    bool ok = cols.size() == 11 && genre == "(0,1,0,0,1,0,0,0,0,0,0)" && name == "(0,1,0,1,0,0,0,0,0,0,0)";
    return Outcome{ok, "x.name->y.genre " + genre + ", x.name->y.name " + name};
  });

  run(2, "games walkthrough imputes node 7 Name = F20", 120.0, [] {
    fs::path dir = scratch_dir("walkthrough");
    auto result = run_pipeline(table1_config(dir));
    auto log = parse_decision_log(read_text_file((dir / "given" / "decisions.jsonl").string()));
    const auto& r = result.reports.at(0);
    bool node7 = false;
    for (const auto& d : log) {
      node7 = node7 || (d.site.eid == "7" && d.site.attribute == "Name" && d.status == DecisionStatus::Imputed &&
                        d.predicted == "F20");
    }
    auto g = load_graph((dir / "given" / "imputed.json").string());
    bool written = g.node("7").value("Name") == AttributeValue("F20");
    bool ok = node7 && written && r.precision == 1.0 && r.recall == 1.0 && r.f1 == 1.0;
    return Outcome{ok, "P=" + format_number(r.precision) + " R=" + format_number(r.recall) +
                           " F1=" + format_number(r.f1) + (written ? ", graph updated" : ", graph NOT updated")};
  });

  run(3, "semantic rejection of out-of-domain forced predictions", 0.0, [] {
    const std::string rule_text = "LHS: eq(x.Name, *); RHS: eq(y.Name, *);";
    auto check = [&](const PropertyGraph& g, const std::string& forced, std::string& why) {
      auto table = build_pseudo_table(g, oracle::table1_pattern());
      auto masks = mask_rules({rule_from(rule_text, table.columns)}, table.columns);
      FixedPredictor fixed(seq::build_vocab(table, {masks[0].rule}), forced);
      auto res = impute_graph(g, table, masks, fixed);
      for (const auto& d : res.decisions) {
        if (d.site.attribute == "Name" && d.site.variable == "y" && d.status != DecisionStatus::RejectedInconsistent) {
          why = "site " + d.site.eid + " got " + to_string(d.status) + " for '" + forced + "'";
          return false;
        }
      }
      if (!(res.graph == g)) {
        why = "graph changed for '" + forced + "'";
        return false;
      }
      return true;
    };
    std::string why;
    if (!check(oracle::table1_graph(), "2020", why)) return Outcome{false, why};
    std::mt19937_64 rng(2024);
    std::size_t cases = 0, sites = 0;
    while (cases < 100) {
      auto c = random_rejection_case(rng);
      auto table = build_pseudo_table(c.graph, oracle::table1_pattern());
      auto found = find_missing_sites(table);
      if (found.empty()) continue;  // blanked game not reached by the pattern
      sites += found.size();
      if (!check(c.graph, c.forced, why)) return Outcome{false, why};
      ++cases;
    }
    return Outcome{true, "fixture '2020' rejected; " + std::to_string(cases) + " random fixtures, " +
                             std::to_string(sites) + " sites, all rejected, graphs untouched"};
  });

  run(4, "injection counts match the dataset table", 1.0, [] {
    struct Row {
      const char* name;
      std::size_t attrs, tuples;
      double pct;
      std::size_t expected;
    };
    const Row rows[] = {{"Adult", 11, 500, 0.01, 55},      {"Adult", 11, 500, 0.05, 275},
                        {"Ncvoter", 7, 500, 0.01, 35},     {"Restaurant", 6, 864, 0.01, 52},
                        {"Entity Resolution", 13, 676, 0.01, 88}, {"Graph Data Science", 7, 519, 0.01, 36}};
    std::string detail;
    bool ok = true;
    for (const auto& r : rows) {
      std::vector<std::string> attrs;
      for (std::size_t a = 0; a < r.attrs; ++a) attrs.push_back("a" + std::to_string(a));
      std::vector<Node> nodes;
      for (std::size_t t = 0; t < r.tuples; ++t) {
        Node n{std::to_string(t), "row", {}};
        for (const auto& a : attrs) n.attrs[a] = AttributeValue(static_cast<double>(t % 17));
        nodes.push_back(std::move(n));
      }
      PropertyGraph g({{"row", attrs}}, nodes, {});
      auto [perturbed, truth] = inject_missing(g, r.pct, 1);
      std::size_t got = truth.entries.size();
      ok = ok && got == r.expected && missing_cell_count(r.pct, r.attrs * r.tuples) == r.expected;
      detail += std::string(detail.empty() ? "" : ", ") + r.name + "@" + format_number(r.pct) + "=" +
                std::to_string(got);
    }
    return Outcome{ok, detail};
  });

  run(5, "gradient check, embed_dim 8, one layer", 30.0, [] {
    seq::ModelParams p;
    p.embed_dim = 8;
    p.num_heads = 2;
    p.num_layers = 1;
    p.feedforward_dim = 16;
    p.dropout_rate = 0.0;
    auto g = oracle::table1_graph();
    auto table = build_pseudo_table(g, oracle::table1_pattern());
    auto rule = rule_from("LHS: eq(x.Name, *); RHS: eq(y.Name, *); eq(y.Year, *);", table.columns);
    auto vocab = seq::build_vocab(table, {rule});
    auto pairs = seq::make_training_pairs(table, {rule}, vocab, 0, &g);
    seq::Transformer model(p, vocab.size());
    model.init(11);
    auto r = seq::grad_check(model, pairs.at(0), 1e-4, 200, 5, 0.1);
    bool ok = r.checked >= 200 && r.max_rel_error < 1e-3;
    std::ostringstream d;
    d << "max relative error " << r.max_rel_error << " over " << r.checked << " weights";
    return Outcome{ok, d.str()};
  });

  run(6, "KL loss and softmax analytics", 0.0, [] {
    seq::Mat uniform = seq::Mat::Constant(1, 4, 0.25);
    double ln4 = seq::kl_loss(uniform, {2}, 0.0);
    seq::Mat exact(1, 9);
    exact.row(0) = seq::smoothed_target(9, 4, 0.1);
    double zero = seq::kl_loss(exact, {4}, 0.1);

    seq::ModelParams p;
    p.embed_dim = 16;
    p.num_heads = 2;
    p.num_layers = 1;
    p.feedforward_dim = 32;
    std::mt19937_64 rng(99);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      std::size_t vocab = 6 + rng() % 10;
      seq::Transformer m(p, vocab);
      m.init(rng());
      std::vector<int> enc, dec{seq::kBos};
      for (std::size_t k = 0, n = 1 + rng() % 8; k < n; ++k) enc.push_back(static_cast<int>(1 + rng() % (vocab - 1)));
      for (std::size_t k = 0, n = rng() % 6; k < n; ++k) dec.push_back(static_cast<int>(1 + rng() % (vocab - 1)));
      auto probs = m.forward(enc, dec);
      for (Eigen::Index r = 0; r < probs.rows(); ++r) worst = std::max(worst, std::fabs(probs.row(r).sum() - 1.0));
    }
    bool ok = std::fabs(ln4 - std::log(4.0)) < 1e-9 && std::fabs(zero) < 1e-9 && worst <= 1e-6;
    std::ostringstream d;
    d << "uniform vs one-hot " << ln4 << ", exact match " << zero << ", worst row-sum error " << worst;
    return Outcome{ok, d.str()};
  });

  run(7, "miner agrees with exhaustive enumeration on 50 tables", 60.0, [] {
    std::mt19937_64 rng(7);
    std::size_t rules = 0;
    for (int i = 0; i < 50; ++i) {
      auto table = oracle::random_table(rng);
      MinerConfig c;
      c.max_lhs_size = 1 + rng() % 2;
      c.min_support = 2 + rng() % 2;
      c.min_confidence = rng() % 3 == 0 ? 0.8 : 1.0;
      std::set<std::string> got;
      for (const auto& g : mine(table, c)) {
        got.insert(g.body() + " | " + std::to_string(g.provenance.support) + " | " +
                   format_number(g.provenance.confidence));
      }
      auto want = oracle::exhaustive_rules(table, c);
      if (got != want) {
        return Outcome{false, "table " + std::to_string(i) + ": miner " + std::to_string(got.size()) +
                                  " rules, oracle " + std::to_string(want.size())};
      }
      rules += got.size();
    }
    return Outcome{true, std::to_string(rules) + " rules in total, identical sets"};
  });

  run(8, "planted A->B recovered and imputed over 10 seeds", 300.0, [] {
    std::string detail;
    bool ok = true;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      fs::path dir = scratch_dir("fd_" + std::to_string(seed));
      save_graph(oracle::planted_fd_graph(300, 1000 + seed), (dir / "graph.json").string());
      write_text_file((dir / "pattern.json").string(), R"({"name":"rec","variables":[["t","rec"]],"edges":[]})");
      RunConfig c;
      c.name = "planted";
      c.graph_path = (dir / "graph.json").string();
      c.pattern_path = (dir / "pattern.json").string();
      c.missing_pct = {0.05};
      c.inject_attributes = {"B"};
      c.seed = seed;
      c.model.seed = seed;
      c.output_dir = (dir / "out").string();
      auto res = run_pipeline(c);

      bool recovered = false;
      for (const auto& g : res.rules) recovered = recovered || g.body() == "LHS: eq(t.A, *); RHS: eq(t.B, *);";
      const auto& rep = res.reports.at(0);
      // Abstentions are only excused when no other tuple with the same A kept its B.
      auto perturbed = load_graph((dir / "out" / "pct_0.05" / "imputed.json").string());
      auto log = parse_decision_log(read_text_file((dir / "out" / "pct_0.05" / "decisions.jsonl").string()));
      std::size_t unexcused = 0;
      for (const auto& d : log) {
        if (d.status == DecisionStatus::Imputed) continue;
        const auto& a = perturbed.node(d.site.eid).value("A");
        for (const auto& [eid, n] : perturbed.nodes()) {
          if (eid != d.site.eid && n.value("A") == a && !n.value("B").is_missing()) {
            ++unexcused;
            break;
          }
        }
      }
      bool seed_ok = recovered && rep.missing == 15 && rep.precision == 1.0 && rep.recall >= 0.9 && unexcused == 0;
      ok = ok && seed_ok;
      detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " P=" +
                format_number(rep.precision) + " R=" + format_number(rep.recall) + (recovered ? "" : " rule missing") +
                (unexcused ? " unexcused abstentions " + std::to_string(unexcused) : "");
    }
    return Outcome{ok, detail};
  });

  run(9, "two identical pipeline runs are byte-identical", 0.0, [] {
    auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
    run_pipeline(table1_config(a));
    run_pipeline(table1_config(b));
    std::vector<std::string> files{"rules.gdd",          "rules.gdd.json", "model.ckpt",       "train_log.csv",
                                   "report.csv",         "report.json",    "given/decisions.jsonl",
                                   "given/imputed.json", "given/report.json"};
    for (const auto& f : files) {
      if (read_text_file((a / f).string()) != read_text_file((b / f).string())) return Outcome{false, f + " differs"};
    }
    return Outcome{true, std::to_string(files.size()) + " files compared"};
  });

  run(10, "matcher agrees with brute force on 30 random graphs", 0.0, [] {
    std::mt19937_64 rng(10);
    std::size_t total = 0;
    for (int i = 0; i < 30; ++i) {
      auto g = oracle::random_graph(rng, 30);
      auto p = oracle::random_pattern(rng, 2 + rng() % 2);
      auto want = oracle::brute_force_matches(g, p);
      for (unsigned workers : {1u, 3u}) {
        std::set<std::vector<std::string>> got;
        for (const auto& m : find_matches(g, p, workers)) got.insert(m.binding);
        if (got != want) return Outcome{false, "graph " + std::to_string(i) + " with " + std::to_string(workers) + " workers"};
      }
      total += want.size();
    }
    // Guard against a vacuous pass on sparse draws.
    if (total < 100) return Outcome{false, "only " + std::to_string(total) + " matches in total"};
    return Outcome{true, std::to_string(total) + " matches in total"};
  });

  return failures == 0 ? 0 : 1;
}
