#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "gig/imputer.hpp"
#include "gig/pipeline.hpp"
#include "gig/rule_dsl.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

std::set<std::string> split_list(const std::string& s) {
  std::set<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.insert(item);
  }
  return out;
}

gig::PseudoTable table_for(const std::string& table_path, const std::string& pattern_path,
                           const gig::PropertyGraph& graph, unsigned workers) {
  if (!table_path.empty()) return gig::load_table_csv(table_path);
  if (pattern_path.empty()) throw gig::ConfigError("need --table or --pattern");
  return gig::build_pseudo_table(graph, gig::load_pattern(pattern_path), workers);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph data imputation with mined differential dependencies"};
  app.require_subcommand(1);
  unsigned workers = 1;
  app.add_option("--workers", workers, "Worker threads")->check(CLI::Range(1u, 256u));

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Turn a CSV table into graph nodes and edges");
  std::string csv_path, table_name, id_column, base_graph, out_path;
  std::vector<std::string> refs;
  ingest->add_option("--csv", csv_path)->required();
  ingest->add_option("--table", table_name, "Label of the new nodes")->required();
  ingest->add_option("--id", id_column, "Column holding entity ids");
  ingest->add_option("--ref", refs, "col=label: column referencing nodes of that label");
  ingest->add_option("--base", base_graph, "Graph to extend");
  ingest->add_option("--out", out_path)->required();

  // match
  auto* match = app.add_subcommand("match", "Build the pseudo-table of a pattern");
  std::string graph_path, pattern_path;
  match->add_option("--graph", graph_path)->required();
  match->add_option("--pattern", pattern_path)->required();
  match->add_option("--out", out_path)->required();

  // mine
  auto* mine = app.add_subcommand("mine", "Mine dependencies from a pseudo-table");
  std::string table_path;
  gig::MinerConfig miner;
  mine->add_option("--table", table_path)->required();
  mine->add_option("--min-support", miner.min_support);
  mine->add_option("--min-confidence", miner.min_confidence);
  mine->add_option("--max-lhs", miner.max_lhs_size);
  mine->add_option("--top-k", miner.top_k_per_rhs, "Rules kept per RHS column set");
  mine->add_option("--edit-thresholds", miner.edit_thresholds)->delimiter(',');
  mine->add_option("--numeric-thresholds", miner.numeric_thresholds)->delimiter(',');
  mine->add_option("--out", out_path)->required();

  // train
  auto* train = app.add_subcommand("train", "Train the sequence model on rule-satisfying rows");
  std::string rules_path, log_path;
  gig::seq::ModelParams params;
  train->add_option("--table", table_path)->required();
  train->add_option("--rules", rules_path)->required();
  train->add_option("--graph", graph_path)->required();
  train->add_option("--seed", params.seed);
  train->add_option("--epochs", params.epochs);
  train->add_option("--embed-dim", params.embed_dim);
  train->add_option("--heads", params.num_heads);
  train->add_option("--layers", params.num_layers);
  train->add_option("--ff-dim", params.feedforward_dim);
  train->add_option("--max-len", params.max_seq_len);
  train->add_option("--dropout", params.dropout_rate);
  train->add_option("--label-smoothing", params.label_smoothing);
  train->add_option("--lr", params.learning_rate);
  train->add_option("--batch", params.batch_size);
  train->add_option("--log", log_path, "Write epoch,loss,lr lines here");
  train->add_option("--out", out_path)->required();

  // impute
  auto* impute = app.add_subcommand("impute", "Fill missing cells of a graph");
  std::string model_path;
  std::size_t beam = 1;
  impute->add_option("--graph", graph_path)->required();
  impute->add_option("--table", table_path, "Pseudo-table of --graph");
  impute->add_option("--pattern", pattern_path, "Build the table from this pattern instead");
  impute->add_option("--rules", rules_path)->required();
  impute->add_option("--model", model_path)->required();
  impute->add_option("--beam", beam)->check(CLI::PositiveNumber);
  impute->add_option("--out", out_path)->required();
  impute->add_option("--log", log_path, "Decision log (JSON lines)")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Score a decision log against ground truth");
  std::string truth_path, format = "csv", dataset = "dataset";
  bool skip_unknown = false;
  eval->add_option("--truth", truth_path)->required();
  eval->add_option("--log", log_path)->required();
  eval->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));
  eval->add_option("--dataset", dataset, "Dataset column of the report");
  eval->add_flag("--skip-unknown", skip_unknown, "Ignore decisions for cells without ground truth");
  eval->add_option("--out", out_path)->required();

  // inject
  auto* inject = app.add_subcommand("inject", "Blank a share of attribute cells, keeping their values");
  double pct = 0.01;
  std::uint64_t seed = 7;
  std::string attributes;
  inject->add_option("--graph", graph_path)->required();
  inject->add_option("--pct", pct)->check(CLI::Range(0.0, 1.0));
  inject->add_option("--seed", seed);
  inject->add_option("--attributes", attributes, "Comma-separated attribute names");
  inject->add_option("--out", out_path)->required();
  inject->add_option("--truth", truth_path)->required();

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage from a JSON run config");
  std::string config_path, out_dir;
  pipeline->add_option("--config", config_path)->required();
  pipeline->add_option("--out", out_dir, "Overrides output_dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (ingest->parsed()) {
      gig::ColumnRoles roles;
      if (!id_column.empty()) roles.id_column = id_column;
      for (const auto& r : refs) {
        auto eq = r.find('=');
        if (eq == std::string::npos) throw gig::ConfigError("--ref expects col=label, got '" + r + "'");
        roles.references[r.substr(0, eq)] = r.substr(eq + 1);
      }
      std::optional<gig::PropertyGraph> base;
      if (!base_graph.empty()) base = gig::load_graph(base_graph);
      auto g = gig::ingest_csv(gig::csv::read_file(csv_path), table_name, roles, base ? &*base : nullptr);
      gig::save_graph(g, out_path);
      std::cout << g.nodes().size() << " nodes, " << g.edges().size() << " edges\n";
    } else if (match->parsed()) {
      auto table = gig::build_pseudo_table(gig::load_graph(graph_path), gig::load_pattern(pattern_path), workers);
      gig::save_table_csv(table, out_path);
      std::cout << table.rows.size() << " matches, " << table.columns.size() << " columns\n";
    } else if (mine->parsed()) {
      miner.workers = workers;
      miner.validate();
      auto rules = gig::discover_rules(gig::load_table_csv(table_path), miner);
      gig::save_rules(rules, out_path);
      gig::write_text_file(out_path + ".json",
                           gig::rules_metadata(rules, {{"miner", gig::miner_config_to_json(miner)}}).dump(2) + "\n");
      std::cout << rules.size() << " rules\n";
    } else if (train->parsed()) {
      params.validate();
      auto graph = gig::load_graph(graph_path);
      auto table = gig::load_table_csv(table_path);
      auto rules = gig::parse_rules(gig::read_text_file(rules_path), table.columns);
      auto ck = gig::train_on_rules(table, rules, graph, params, workers);
      gig::seq::save_checkpoint(ck, out_path);
      if (!log_path.empty()) gig::write_text_file(log_path, gig::seq::training_log_csv(ck));
      std::cout << "loss " << ck.initial_loss << " -> " << ck.final_loss << " over " << ck.loss_history.size()
                << " epochs\n";
    } else if (impute->parsed()) {
      auto graph = gig::load_graph(graph_path);
      auto table = table_for(table_path, pattern_path, graph, workers);
      auto rules = gig::parse_rules(gig::read_text_file(rules_path), table.columns);
      auto ck = gig::seq::load_checkpoint(model_path);
      auto result = gig::impute_graph(graph, table, gig::mask_rules(rules, table.columns), ck, beam, workers);
      gig::save_graph(result.graph, out_path);
      gig::write_text_file(log_path, gig::decision_log(result.decisions));
      std::size_t filled = 0;
      for (const auto& d : result.decisions) filled += d.status == gig::DecisionStatus::Imputed;
      std::cout << filled << " of " << result.decisions.size() << " missing cells imputed\n";
    } else if (eval->parsed()) {
      auto truth = gig::load_ground_truth(truth_path);
      auto decisions = gig::parse_decision_log(gig::read_text_file(log_path));
      auto report = gig::score(truth, decisions, skip_unknown);
      report.dataset = dataset;
      gig::emit_report({report}, gig::report_format_from_string(format), out_path);
      std::cout << "precision " << report.precision << " recall " << report.recall << " f1 " << report.f1 << "\n";
      if (report.precision_undefined) std::cerr << "warning: nothing imputed, precision reported as 0\n";
    } else if (inject->parsed()) {
      auto [g, truth] = gig::inject_missing(gig::load_graph(graph_path), pct, seed, split_list(attributes));
      gig::save_graph(g, out_path);
      gig::save_ground_truth(truth, truth_path);
      std::cout << truth.entries.size() << " cells blanked\n";
    } else if (pipeline->parsed()) {
      auto config = gig::load_run_config(config_path);
      if (!out_dir.empty()) config.output_dir = out_dir;
      if (workers > 1) config.workers = workers;
      auto result = gig::run_pipeline(config);
      std::cout << gig::reports_csv(result.reports);
    }
  } catch (const gig::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const gig::StageError& e) {
    std::cerr << "stage failed: " << e.what() << "\n";
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return 0;
}
