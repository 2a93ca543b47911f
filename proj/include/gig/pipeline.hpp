#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gig/error.hpp"
#include "gig/eval.hpp"
#include "gig/miner.hpp"
#include "gig/seq/train.hpp"

namespace gig {

// Bad or unreadable run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage failed; what() starts with "[stage] ".
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what) : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct CsvSource {
  std::string path;
  std::string table;
  ColumnRoles roles;
};

struct RunConfig {
  std::string name;  // dataset column of the reports
  // Either a graph JSON file or CSV tables ingested in order.
  std::optional<std::string> graph_path;
  std::vector<CsvSource> csv_sources;
  std::string pattern_path;
  std::string rule_source = "mine";  // mine | file
  std::optional<std::string> rules_path;
  MinerConfig miner;
  seq::ModelParams model;
  std::size_t beam_width = 1;
  std::vector<double> missing_pct;
  std::set<std::string> inject_attributes;
  // Missing cells already present in the dataset, with their true values.
  // Replaces injection: one run, reported without a pct.
  std::optional<std::string> truth_path;
  std::uint64_t seed = 7;
  std::string output_dir = "out";
  unsigned workers = 1;
  bool record_timings = false;
};

// Relative paths resolve against `base_dir`. Throws ConfigError.
RunConfig parse_run_config(const json& j, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

seq::ModelParams model_params_from_json(const json& j, std::uint64_t default_seed = 7);
json model_params_to_json(const seq::ModelParams& p);

PropertyGraph load_dataset(const RunConfig& config);

// mine, keep the best rules per RHS column set, consolidate, re-score and
// name them r1, r2, ... in rank order.
std::vector<Gdd> discover_rules(const PseudoTable& table, const MinerConfig& config);

// Recomputes support and confidence of every rule on `table`.
void rescore(std::vector<Gdd>& rules, const PseudoTable& table, const PropertyGraph* graph = nullptr);

// Vocabulary and training pairs from the rows each rule holds on, then
// training. Throws TrainingError.
seq::Checkpoint train_on_rules(const PseudoTable& table, const std::vector<Gdd>& rules, const PropertyGraph& graph,
                               const seq::ModelParams& params, unsigned workers = 1);

struct PipelineResult {
  std::vector<EvalReport> reports;
  std::vector<Gdd> rules;
};

// ingest -> match -> rules -> train once on the complete data, then per pct:
// inject (seeded), rebuild the table, impute, score. Writes under
// output_dir:
//   rules.gdd, rules.gdd.json, model.ckpt, train_log.csv, report.csv,
//   report.json, and per run a directory with decisions.jsonl,
//   imputed.json, truth.json and report.json.
// Throws StageError.
PipelineResult run_pipeline(const RunConfig& config);

}  // namespace gig
