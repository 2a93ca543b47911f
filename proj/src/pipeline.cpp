#include "gig/pipeline.hpp"

#include <chrono>
#include <filesystem>

#include "gig/rule_dsl.hpp"

namespace gig {

namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string& base, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(base) / p).lexically_normal().string();
}

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

class Clock {
 public:
  double lap() {
    auto now = std::chrono::steady_clock::now();
    double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::string run_dir_name(const std::optional<double>& pct) {
  return pct ? "pct_" + format_number(*pct) : "given";
}

}  // namespace

seq::ModelParams model_params_from_json(const json& j, std::uint64_t default_seed) {
  seq::ModelParams p;
  p.seed = default_seed;
  if (!j.is_object()) throw ConfigError("model settings must be an object");
  for (const auto& [key, v] : j.items()) {
    if (key == "embed_dim") p.embed_dim = v.get<int>();
    else if (key == "num_heads") p.num_heads = v.get<int>();
    else if (key == "num_layers") p.num_layers = v.get<int>();
    else if (key == "feedforward_dim") p.feedforward_dim = v.get<int>();
    else if (key == "max_seq_len") p.max_seq_len = v.get<int>();
    else if (key == "dropout") p.dropout_rate = v.get<double>();
    else if (key == "label_smoothing") p.label_smoothing = v.get<double>();
    else if (key == "learning_rate") p.learning_rate = v.get<double>();
    else if (key == "batch_size") p.batch_size = v.get<int>();
    else if (key == "epochs") p.epochs = v.get<int>();
    else if (key == "seed") p.seed = v.get<std::uint64_t>();
    else throw ConfigError("unknown model setting '" + key + "'");
  }
  try {
    p.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return p;
}

json model_params_to_json(const seq::ModelParams& p) {
  return {{"embed_dim", p.embed_dim},         {"num_heads", p.num_heads},
          {"num_layers", p.num_layers},       {"feedforward_dim", p.feedforward_dim},
          {"max_seq_len", p.max_seq_len},     {"dropout", p.dropout_rate},
          {"label_smoothing", p.label_smoothing}, {"learning_rate", p.learning_rate},
          {"batch_size", p.batch_size},       {"epochs", p.epochs},
          {"seed", p.seed}};
}

RunConfig parse_run_config(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c;
  try {
    c.seed = j.value("seed", std::uint64_t{7});
    bool saw_dataset = false, saw_pattern = false;
    json model = json::object();
    for (const auto& [key, v] : j.items()) {
      if (key == "name") {
        c.name = v.get<std::string>();
      } else if (key == "dataset") {
        saw_dataset = true;
        if (v.is_string()) {
          c.graph_path = resolve(base_dir, v.get<std::string>());
        } else if (v.is_object() && v.contains("graph")) {
          c.graph_path = resolve(base_dir, v.at("graph").get<std::string>());
        } else if (v.is_object() && v.contains("csv")) {
          for (const auto& t : v.at("csv")) {
            CsvSource s;
            s.path = resolve(base_dir, t.at("path").get<std::string>());
            s.table = t.at("table").get<std::string>();
            if (t.contains("id")) s.roles.id_column = t.at("id").get<std::string>();
            if (t.contains("refs")) s.roles.references = t.at("refs").get<std::map<std::string, std::string>>();
            c.csv_sources.push_back(std::move(s));
          }
        } else {
          throw ConfigError("dataset must be a graph path, {\"graph\": path} or {\"csv\": [...]}");
        }
      } else if (key == "pattern") {
        saw_pattern = true;
        c.pattern_path = resolve(base_dir, v.get<std::string>());
      } else if (key == "rules") {
        c.rule_source = v.value("source", std::string("mine"));
        if (v.contains("path")) c.rules_path = resolve(base_dir, v.at("path").get<std::string>());
      } else if (key == "miner") {
        c.miner = miner_config_from_json(v);
      } else if (key == "model") {
        model = v;
      } else if (key == "beam_width") {
        c.beam_width = v.get<std::size_t>();
      } else if (key == "missing_pct") {
        c.missing_pct = v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()};
      } else if (key == "inject_attributes") {
        c.inject_attributes = v.get<std::set<std::string>>();
      } else if (key == "truth") {
        c.truth_path = resolve(base_dir, v.get<std::string>());
      } else if (key == "seed") {
        // read above
      } else if (key == "output_dir") {
        c.output_dir = resolve(base_dir, v.get<std::string>());
      } else if (key == "workers") {
        c.workers = v.get<unsigned>();
      } else if (key == "record_timings") {
        c.record_timings = v.get<bool>();
      } else {
        throw ConfigError("unknown run setting '" + key + "'");
      }
    }
    if (!j.contains("output_dir")) c.output_dir = resolve(base_dir, c.output_dir);
    c.model = model_params_from_json(model, c.seed);
    if (!saw_dataset) throw ConfigError("run config needs a dataset");
    if (!saw_pattern) throw ConfigError("run config needs a pattern");
    if (c.rule_source != "mine" && c.rule_source != "file") {
      throw ConfigError("rules.source must be mine or file, not '" + c.rule_source + "'");
    }
    if (c.rule_source == "file" && !c.rules_path) throw ConfigError("rules.source file needs rules.path");
    if (c.beam_width < 1) throw ConfigError("beam_width must be at least 1");
    for (double p : c.missing_pct) {
      if (!(p > 0.0 && p <= 1.0)) throw ConfigError("missing_pct values must lie in (0, 1]");
    }
    if (c.truth_path && !c.missing_pct.empty()) throw ConfigError("truth and missing_pct are exclusive");
    if (c.name.empty()) {
      std::string src = c.graph_path ? *c.graph_path : c.csv_sources.empty() ? "dataset" : c.csv_sources.front().path;
      c.name = fs::path(src).stem().string();
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  json j;
  try {
    j = parse_json_document(read_text_file(path));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(j, fs::path(path).parent_path().string());
}

PropertyGraph load_dataset(const RunConfig& config) {
  if (config.graph_path) return load_graph(*config.graph_path);
  PropertyGraph g;
  for (const auto& s : config.csv_sources) g = ingest_csv(csv::read_file(s.path), s.table, s.roles, &g);
  return g;
}

void rescore(std::vector<Gdd>& rules, const PseudoTable& table, const PropertyGraph* graph) {
  for (auto& r : rules) {
    auto s = score(table, r.lhs, r.rhs, graph);
    r.provenance.support = s.support;
    r.provenance.confidence = s.confidence.value_or(0.0);
  }
}

std::vector<Gdd> discover_rules(const PseudoTable& table, const MinerConfig& config) {
  auto rules = consolidate(select_rules(mine(table, config), config.top_k_per_rhs));
  rescore(rules, table);
  for (auto& r : rules) r.provenance.mined = true;
  std::stable_sort(rules.begin(), rules.end(), rule_rank_less);
  for (std::size_t i = 0; i < rules.size(); ++i) rules[i].name = "r" + std::to_string(i + 1);
  return rules;
}

seq::Checkpoint train_on_rules(const PseudoTable& table, const std::vector<Gdd>& rules, const PropertyGraph& graph,
                               const seq::ModelParams& params, unsigned workers) {
  auto vocab = seq::build_vocab(table, rules);
  auto pairs = seq::make_training_pairs(table, rules, vocab, static_cast<std::size_t>(params.max_seq_len), &graph);
  seq::TrainOptions options;
  options.workers = workers;
  return seq::train(pairs, vocab, params, options);
}

PipelineResult run_pipeline(const RunConfig& config) {
  PipelineResult result;
  const fs::path out(config.output_dir);
  Clock clock;
  std::map<std::string, double> shared_seconds;

  PropertyGraph graph = stage("ingest", [&] { return load_dataset(config); });
  shared_seconds["ingest"] = clock.lap();
  GraphPattern pattern = stage("match", [&] { return load_pattern(config.pattern_path); });
  PseudoTable table = stage("match", [&] { return build_pseudo_table(graph, pattern, config.workers); });
  shared_seconds["match"] = clock.lap();

  result.rules = stage("mine", [&] {
    std::vector<Gdd> rules;
    if (config.rule_source == "file") {
      rules = load_rules(*config.rules_path);
      for (const auto& r : rules) validate_against(r, table.columns);
      rescore(rules, table, &graph);
    } else {
      MinerConfig mc = config.miner;
      mc.workers = config.workers;
      rules = discover_rules(table, mc);
    }
    save_rules(rules, (out / "rules.gdd").string());
    json extra{{"pattern", pattern.name}, {"miner", miner_config_to_json(config.miner)}};
    write_text_file((out / "rules.gdd.json").string(), rules_metadata(rules, extra).dump(2) + "\n");
    return rules;
  });
  shared_seconds["mine"] = clock.lap();

  std::optional<seq::Checkpoint> checkpoint;
  if (!result.rules.empty()) {
    checkpoint.emplace(stage("train", [&] {
      auto ck = train_on_rules(table, result.rules, graph, config.model, config.workers);
      seq::save_checkpoint(ck, (out / "model.ckpt").string());
      write_text_file((out / "train_log.csv").string(), seq::training_log_csv(ck));
      return ck;
    }));
  }
  shared_seconds["train"] = clock.lap();
  double shared_total = 0.0;
  for (const auto& [k, v] : shared_seconds) shared_total += v;

  std::vector<std::optional<double>> runs;
  if (config.truth_path) {
    runs.push_back(std::nullopt);
  } else {
    for (double p : config.missing_pct) runs.push_back(p);
  }

  for (const auto& pct : runs) {
    Clock run_clock;
    std::map<std::string, double> seconds;
    const fs::path dir = out / run_dir_name(pct);
    auto [perturbed, truth] = stage("inject", [&] {
      if (pct) return inject_missing(graph, *pct, config.seed, config.inject_attributes);
      return std::make_pair(graph, load_ground_truth(*config.truth_path));
    });
    seconds["inject"] = run_clock.lap();

    ImputeResult imputed = stage("impute", [&] {
      PseudoTable t = build_pseudo_table(perturbed, pattern, config.workers);
      auto masks = mask_rules(result.rules, t.columns);
      if (checkpoint) return impute_graph(perturbed, t, masks, *checkpoint, config.beam_width, config.workers);
      FixedPredictor none(seq::Vocabulary{}, "");
      return impute_graph(perturbed, t, masks, none, config.workers);
    });
    seconds["impute"] = run_clock.lap();

    EvalReport report = stage("eval", [&] {
      EvalReport r = score(truth, imputed.decisions, true);
      r.dataset = config.name;
      r.pct = pct;
      save_ground_truth(truth, (dir / "truth.json").string());
      save_graph(imputed.graph, (dir / "imputed.json").string());
      write_text_file((dir / "decisions.jsonl").string(), decision_log(imputed.decisions));
      return r;
    });
    seconds["eval"] = run_clock.lap();

    if (config.record_timings) {
      report.stage_seconds = shared_seconds;
      double total = shared_total;
      for (const auto& [k, v] : seconds) {
        report.stage_seconds[k] = v;
        total += v;
      }
      report.runtime_s = total;
    }
    stage("eval", [&] { write_text_file((dir / "report.json").string(), report_to_json(report).dump(2) + "\n"); });
    result.reports.push_back(std::move(report));
  }

  stage("eval", [&] {
    emit_report(result.reports, ReportFormat::Csv, (out / "report.csv").string());
    emit_report(result.reports, ReportFormat::Json, (out / "report.json").string());
  });
  return result;
}

}  // namespace gig
