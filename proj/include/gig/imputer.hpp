#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gig/gdd.hpp"
#include "gig/json_util.hpp"
#include "gig/seq/checkpoint.hpp"
#include "gig/seq/encoding.hpp"

namespace gig {

// One missing (eid, attribute) cell. The same node can sit in several rows
// and columns of the table; the first occurrence in row-major order is the
// site proper and the rest are kept as alternatives.
struct MissingSite {
  std::size_t match_id = 0;
  std::size_t column = 0;  // M
  std::string variable;
  std::string attribute;
  std::string eid;
  std::vector<std::pair<std::size_t, std::size_t>> alternatives;  // (row index, column)
  std::size_t row = 0;  // index into table.rows

  friend bool operator==(const MissingSite&, const MissingSite&) = default;
};

// Row-major over value columns, one site per (eid, attribute).
std::vector<MissingSite> find_missing_sites(const PseudoTable& table);

struct MaskedRule {
  Gdd rule;
  PositionalMask mask;
};

// Throws ValidationError if a rule references columns outside the layout.
std::vector<MaskedRule> mask_rules(const std::vector<Gdd>& rules, const std::vector<Column>& columns);

// Rules whose RHS bits cover `column`, best first (rule_rank_less).
std::vector<const MaskedRule*> applicable_rules(const std::vector<MaskedRule>& masks, std::size_t column);

// Encoder tokens for the rule's LHS on this row; nullopt when an LHS cell is
// missing.
std::optional<std::vector<int>> assemble_input(const PseudoTable& table, const TableRow& row, const Gdd& rule,
                                               const seq::Vocabulary& vocab);

// The value to write when `value` is admissible for the site's attribute:
// a member of the observed domain, or, when fewer than two values are
// observed, anything whose kind matches the domain's. UNK never is.
std::optional<AttributeValue> admissible_value(const std::string& value, const MissingSite& site,
                                               const PropertyGraph& graph);
bool validate_semantic(const std::string& value, const MissingSite& site, const PropertyGraph& graph);

enum class DecisionStatus { Imputed, RejectedInconsistent, AbstainedNoRule, AbstainedMissingLhs, AbstainedUnk };
const char* to_string(DecisionStatus s);
DecisionStatus decision_status_from_string(const std::string& s);

struct ImputationDecision {
  MissingSite site;
  std::optional<std::string> rule;         // name of the rule used
  std::vector<std::size_t> lhs_columns;    // I
  std::optional<std::size_t> used_match;   // row that supplied the input
  std::optional<std::string> predicted;
  std::optional<double> score;
  DecisionStatus status = DecisionStatus::AbstainedNoRule;
  bool unk_input = false;
  bool model_called = false;
};

struct PredictorOutput {
  // Joined value tokens of the target slot; nullopt if the slot holds UNK.
  std::optional<std::string> value;
  double score = 0.0;
  bool unk_input = false;
};

// Maps an encoder input to the value of one decoder slot.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual const seq::Vocabulary& vocab() const = 0;
  virtual PredictorOutput predict(const std::vector<int>& enc, const seq::DecodeTemplate& tmpl,
                                  std::size_t slot) const = 0;
};

// Top-1 hypothesis of a template-constrained beam search.
class ModelPredictor : public Predictor {
 public:
  explicit ModelPredictor(const seq::Checkpoint& checkpoint, std::size_t beam_width = 1)
      : checkpoint_(checkpoint), beam_width_(beam_width) {}
  const seq::Vocabulary& vocab() const override { return checkpoint_.vocab; }
  PredictorOutput predict(const std::vector<int>& enc, const seq::DecodeTemplate& tmpl,
                          std::size_t slot) const override;

 private:
  const seq::Checkpoint& checkpoint_;
  std::size_t beam_width_;
};

// Always answers the same value. For exercising validation.
class FixedPredictor : public Predictor {
 public:
  FixedPredictor(seq::Vocabulary vocab, std::string value) : vocab_(std::move(vocab)), value_(std::move(value)) {}
  const seq::Vocabulary& vocab() const override { return vocab_; }
  PredictorOutput predict(const std::vector<int>&, const seq::DecodeTemplate&, std::size_t) const override {
    return {value_, 0.0, false};
  }

 private:
  seq::Vocabulary vocab_;
  std::string value_;
};

struct ImputeResult {
  PropertyGraph graph;
  std::vector<ImputationDecision> decisions;  // site order
  std::size_t model_calls = 0;
};

// For each site: the occurrences are tried in order; the first covering rule
// whose LHS does not fail on the row is used, and its input goes to the
// predictor once. A prediction (accepted or not) ends the site. Throws
// ValidationError when a mask does not fit the table layout.
ImputeResult impute_graph(const PropertyGraph& graph, const PseudoTable& table, const std::vector<MaskedRule>& rules,
                          const Predictor& predictor, unsigned workers = 1);
ImputeResult impute_graph(const PropertyGraph& graph, const PseudoTable& table, const std::vector<MaskedRule>& rules,
                          const seq::Checkpoint& checkpoint, std::size_t beam_width = 1, unsigned workers = 1);

json decision_to_json(const ImputationDecision& d);
ImputationDecision decision_from_json(const json& j);
// One JSON object per line.
std::string decision_log(const std::vector<ImputationDecision>& decisions);
std::vector<ImputationDecision> parse_decision_log(const std::string& text);

}  // namespace gig
