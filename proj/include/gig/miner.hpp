#pragma once

#include <optional>
#include <vector>

#include "gig/gdd.hpp"
#include "gig/json_util.hpp"

namespace gig {

struct MinerConfig {
  std::size_t max_lhs_size = 2;
  std::vector<double> edit_thresholds{0, 1, 2};
  std::vector<double> numeric_thresholds{0};
  std::size_t min_support = 2;
  double min_confidence = 1.0;
  // Used by select_rules in the pipeline, not by mine().
  std::size_t top_k_per_rhs = 1;
  unsigned workers = 1;

  // Throws ValidationError.
  void validate() const;
};

MinerConfig miner_config_from_json(const json& j);
json miner_config_to_json(const MinerConfig& config);

// In order: pairwise constraints between same-attribute columns of
// compatible labels (edit for text, abs for numeric, one per threshold), then
// eq(col, "v") for values seen at least min_support times, then eq(col, *)
// for every value column. Id columns never take part.
std::vector<DistanceConstraint> candidate_constraints(const PseudoTable& table, const MinerConfig& config);

struct RuleScore {
  std::size_t support = 0;
  std::size_t holds = 0;
  // nullopt when support is 0.
  std::optional<double> confidence;
};

// Support counts rows where phi_x holds and every referenced cell is present;
// confidence is the fraction of those rows where the rule holds.
RuleScore score(const PseudoTable& table, const ConstraintSet& phi_x, const ConstraintSet& phi_y,
                const PropertyGraph* graph = nullptr);

// Levelwise search over LHS sets of up to max_lhs_size candidates with a
// single candidate on the RHS. Rules whose RHS only touches LHS columns are
// skipped, as are LHS sets holding two single-column constraints on the same
// column. Only minimal rules are kept. Sorted by rule_rank_less and named
// r1, r2, ...
std::vector<Gdd> mine(const PseudoTable& table, const MinerConfig& config);

// Keeps the best k rules (rule_rank_less) per RHS column set.
std::vector<Gdd> select_rules(const std::vector<Gdd>& rules, std::size_t top_k_per_rhs);

}  // namespace gig
