#pragma once

#include <string>
#include <vector>

#include "gig/gdd.hpp"
#include "gig/json_util.hpp"

namespace gig {

// Rule files hold blocks of the form
//
//   rule r1 on table1 {
//     LHS: eq(x.Name, *);
//     RHS: eq(y.Name, *);
//   }
//
// "on <pattern>" is optional. A bare "LHS: ...; RHS: ...;" block is accepted
// too; it is named r<k> after its position and has no scope. Constraints:
//
//   edit(a, b) <= k     abs(a, b) <= t     eq(a, b)
//   eq(v.eid, "C5")     eq(v.eid, w.eid)
//   rel(v, "name", "C") rel(v, "name", w)
//
// Operands are var.attr (backticks quote odd attribute names), quoted text,
// numbers or '*'. '#' starts a comment.
std::vector<Gdd> parse_rules(const std::string& text);
// Also checks every operand against a table layout.
std::vector<Gdd> parse_rules(const std::string& text, const std::vector<Column>& columns);

std::string render_rule(const Gdd& rule);
std::string render_rules(const std::vector<Gdd>& rules);

std::vector<Gdd> load_rules(const std::string& path);
void save_rules(const std::vector<Gdd>& rules, const std::string& path);

// Sidecar "<rules>.json": per-rule support/confidence plus free-form metadata.
json rules_metadata(const std::vector<Gdd>& rules, const json& extra = json::object());
// Copies provenance from a sidecar onto rules by name; unknown names are ignored.
void apply_rules_metadata(std::vector<Gdd>& rules, const json& metadata);

}  // namespace gig
