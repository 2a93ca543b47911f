#pragma once

// Reference implementations and generators shared by the unit tests and the
// acceptance runner. The oracles are deliberately naive.

#include <random>
#include <set>
#include <string>
#include <vector>

#include "gig/gdd.hpp"
#include "gig/graph.hpp"
#include "gig/miner.hpp"
#include "gig/pattern.hpp"

namespace oracle {

std::string fixture(const std::string& name);

gig::PropertyGraph table1_graph();
gig::GraphPattern table1_pattern();

// Every assignment of nodes to variables, filtered by labels, edges,
// distinctness and ordering.
std::set<std::vector<std::string>> brute_force_matches(const gig::PropertyGraph& g, const gig::GraphPattern& p);

// Plain recursion over byte strings (callers keep them short).
std::size_t recursive_levenshtein(const std::string& a, const std::string& b);

// All rules with 1..max_lhs_size LHS candidates and one RHS candidate that
// pass support/confidence, minus the non-minimal ones. Scores go through
// gig::score; nothing is pruned early.
std::set<std::string> exhaustive_rules(const gig::PseudoTable& table, const gig::MinerConfig& config);

gig::PropertyGraph random_graph(std::mt19937_64& rng, std::size_t max_nodes);
gig::GraphPattern random_pattern(std::mt19937_64& rng, std::size_t variables);

// Small random table: two same-label variables sharing text attributes, one
// numeric column, a planted dependency on some draws, and ~10% missing cells.
gig::PseudoTable random_table(std::mt19937_64& rng);

// Label "rec" with value attributes A (10 values), B = f(A) with f not
// injective, and noise C; one node per tuple.
gig::PropertyGraph planted_fd_graph(std::size_t tuples, std::uint64_t seed);

}  // namespace oracle
