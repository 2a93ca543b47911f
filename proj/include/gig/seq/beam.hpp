#pragma once

#include <vector>

#include "gig/seq/encoding.hpp"
#include "gig/seq/transformer.hpp"

namespace gig::seq {

struct Hypothesis {
  std::vector<int> tokens;  // after BOS, through EOS
  double log_prob = 0.0;
  double score = 0.0;  // log_prob / tokens.size()
};

struct Prediction {
  std::vector<Hypothesis> hypotheses;  // best first, at most k
  // The encoder input carries UNK where values belong and no known value.
  bool unk_input = false;
};

// Beam search of width k. With a template, structural tokens are forced and
// each value slot takes one or more value (or UNK) tokens; otherwise any
// token but PAD and BOS may follow. Hypotheses that reach the length limit
// without EOS are kept as they are.
Prediction predict_topk(const Transformer& model, const Vocabulary& vocab, const std::vector<int>& enc, std::size_t k,
                        const DecodeTemplate* tmpl = nullptr);

}  // namespace gig::seq
