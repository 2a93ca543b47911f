#include "gig/seq/beam.hpp"

#include <algorithm>
#include <cmath>

#include "gig/error.hpp"

namespace gig::seq {

namespace {

struct Beam {
  std::vector<int> tokens{kBos};
  double log_prob = 0.0;
  std::size_t item = 0;   // template position
  std::size_t filled = 0; // value tokens in the current slot
};

struct Step {
  int token;
  std::size_t item;
  std::size_t filled;
};

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace

Prediction predict_topk(const Transformer& model, const Vocabulary& vocab, const std::vector<int>& enc, std::size_t k,
                        const DecodeTemplate* tmpl) {
  if (k < 1) throw ValidationError("beam width must be at least 1");
  Prediction out;
  bool has_value = false;
  bool has_unk = false;
  for (int t : enc) {
    has_unk = has_unk || t == kUnk;
    has_value = has_value || (t >= 0 && static_cast<std::size_t>(t) < vocab.size() && vocab.kind(t) == TokenKind::Value);
  }
  out.unk_input = has_unk && !has_value;

  std::vector<int> value_ids{kUnk};
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (vocab.kinds()[i] == TokenKind::Value) value_ids.push_back(static_cast<int>(i));
  }

  auto options = [&](const Beam& b) {
    std::vector<Step> steps;
    if (!tmpl) {
      for (std::size_t t = 0; t < model.vocab_size(); ++t) {
        if (t != static_cast<std::size_t>(kPad) && t != static_cast<std::size_t>(kBos)) steps.push_back({static_cast<int>(t), 0, 0});
      }
      return steps;
    }
    int item = tmpl->items[b.item];
    if (item >= 0) return std::vector<Step>{{item, b.item + 1, 0}};
    for (int v : value_ids) steps.push_back({v, b.item, b.filled + 1});
    if (b.filled > 0) steps.push_back({tmpl->items[b.item + 1], b.item + 2, 0});
    return steps;
  };

  const Mat memory = model.encode(enc);
  const auto max_len = static_cast<std::size_t>(model.params().max_seq_len);
  std::vector<Beam> live{Beam{}};
  std::vector<Hypothesis> finished;
  auto finish = [&](const Beam& b) {
    Hypothesis h;
    h.tokens.assign(b.tokens.begin() + 1, b.tokens.end());
    h.log_prob = b.log_prob;
    h.score = h.tokens.empty() ? b.log_prob : b.log_prob / static_cast<double>(h.tokens.size());
    finished.push_back(std::move(h));
  };

  while (!live.empty()) {
    std::vector<Beam> grown;
    for (const Beam& b : live) {
      Mat probs = model.decode(memory, enc, b.tokens);
      auto last = probs.row(probs.rows() - 1);
      for (const Step& s : options(b)) {
        Beam n = b;
        n.tokens.push_back(s.token);
        n.log_prob += std::log(std::max(last(s.token), 1e-300));
        n.item = s.item;
        n.filled = s.filled;
        grown.push_back(std::move(n));
      }
    }
    std::stable_sort(grown.begin(), grown.end(), [](const Beam& a, const Beam& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      return a.tokens < b.tokens;
    });
    if (grown.size() > k) grown.resize(k);
    live.clear();
    for (auto& b : grown) {
      // The decoder input is tokens; it may not outgrow max_seq_len.
      if (b.tokens.back() == kEos || b.tokens.size() > max_len) {
        finish(b);
      } else {
        live.push_back(std::move(b));
      }
    }
  }
  std::sort(finished.begin(), finished.end(), better);
  if (finished.size() > k) finished.resize(k);
  out.hypotheses = std::move(finished);
  return out;
}

}  // namespace gig::seq
