#pragma once

#include <functional>
#include <vector>

#include "gig/seq/checkpoint.hpp"
#include "gig/seq/encoding.hpp"

namespace gig::seq {

struct TrainOptions {
  // Examples of a batch are split across this many workers; gradients are
  // summed in worker order.
  unsigned workers = 1;
  // Called after every epoch with (epoch, kept loss, lr used).
  std::function<void(int, double, double)> on_epoch;
};

// Mini-batch Adam (0.9, 0.98, 1e-9) with teacher forcing and label smoothing.
// After each epoch the full-set loss is measured with dropout off; an epoch
// that does not improve on the best so far is rolled back (weights and
// optimizer state) and the learning rate halved, so the loss history never
// increases. Stops early once the rate falls below 1/1024 of its start.
//
// Throws TrainingError if the loss turns NaN (naming the epoch) or if, with
// epochs > 0, the final loss is not below the initial one.
Checkpoint train(const std::vector<TrainingPair>& pairs, const Vocabulary& vocab, const ModelParams& params,
                 const TrainOptions& options = {});

// Mean loss per scored position over `pairs`, dropout off.
double mean_loss(const Transformer& model, const std::vector<TrainingPair>& pairs, unsigned workers = 1);

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  double sum_abs_error = 0.0;
  std::size_t checked = 0;
};

// Analytic gradients of the mean loss on one pair against central
// differences with the given step, on `samples` weights drawn with `seed`
// (all weights if there are fewer). Relative error is
// |a - n| / max(|a|, |n|, 1e-7). Dropout is off.
GradCheckResult grad_check(Transformer& model, const TrainingPair& pair, double step, std::size_t samples = 200,
                           std::uint64_t seed = 1, double label_smoothing = 0.0);

}  // namespace gig::seq
