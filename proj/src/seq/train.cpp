#include "gig/seq/train.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "gig/error.hpp"
#include "gig/parallel.hpp"

namespace gig::seq {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.98;
constexpr double kAdamEps = 1e-9;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::size_t scored_positions(const TrainingPair& p) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < p.dec.size(); ++i) n += p.dec[i] != kPad;
  return n;
}

struct AdamState {
  Tensors m, v;
  std::uint64_t step = 0;
};

void adam_update(Tensors& w, const Tensors& g, AdamState& s, double lr) {
  ++s.step;
  double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(s.step));
  double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < w.size(); ++i) {
    s.m[i] = kBeta1 * s.m[i] + (1.0 - kBeta1) * g[i];
    s.v[i] = kBeta2 * s.v[i] + (1.0 - kBeta2) * g[i].cwiseProduct(g[i]);
    w[i].array() -= lr * (s.m[i].array() / c1) / ((s.v[i].array() / c2).sqrt() + kAdamEps);
  }
}

}  // namespace

double mean_loss(const Transformer& model, const std::vector<TrainingPair>& pairs, unsigned workers) {
  std::vector<double> loss(pairs.size());
  std::vector<std::size_t> count(pairs.size());
  double eps = model.params().label_smoothing;
  parallel_for(pairs.size(), workers, [&](std::size_t i) { loss[i] = model.loss_sum(pairs[i].enc, pairs[i].dec, eps, &count[i]); });
  double total = std::accumulate(loss.begin(), loss.end(), 0.0);
  std::size_t n = std::accumulate(count.begin(), count.end(), std::size_t{0});
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

Checkpoint train(const std::vector<TrainingPair>& pairs, const Vocabulary& vocab, const ModelParams& params,
                 const TrainOptions& options) {
  params.validate();
  if (pairs.empty()) throw TrainingError("no training pairs");
  Checkpoint ck(params, vocab);
  Transformer& model = ck.model;
  model.init(params.seed);
  const unsigned workers = std::max(1u, options.workers);

  ck.initial_loss = mean_loss(model, pairs, workers);
  ck.final_loss = ck.initial_loss;
  double best = ck.initial_loss;
  double lr = params.learning_rate;

  AdamState adam{model.zeros_like(), model.zeros_like(), 0};
  Tensors kept_weights = model.weights();
  AdamState kept_adam = adam;

  std::vector<std::size_t> order(pairs.size());
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(splitmix(params.seed ^ splitmix(static_cast<std::uint64_t>(epoch) + 1)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng() % i]);

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(params.batch_size)) {
      std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(params.batch_size));
      std::size_t positions = 0;
      for (std::size_t i = start; i < end; ++i) positions += scored_positions(pairs[order[i]]);
      if (positions == 0) continue;
      const double scale = 1.0 / static_cast<double>(positions);

      std::size_t chunks = std::min<std::size_t>(workers, end - start);
      std::vector<Tensors> grads(chunks);
      std::vector<double> losses(chunks, 0.0);
      parallel_for(chunks, workers, [&](std::size_t c) {
        grads[c] = model.zeros_like();
        std::size_t lo = start + (end - start) * c / chunks;
        std::size_t hi = start + (end - start) * (c + 1) / chunks;
        for (std::size_t i = lo; i < hi; ++i) {
          const auto& pair = pairs[order[i]];
          std::mt19937_64 dropout_rng(splitmix(params.seed ^ splitmix((static_cast<std::uint64_t>(epoch) << 32) ^ i)));
          losses[c] += model.accumulate(pair.enc, pair.dec, params.label_smoothing, &dropout_rng, scale, grads[c]);
        }
      });
      double batch_loss = 0.0;
      for (std::size_t c = 0; c < chunks; ++c) {
        batch_loss += losses[c];
        if (c > 0) {
          for (std::size_t t = 0; t < grads[0].size(); ++t) grads[0][t] += grads[c][t];
        }
      }
      if (!std::isfinite(batch_loss)) throw TrainingError("training diverged (loss is NaN) at epoch " + std::to_string(epoch + 1));
      adam_update(model.weights(), grads[0], adam, lr);
    }

    double loss = mean_loss(model, pairs, workers);
    if (!std::isfinite(loss)) throw TrainingError("training diverged (loss is NaN) at epoch " + std::to_string(epoch + 1));
    ck.lr_history.push_back(lr);
    if (loss < best) {
      best = loss;
      kept_weights = model.weights();
      kept_adam = adam;
    } else {
      model.weights() = kept_weights;
      adam = kept_adam;
      lr *= 0.5;
    }
    ck.loss_history.push_back(best);
    if (options.on_epoch) options.on_epoch(epoch + 1, best, ck.lr_history.back());
    if (lr < params.learning_rate / 1024.0) break;
  }
  ck.final_loss = best;
  if (params.epochs > 0 && !(best < ck.initial_loss)) {
    throw TrainingError("training did not reduce the loss (initial " + std::to_string(ck.initial_loss) + ", final " +
                        std::to_string(best) + ")");
  }
  return ck;
}

GradCheckResult grad_check(Transformer& model, const TrainingPair& pair, double step, std::size_t samples,
                           std::uint64_t seed, double label_smoothing) {
  std::size_t positions = 0;
  model.loss_sum(pair.enc, pair.dec, label_smoothing, &positions);
  if (positions == 0) throw ValidationError("grad_check needs at least one scored position");
  const double scale = 1.0 / static_cast<double>(positions);
  Tensors grads = model.zeros_like();
  model.accumulate(pair.enc, pair.dec, label_smoothing, nullptr, scale, grads);

  auto& weights = model.weights();
  std::vector<std::pair<std::size_t, Eigen::Index>> all;
  for (std::size_t t = 0; t < weights.size(); ++t) {
    for (Eigen::Index k = 0; k < weights[t].size(); ++k) all.emplace_back(t, k);
  }
  std::vector<std::pair<std::size_t, Eigen::Index>> picked;
  if (all.size() <= samples) {
    picked = all;
  } else {
    std::mt19937_64 rng(seed);
    std::set<std::size_t> chosen;
    while (chosen.size() < samples) chosen.insert(static_cast<std::size_t>(rng() % all.size()));
    for (auto i : chosen) picked.push_back(all[i]);
  }

  auto loss = [&] { return model.loss_sum(pair.enc, pair.dec, label_smoothing) * scale; };
  GradCheckResult result;
  for (auto [t, k] : picked) {
    double& w = weights[t].data()[k];
    const double saved = w;
    w = saved + step;
    double up = loss();
    w = saved - step;
    double down = loss();
    w = saved;
    double numeric = (up - down) / (2.0 * step);
    double analytic = grads[t].data()[k];
    double abs_err = std::fabs(analytic - numeric);
    double rel = abs_err / std::max({std::fabs(analytic), std::fabs(numeric), 1e-7});
    result.max_rel_error = std::max(result.max_rel_error, rel);
    result.max_abs_error = std::max(result.max_abs_error, abs_err);
    result.sum_abs_error += abs_err;
    ++result.checked;
  }
  return result;
}

}  // namespace gig::seq
