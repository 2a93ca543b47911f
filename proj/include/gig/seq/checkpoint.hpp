#pragma once

#include <string>
#include <vector>

#include "gig/seq/transformer.hpp"
#include "gig/seq/vocab.hpp"

namespace gig::seq {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Checkpoint(const ModelParams& params, Vocabulary vocab) : vocab(std::move(vocab)), model(params, this->vocab.size()) {}

  Vocabulary vocab;
  Transformer model;
  // Per epoch: loss of the kept weights on the full training set (dropout
  // off), and the learning rate the epoch ran with.
  std::vector<double> loss_history;
  std::vector<double> lr_history;
  double initial_loss = 0.0;
  double final_loss = 0.0;

  const ModelParams& params() const { return model.params(); }
};

// Little-endian: "GIGM", u32 version, hyperparameters, vocabulary, loss
// history, then named row-major f64 tensors and an FNV-1a 64 checksum.
std::string checkpoint_bytes(const Checkpoint& c);
Checkpoint checkpoint_from_bytes(const std::string& bytes);
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// "epoch,loss,lr" lines.
std::string training_log_csv(const Checkpoint& c);

}  // namespace gig::seq
