#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

namespace gig::seq {

using Mat = Eigen::MatrixXd;

struct ModelParams {
  int embed_dim = 64;
  int num_heads = 2;
  int num_layers = 2;  // each of encoder and decoder
  int feedforward_dim = 128;
  int max_seq_len = 32;
  double dropout_rate = 0.1;
  double label_smoothing = 0.1;
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 100;
  std::uint64_t seed = 7;

  // Throws ValidationError.
  void validate() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

using Tensors = std::vector<Mat>;

struct LinearIdx {
  std::size_t w = 0, b = 0;
};
struct NormIdx {
  std::size_t g = 0, b = 0;
};
struct AttentionIdx {
  LinearIdx q, k, v, o;
};
struct FeedForwardIdx {
  LinearIdx in, out;
};
struct EncoderLayerIdx {
  AttentionIdx self;
  NormIdx norm1;
  FeedForwardIdx ff;
  NormIdx norm2;
};
struct DecoderLayerIdx {
  AttentionIdx self;
  NormIdx norm1;
  AttentionIdx cross;
  NormIdx norm2;
  FeedForwardIdx ff;
  NormIdx norm3;
};

// Names, shapes and roles of every weight tensor.
struct Layout {
  std::vector<std::string> names;
  std::vector<std::pair<int, int>> shapes;
  std::size_t src_embed = 0;
  std::size_t tgt_embed = 0;
  std::vector<EncoderLayerIdx> encoder;
  std::vector<DecoderLayerIdx> decoder;
  LinearIdx output;
};

Layout make_layout(const ModelParams& params, std::size_t vocab_size);

// Post-norm encoder-decoder with sinusoidal positions, ReLU feed-forward
// blocks and an output softmax. Sequences are processed one at a time; PAD
// tokens are masked out as attention keys.
class Transformer {
 public:
  // All weights zero.
  Transformer(const ModelParams& params, std::size_t vocab_size);

  // Xavier-uniform matrices, zero biases, unit norm gains.
  void init(std::uint64_t seed);

  const ModelParams& params() const { return params_; }
  std::size_t vocab_size() const { return vocab_size_; }
  const Layout& layout() const { return layout_; }
  Tensors& weights() { return weights_; }
  const Tensors& weights() const { return weights_; }
  Tensors zeros_like() const;

  // Encoder memory for `enc`.
  Mat encode(const std::vector<int>& enc) const;
  // Next-token distributions for every decoder input position (rows sum to 1).
  Mat decode(const Mat& memory, const std::vector<int>& enc, const std::vector<int>& dec_in) const;
  Mat forward(const std::vector<int>& enc, const std::vector<int>& dec_in) const;

  // Teacher-forced pass over dec = BOS ... EOS: returns the summed KL over
  // non-PAD target positions and adds grad_scale * d(sum)/d(weights) into
  // `grads`. `dropout` enables dropout with that generator.
  double accumulate(const std::vector<int>& enc, const std::vector<int>& dec, double label_smoothing,
                    std::mt19937_64* dropout, double grad_scale, Tensors& grads, std::size_t* positions = nullptr) const;

  // Summed KL without gradients or dropout.
  double loss_sum(const std::vector<int>& enc, const std::vector<int>& dec, double label_smoothing,
                  std::size_t* positions = nullptr) const;

 private:
  ModelParams params_;
  std::size_t vocab_size_;
  Layout layout_;
  Tensors weights_;
};

// Smoothed target row: 1 - eps at `target`, eps / (V - 1) elsewhere.
Eigen::RowVectorXd smoothed_target(std::size_t vocab_size, int target, double eps);

// Mean over non-PAD positions of KL(smoothed target || pred). Predicted
// probabilities are clamped below at 1e-12.
double kl_loss(const Mat& pred, const std::vector<int>& targets, double eps);

}  // namespace gig::seq
