#include "gig/seq/transformer.hpp"

#include <cmath>

#include "gig/error.hpp"
#include "gig/seq/vocab.hpp"

namespace gig::seq {

void ModelParams::validate() const {
  if (embed_dim < 1 || num_heads < 1 || embed_dim % num_heads != 0) {
    throw ValidationError("embed_dim must be a positive multiple of num_heads");
  }
  if (num_layers < 1) throw ValidationError("num_layers must be at least 1");
  if (feedforward_dim < 1) throw ValidationError("feedforward_dim must be at least 1");
  if (max_seq_len < 2) throw ValidationError("max_seq_len must be at least 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ValidationError("dropout_rate must be in [0, 1)");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) throw ValidationError("label_smoothing must be in [0, 1)");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
}

namespace {

constexpr double kNormEps = 1e-5;
constexpr double kProbFloor = 1e-12;

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// ---- building blocks ------------------------------------------------------------

Mat linear(const Mat& x, const Tensors& W, const LinearIdx& L) {
  Mat y = x * W[L.w];
  y.rowwise() += W[L.b].row(0);
  return y;
}

Mat linear_back(const Mat& x, const Mat& dy, const Tensors& W, const LinearIdx& L, Tensors& G) {
  G[L.w].noalias() += x.transpose() * dy;
  G[L.b] += dy.colwise().sum();
  return dy * W[L.w].transpose();
}

struct DropoutCache {
  Mat mask;
  bool active = false;
};

Mat dropout(const Mat& x, double rate, std::mt19937_64* rng, DropoutCache* c) {
  if (!rng || rate <= 0.0) return x;
  Mat mask(x.rows(), x.cols());
  double keep = 1.0 - rate;
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = unit_uniform(*rng) < keep ? 1.0 / keep : 0.0;
  Mat y = x.cwiseProduct(mask);
  if (c) {
    c->mask = std::move(mask);
    c->active = true;
  }
  return y;
}

Mat dropout_back(const Mat& dy, const DropoutCache& c) { return c.active ? Mat(dy.cwiseProduct(c.mask)) : dy; }

struct NormCache {
  Mat xhat;
  Eigen::VectorXd inv_std;
};

Mat layer_norm(const Mat& x, const Tensors& W, const NormIdx& N, NormCache* c) {
  Mat xhat(x.rows(), x.cols());
  Eigen::VectorXd inv(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mu = x.row(i).mean();
    Eigen::RowVectorXd diff = x.row(i).array() - mu;
    double var = diff.squaredNorm() / static_cast<double>(x.cols());
    inv(i) = 1.0 / std::sqrt(var + kNormEps);
    xhat.row(i) = diff * inv(i);
  }
  Mat y = xhat.array().rowwise() * W[N.g].row(0).array();
  y.rowwise() += W[N.b].row(0);
  if (c) {
    c->xhat = std::move(xhat);
    c->inv_std = std::move(inv);
  }
  return y;
}

Mat layer_norm_back(const Mat& dy, const Tensors& W, const NormIdx& N, const NormCache& c, Tensors& G) {
  G[N.g] += dy.cwiseProduct(c.xhat).colwise().sum();
  G[N.b] += dy.colwise().sum();
  Mat dxhat = dy.array().rowwise() * W[N.g].row(0).array();
  Mat dx(dy.rows(), dy.cols());
  double n = static_cast<double>(dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    double mean_d = dxhat.row(i).sum() / n;
    double mean_dx = dxhat.row(i).dot(c.xhat.row(i)) / n;
    dx.row(i) = c.inv_std(i) * (dxhat.row(i).array() - mean_d - c.xhat.row(i).array() * mean_dx);
  }
  return dx;
}

struct AttentionCache {
  Mat xq, xkv, q, k, v, concat;
  std::vector<Mat> probs;
};

Mat attention(const Tensors& W, const AttentionIdx& A, const Mat& xq, const Mat& xkv, const std::vector<bool>& key_pad,
              bool causal, int heads, AttentionCache* c) {
  Mat q = linear(xq, W, A.q);
  Mat k = linear(xkv, W, A.k);
  Mat v = linear(xkv, W, A.v);
  const Eigen::Index d = q.cols();
  const Eigen::Index dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Mat concat(q.rows(), d);
  for (int h = 0; h < heads; ++h) {
    Mat s = q.middleCols(h * dk, dk) * k.middleCols(h * dk, dk).transpose() * scale;
    Mat p = Mat::Zero(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      double top = -INFINITY;
      for (Eigen::Index j = 0; j < s.cols(); ++j) {
        bool masked = key_pad[static_cast<std::size_t>(j)] || (causal && j > i);
        if (!masked) top = std::max(top, s(i, j));
      }
      if (top == -INFINITY) continue;  // nothing to attend to: zero output
      double sum = 0.0;
      for (Eigen::Index j = 0; j < s.cols(); ++j) {
        bool masked = key_pad[static_cast<std::size_t>(j)] || (causal && j > i);
        if (!masked) sum += p(i, j) = std::exp(s(i, j) - top);
      }
      p.row(i) /= sum;
    }
    concat.middleCols(h * dk, dk) = p * v.middleCols(h * dk, dk);
    if (c) c->probs.push_back(std::move(p));
  }
  Mat out = linear(concat, W, A.o);
  if (c) {
    c->xq = xq;
    c->xkv = xkv;
    c->q = std::move(q);
    c->k = std::move(k);
    c->v = std::move(v);
    c->concat = std::move(concat);
  }
  return out;
}

void attention_back(const Tensors& W, const AttentionIdx& A, const Mat& dout, const AttentionCache& c, int heads, Tensors& G,
                    Mat& dxq, Mat& dxkv) {
  Mat dconcat = linear_back(c.concat, dout, W, A.o, G);
  const Eigen::Index d = c.q.cols();
  const Eigen::Index dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Mat dq = Mat::Zero(c.q.rows(), d);
  Mat dk_ = Mat::Zero(c.k.rows(), d);
  Mat dv = Mat::Zero(c.v.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const Mat& p = c.probs[static_cast<std::size_t>(h)];
    Mat doh = dconcat.middleCols(h * dk, dk);
    dv.middleCols(h * dk, dk) += p.transpose() * doh;
    Mat dp = doh * c.v.middleCols(h * dk, dk).transpose();
    Mat ds(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      double inner = dp.row(i).dot(p.row(i));
      ds.row(i) = p.row(i).array() * (dp.row(i).array() - inner);
    }
    ds *= scale;
    dq.middleCols(h * dk, dk) += ds * c.k.middleCols(h * dk, dk);
    dk_.middleCols(h * dk, dk) += ds.transpose() * c.q.middleCols(h * dk, dk);
  }
  dxq = linear_back(c.xq, dq, W, A.q, G);
  dxkv = linear_back(c.xkv, dk_, W, A.k, G) + linear_back(c.xkv, dv, W, A.v, G);
}

struct FeedForwardCache {
  Mat x, pre;
};

Mat feed_forward(const Tensors& W, const FeedForwardIdx& F, const Mat& x, FeedForwardCache* c) {
  Mat pre = linear(x, W, F.in);
  Mat out = linear(pre.cwiseMax(0.0), W, F.out);
  if (c) {
    c->x = x;
    c->pre = std::move(pre);
  }
  return out;
}

Mat feed_forward_back(const Tensors& W, const FeedForwardIdx& F, const Mat& dout, const FeedForwardCache& c, Tensors& G) {
  Mat dh = linear_back(c.pre.cwiseMax(0.0), dout, W, F.out, G);
  Mat dpre = dh.array() * (c.pre.array() > 0.0).cast<double>();
  return linear_back(c.x, dpre, W, F.in, G);
}

struct EncoderLayerCache {
  AttentionCache attn;
  DropoutCache drop1;
  NormCache norm1;
  FeedForwardCache ff;
  DropoutCache drop2;
  NormCache norm2;
};

struct DecoderLayerCache {
  AttentionCache self;
  DropoutCache drop1;
  NormCache norm1;
  AttentionCache cross;
  DropoutCache drop2;
  NormCache norm2;
  FeedForwardCache ff;
  DropoutCache drop3;
  NormCache norm3;
};

struct PassCache {
  DropoutCache src_drop, tgt_drop;
  std::vector<EncoderLayerCache> encoder;
  std::vector<DecoderLayerCache> decoder;
};

std::vector<bool> pad_mask(const std::vector<int>& ids) {
  std::vector<bool> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) out[i] = ids[i] == kPad;
  return out;
}

}  // namespace

// ---- layout & init --------------------------------------------------------------

Layout make_layout(const ModelParams& p, std::size_t vocab_size) {
  Layout L;
  auto add = [&](const std::string& name, int rows, int cols) {
    L.names.push_back(name);
    L.shapes.emplace_back(rows, cols);
    return L.names.size() - 1;
  };
  const int d = p.embed_dim;
  const int v = static_cast<int>(vocab_size);
  auto linear_idx = [&](const std::string& name, int in, int out) {
    LinearIdx l;
    l.w = add(name + ".w", in, out);
    l.b = add(name + ".b", 1, out);
    return l;
  };
  auto norm_idx = [&](const std::string& name) {
    NormIdx n;
    n.g = add(name + ".g", 1, d);
    n.b = add(name + ".b", 1, d);
    return n;
  };
  auto attention_idx = [&](const std::string& name) {
    return AttentionIdx{linear_idx(name + ".q", d, d), linear_idx(name + ".k", d, d), linear_idx(name + ".v", d, d),
                        linear_idx(name + ".o", d, d)};
  };
  auto ff_idx = [&](const std::string& name) {
    return FeedForwardIdx{linear_idx(name + ".in", d, p.feedforward_dim), linear_idx(name + ".out", p.feedforward_dim, d)};
  };
  L.src_embed = add("src_embed", v, d);
  L.tgt_embed = add("tgt_embed", v, d);
  for (int i = 0; i < p.num_layers; ++i) {
    std::string n = "enc." + std::to_string(i);
    EncoderLayerIdx e;
    e.self = attention_idx(n + ".self");
    e.norm1 = norm_idx(n + ".norm1");
    e.ff = ff_idx(n + ".ff");
    e.norm2 = norm_idx(n + ".norm2");
    L.encoder.push_back(e);
  }
  for (int i = 0; i < p.num_layers; ++i) {
    std::string n = "dec." + std::to_string(i);
    DecoderLayerIdx e;
    e.self = attention_idx(n + ".self");
    e.norm1 = norm_idx(n + ".norm1");
    e.cross = attention_idx(n + ".cross");
    e.norm2 = norm_idx(n + ".norm2");
    e.ff = ff_idx(n + ".ff");
    e.norm3 = norm_idx(n + ".norm3");
    L.decoder.push_back(e);
  }
  L.output = linear_idx("out", d, v);
  return L;
}

Transformer::Transformer(const ModelParams& params, std::size_t vocab_size)
    : params_(params), vocab_size_(vocab_size), layout_(make_layout(params, vocab_size)) {
  params_.validate();
  if (vocab_size < 2) throw ValidationError("vocabulary needs at least two tokens");
  weights_ = zeros_like();
}

Tensors Transformer::zeros_like() const {
  Tensors out;
  out.reserve(layout_.shapes.size());
  for (auto [r, c] : layout_.shapes) out.push_back(Mat::Zero(r, c));
  return out;
}

void Transformer::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const std::string& name = layout_.names[i];
    Mat& w = weights_[i];
    if (name.size() > 2 && name.compare(name.size() - 2, 2, ".g") == 0) {
      w.setOnes();
    } else if (w.rows() == 1) {
      w.setZero();
    } else {
      double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = (2.0 * unit_uniform(rng) - 1.0) * a;
    }
  }
}

// ---- passes ------------------------------------------------------------------------

namespace {

Mat embed(const Mat& table, const std::vector<int>& ids, int max_len) {
  if (ids.empty()) throw Error("empty token sequence");
  if (static_cast<int>(ids.size()) > max_len) {
    throw Error("sequence of length " + std::to_string(ids.size()) + " exceeds max_seq_len " + std::to_string(max_len));
  }
  const Eigen::Index d = table.cols();
  const double scale = std::sqrt(static_cast<double>(d));
  Mat x(static_cast<Eigen::Index>(ids.size()), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) throw Error("token id " + std::to_string(ids[i]) + " out of range");
    for (Eigen::Index c = 0; c < d; ++c) {
      double angle = static_cast<double>(i) / std::pow(10000.0, static_cast<double>(2 * (c / 2)) / static_cast<double>(d));
      x(static_cast<Eigen::Index>(i), c) = table(ids[i], c) * scale + (c % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return x;
}

void embed_back(const Mat& dx, const std::vector<int>& ids, Mat& grad) {
  const double scale = std::sqrt(static_cast<double>(dx.cols()));
  for (std::size_t i = 0; i < ids.size(); ++i) grad.row(ids[i]) += dx.row(static_cast<Eigen::Index>(i)) * scale;
}

struct Pass {
  Pass(const Transformer& m, std::mt19937_64* r, PassCache* c) : model(m), rng(r), cache(c) {}

  const Transformer& model;
  std::mt19937_64* rng;
  PassCache* cache;
  Mat decoder_out;

  const Tensors& W() const { return model.weights(); }
  double rate() const { return rng ? model.params().dropout_rate : 0.0; }
  int heads() const { return model.params().num_heads; }

  Mat encode(const std::vector<int>& enc) {
    const auto& L = model.layout();
    const auto pad = pad_mask(enc);
    Mat x = dropout(embed(W()[L.src_embed], enc, model.params().max_seq_len), rate(), rng, cache ? &cache->src_drop : nullptr);
    for (std::size_t l = 0; l < L.encoder.size(); ++l) {
      const auto& I = L.encoder[l];
      EncoderLayerCache* c = cache ? &cache->encoder.emplace_back() : nullptr;
      Mat a = attention(W(), I.self, x, x, pad, false, heads(), c ? &c->attn : nullptr);
      Mat x1 = layer_norm(x + dropout(a, rate(), rng, c ? &c->drop1 : nullptr), W(), I.norm1, c ? &c->norm1 : nullptr);
      Mat f = feed_forward(W(), I.ff, x1, c ? &c->ff : nullptr);
      x = layer_norm(x1 + dropout(f, rate(), rng, c ? &c->drop2 : nullptr), W(), I.norm2, c ? &c->norm2 : nullptr);
    }
    return x;
  }

  // Output logits.
  Mat decode(const Mat& memory, const std::vector<int>& enc, const std::vector<int>& dec_in) {
    const auto& L = model.layout();
    const auto src_pad = pad_mask(enc);
    const auto tgt_pad = pad_mask(dec_in);
    Mat y = dropout(embed(W()[L.tgt_embed], dec_in, model.params().max_seq_len), rate(), rng,
                    cache ? &cache->tgt_drop : nullptr);
    for (std::size_t l = 0; l < L.decoder.size(); ++l) {
      const auto& I = L.decoder[l];
      DecoderLayerCache* c = cache ? &cache->decoder.emplace_back() : nullptr;
      Mat s = attention(W(), I.self, y, y, tgt_pad, true, heads(), c ? &c->self : nullptr);
      Mat y1 = layer_norm(y + dropout(s, rate(), rng, c ? &c->drop1 : nullptr), W(), I.norm1, c ? &c->norm1 : nullptr);
      Mat x = attention(W(), I.cross, y1, memory, src_pad, false, heads(), c ? &c->cross : nullptr);
      Mat y2 = layer_norm(y1 + dropout(x, rate(), rng, c ? &c->drop2 : nullptr), W(), I.norm2, c ? &c->norm2 : nullptr);
      Mat f = feed_forward(W(), I.ff, y2, c ? &c->ff : nullptr);
      y = layer_norm(y2 + dropout(f, rate(), rng, c ? &c->drop3 : nullptr), W(), I.norm3, c ? &c->norm3 : nullptr);
    }
    decoder_out = y;
    return linear(y, W(), L.output);
  }

  // Backward from d(loss)/d(logits); caches must be filled.
  void backward(const Mat& dlogits, const std::vector<int>& enc, const std::vector<int>& dec_in, Tensors& G) {
    const auto& L = model.layout();
    Mat dy = linear_back(decoder_out, dlogits, W(), L.output, G);
    Mat dmemory = Mat::Zero(static_cast<Eigen::Index>(enc.size()), dy.cols());
    for (std::size_t l = L.decoder.size(); l-- > 0;) {
      const auto& I = L.decoder[l];
      const auto& c = cache->decoder[l];
      Mat d3 = layer_norm_back(dy, W(), I.norm3, c.norm3, G);
      Mat dy2 = d3 + feed_forward_back(W(), I.ff, dropout_back(d3, c.drop3), c.ff, G);
      Mat d2 = layer_norm_back(dy2, W(), I.norm2, c.norm2, G);
      Mat dq, dkv;
      attention_back(W(), I.cross, dropout_back(d2, c.drop2), c.cross, heads(), G, dq, dkv);
      dmemory += dkv;
      Mat dy1 = d2 + dq;
      Mat d1 = layer_norm_back(dy1, W(), I.norm1, c.norm1, G);
      Mat sq, skv;
      attention_back(W(), I.self, dropout_back(d1, c.drop1), c.self, heads(), G, sq, skv);
      dy = d1 + sq + skv;
    }
    embed_back(dropout_back(dy, cache->tgt_drop), dec_in, G[L.tgt_embed]);

    Mat dx = dmemory;
    for (std::size_t l = L.encoder.size(); l-- > 0;) {
      const auto& I = L.encoder[l];
      const auto& c = cache->encoder[l];
      Mat d2 = layer_norm_back(dx, W(), I.norm2, c.norm2, G);
      Mat dx1 = d2 + feed_forward_back(W(), I.ff, dropout_back(d2, c.drop2), c.ff, G);
      Mat d1 = layer_norm_back(dx1, W(), I.norm1, c.norm1, G);
      Mat aq, akv;
      attention_back(W(), I.self, dropout_back(d1, c.drop1), c.attn, heads(), G, aq, akv);
      dx = d1 + aq + akv;
    }
    embed_back(dropout_back(dx, cache->src_drop), enc, G[L.src_embed]);
  }
};

Mat softmax_rows(const Mat& logits) {
  Mat p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double top = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - top).exp();
    p.row(i) = e / e.sum();
  }
  return p;
}

void split_teacher(const std::vector<int>& dec, std::vector<int>& dec_in, std::vector<int>& targets) {
  if (dec.size() < 2) throw Error("decoder sequence needs at least BOS and one target");
  dec_in.assign(dec.begin(), dec.end() - 1);
  targets.assign(dec.begin() + 1, dec.end());
}

double kl_row(const Eigen::RowVectorXd& p, const Eigen::RowVectorXd& q) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (q(i) > 0.0) sum += q(i) * (std::log(q(i)) - std::log(std::max(p(i), kProbFloor)));
  }
  return sum;
}

}  // namespace

Mat Transformer::encode(const std::vector<int>& enc) const { return Pass(*this, nullptr, nullptr).encode(enc); }

Mat Transformer::decode(const Mat& memory, const std::vector<int>& enc, const std::vector<int>& dec_in) const {
  Pass pass(*this, nullptr, nullptr);
  return softmax_rows(pass.decode(memory, enc, dec_in));
}

Mat Transformer::forward(const std::vector<int>& enc, const std::vector<int>& dec_in) const {
  return decode(encode(enc), enc, dec_in);
}

double Transformer::accumulate(const std::vector<int>& enc, const std::vector<int>& dec, double eps,
                               std::mt19937_64* dropout, double grad_scale, Tensors& grads, std::size_t* positions) const {
  std::vector<int> dec_in, targets;
  split_teacher(dec, dec_in, targets);
  PassCache cache;
  Pass pass(*this, dropout, &cache);
  Mat memory = pass.encode(enc);
  Mat probs = softmax_rows(pass.decode(memory, enc, dec_in));
  Mat dlogits = Mat::Zero(probs.rows(), probs.cols());
  double loss = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == kPad) continue;
    auto row = static_cast<Eigen::Index>(i);
    Eigen::RowVectorXd q = smoothed_target(vocab_size_, targets[i], eps);
    loss += kl_row(probs.row(row), q);
    dlogits.row(row) = (probs.row(row) - q) * grad_scale;
    ++n;
  }
  if (positions) *positions = n;
  pass.backward(dlogits, enc, dec_in, grads);
  return loss;
}

double Transformer::loss_sum(const std::vector<int>& enc, const std::vector<int>& dec, double eps, std::size_t* positions) const {
  std::vector<int> dec_in, targets;
  split_teacher(dec, dec_in, targets);
  Mat probs = forward(enc, dec_in);
  double loss = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == kPad) continue;
    loss += kl_row(probs.row(static_cast<Eigen::Index>(i)), smoothed_target(vocab_size_, targets[i], eps));
    ++n;
  }
  if (positions) *positions = n;
  return loss;
}

Eigen::RowVectorXd smoothed_target(std::size_t vocab_size, int target, double eps) {
  if (vocab_size < 2) throw ValidationError("label smoothing needs at least two classes");
  if (target < 0 || static_cast<std::size_t>(target) >= vocab_size) throw Error("target id out of range");
  Eigen::RowVectorXd q = Eigen::RowVectorXd::Constant(static_cast<Eigen::Index>(vocab_size),
                                                      eps / static_cast<double>(vocab_size - 1));
  q(target) = 1.0 - eps;
  return q;
}

double kl_loss(const Mat& pred, const std::vector<int>& targets, double eps) {
  if (static_cast<std::size_t>(pred.rows()) != targets.size()) throw ValidationError("prediction rows and targets differ in length");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == kPad) continue;
    sum += kl_row(pred.row(static_cast<Eigen::Index>(i)), smoothed_target(static_cast<std::size_t>(pred.cols()), targets[i], eps));
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace gig::seq
