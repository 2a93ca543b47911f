#include "gig/seq/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "gig/error.hpp"
#include "gig/json_util.hpp"
#include "gig/value.hpp"

namespace gig::seq {

namespace {

constexpr char kMagic[4] = {'G', 'I', 'G', 'M'};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out += s;
  }
  std::string out;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    std::uint64_t n = u64();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) throw Error("checkpoint is truncated");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string checkpoint_bytes(const Checkpoint& c) {
  Writer w;
  w.out.append(kMagic, 4);
  w.u32(kCheckpointVersion);
  const auto& p = c.params();
  for (int v : {p.embed_dim, p.num_heads, p.num_layers, p.feedforward_dim, p.max_seq_len, p.batch_size, p.epochs}) w.i32(v);
  for (double v : {p.dropout_rate, p.label_smoothing, p.learning_rate}) w.f64(v);
  w.u64(p.seed);

  w.u64(c.vocab.size());
  for (std::size_t i = 0; i < c.vocab.size(); ++i) {
    w.out.push_back(static_cast<char>(c.vocab.kinds()[i]));
    w.str(c.vocab.tokens()[i]);
  }
  for (const auto* series : {&c.loss_history, &c.lr_history}) {
    w.u64(series->size());
    for (double v : *series) w.f64(v);
  }
  w.f64(c.initial_loss);
  w.f64(c.final_loss);

  const auto& layout = c.model.layout();
  const auto& weights = c.model.weights();
  w.u64(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    w.str(layout.names[i]);
    w.u64(static_cast<std::uint64_t>(weights[i].rows()));
    w.u64(static_cast<std::uint64_t>(weights[i].cols()));
    for (Eigen::Index r = 0; r < weights[i].rows(); ++r) {
      for (Eigen::Index k = 0; k < weights[i].cols(); ++k) w.f64(weights[i](r, k));
    }
  }
  w.u64(fnv1a(w.out));
  return w.out;
}

Checkpoint checkpoint_from_bytes(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error("not a model checkpoint");
  std::string_view body(bytes.data(), bytes.size() - 8);
  Reader trailer(std::string_view(bytes).substr(bytes.size() - 8));
  if (trailer.u64() != fnv1a(body)) throw Error("checkpoint integrity check failed (truncated or corrupted)");

  Reader r(body);
  r.u32();  // magic
  std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                std::to_string(kCheckpointVersion) + ")");
  }
  ModelParams p;
  p.embed_dim = r.i32();
  p.num_heads = r.i32();
  p.num_layers = r.i32();
  p.feedforward_dim = r.i32();
  p.max_seq_len = r.i32();
  p.batch_size = r.i32();
  p.epochs = r.i32();
  p.dropout_rate = r.f64();
  p.label_smoothing = r.f64();
  p.learning_rate = r.f64();
  p.seed = r.u64();

  p.validate();

  Vocabulary vocab;
  std::uint64_t n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    auto kind = static_cast<TokenKind>(r.u8());
    std::string token = r.str();
    if (i < 5) {
      if (token != vocab.tokens()[i]) throw Error("checkpoint vocabulary has unexpected special tokens");
      continue;
    }
    if (vocab.add(token, kind) != static_cast<int>(i)) throw Error("checkpoint vocabulary has duplicate tokens");
  }

  Checkpoint c(p, std::move(vocab));
  for (auto* series : {&c.loss_history, &c.lr_history}) {
    std::uint64_t len = r.u64();
    for (std::uint64_t i = 0; i < len; ++i) series->push_back(r.f64());
  }
  c.initial_loss = r.f64();
  c.final_loss = r.f64();

  const auto& layout = c.model.layout();
  auto& weights = c.model.weights();
  if (r.u64() != weights.size()) throw Error("checkpoint tensor count does not match its hyperparameters");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    std::string name = r.str();
    auto rows = r.u64();
    auto cols = r.u64();
    if (name != layout.names[i] || rows != static_cast<std::uint64_t>(weights[i].rows()) ||
        cols != static_cast<std::uint64_t>(weights[i].cols())) {
      throw Error("checkpoint tensor " + name + " does not match the expected layout");
    }
    for (Eigen::Index a = 0; a < weights[i].rows(); ++a) {
      for (Eigen::Index b = 0; b < weights[i].cols(); ++b) weights[i](a, b) = r.f64();
    }
  }
  if (!r.done()) throw Error("checkpoint has trailing data");
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) { write_text_file(path, checkpoint_bytes(c)); }

Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_bytes(read_text_file(path)); }

std::string training_log_csv(const Checkpoint& c) {
  std::string out = "epoch,loss,lr\n";
  for (std::size_t i = 0; i < c.loss_history.size(); ++i) {
    out += std::to_string(i + 1) + "," + format_number(c.loss_history[i]) + "," + format_number(c.lr_history.at(i)) + "\n";
  }
  return out;
}

}  // namespace gig::seq
