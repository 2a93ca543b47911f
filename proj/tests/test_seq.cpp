#include <doctest.h>

#include <cmath>

#include "gig/error.hpp"
#include "gig/rule_dsl.hpp"
#include "gig/seq/beam.hpp"
#include "gig/seq/train.hpp"
#include "oracles.hpp"

using namespace gig;
using namespace gig::seq;

namespace {

PseudoTable table1() { return build_pseudo_table(oracle::table1_graph(), oracle::table1_pattern()); }

Gdd name_rule() { return parse_rules("rule r1 on table1 { LHS: eq(x.Name, *); RHS: eq(y.Name, *); }")[0]; }

std::vector<std::string> words(const Vocabulary& v, const std::vector<int>& ids) {
  std::vector<std::string> out;
  for (int i : ids) out.push_back(v.token(i));
  return out;
}

ModelParams tiny() {
  ModelParams p;
  p.embed_dim = 8;
  p.num_heads = 2;
  p.num_layers = 1;
  p.feedforward_dim = 16;
  p.dropout_rate = 0.0;
  return p;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

TEST_SUITE("seq-vocab") {

TEST_CASE("specials come first") {
  Vocabulary v;
  CHECK(v.size() == 5);
  CHECK(v.token(kPad) == "<pad>");
  CHECK(v.token(kBos) == "<bos>");
  CHECK(v.token(kEos) == "<eos>");
  CHECK(v.token(kUnk) == "<unk>");
  CHECK(v.token(kSep) == "<sep>");
  CHECK(v.id("never seen") == kUnk);
}

TEST_CASE("value tokens split on whitespace") {
  CHECK(value_tokens(AttributeValue("Grand  Theft Auto")) == std::vector<std::string>{"Grand", "Theft", "Auto"});
  CHECK(value_tokens(AttributeValue(2018.0)) == std::vector<std::string>{"2018"});
  CHECK(value_tokens(AttributeValue("")) == std::vector<std::string>{""});
}

TEST_CASE("vocabulary covers the attribute across same-label columns") {
  auto v = build_vocab(table1(), {name_rule()});
  for (const char* t : {"x.Name", "y.Name", "=0", "EA", "GL", "AF9", "AF11", "F20", "F21"}) {
    CHECK_MESSAGE(v.contains(t), t);
  }
  CHECK(v.kind(v.id("x.Name")) == TokenKind::ColumnRef);
  CHECK(v.kind(v.id("=0")) == TokenKind::Op);
  CHECK(v.kind(v.id("F20")) == TokenKind::Value);
  CHECK_FALSE(v.contains("Soccer"));
  CHECK_FALSE(v.contains("?"));
}

}

TEST_SUITE("seq-encoding") {

TEST_CASE("games training pairs are the rows the rule holds on") {
  auto t = table1();
  auto v = build_vocab(t, {name_rule()});
  auto pairs = make_training_pairs(t, {name_rule()}, v);
  REQUIRE(pairs.size() == 2);
  CHECK(words(v, pairs[0].enc) == std::vector<std::string>{"x.Name", "=0", "GL", "<eos>"});
  CHECK(words(v, pairs[0].dec) == std::vector<std::string>{"<bos>", "y.Name", "=0", "AF9", "<eos>"});
  CHECK(words(v, pairs[1].enc) == std::vector<std::string>{"x.Name", "=0", "EA", "<eos>"});
  CHECK(words(v, pairs[1].dec) == std::vector<std::string>{"<bos>", "y.Name", "=0", "F20", "<eos>"});
  CHECK(pairs[1].match_id == t.rows[3].match_id);
  CHECK(make_training_pairs(t, {name_rule()}, v, 4).empty());
}

TEST_CASE("literals are SEP-joined and multi-cell literals separate their cells") {
  auto t = table1();
  auto r = parse_rules("LHS: edit(y.Name, y2.Name) <= 2; eq(x.Name, *); RHS: abs(y.Year, y2.Year) <= 0;")[0];
  auto v = build_vocab(t, {r});
  auto enc = encoder_input(t, t.rows[0], r, v);
  REQUIRE(enc);
  CHECK(words(v, *enc) == std::vector<std::string>{"y.Name", "y2.Name", "≤2", "AF9", "<sep>", "AF11", "<sep>",
                                                   "x.Name", "=0", "GL", "<eos>"});
  CHECK_FALSE(encoder_input(t, t.rows[1], r, v).has_value());
}

TEST_CASE("decode templates locate value slots") {
  auto t = table1();
  auto r = parse_rules("LHS: eq(x.Name, *); RHS: eq(y.Name, *); eq(y.Year, *);")[0];
  auto v = build_vocab(t, {r});
  auto tmpl = decode_template(r, t.columns, v);
  CHECK(tmpl.slot_cells == std::vector<std::size_t>{3, 5});
  CHECK(slot_for_column(tmpl, 5) == 1);
  CHECK_FALSE(slot_for_column(tmpl, 4).has_value());
  std::vector<int> decoded{v.id("y.Name"), v.id("=0"), v.id("F20"), kSep, v.id("y.Year"), v.id("=0"), v.id("2019"),
                           kEos};
  CHECK(slot_values(tmpl, decoded, 0) == std::vector<int>{v.id("F20")});
  CHECK(slot_values(tmpl, decoded, 1) == std::vector<int>{v.id("2019")});
  decoded[1] = kSep;
  CHECK_FALSE(slot_values(tmpl, decoded, 0).has_value());
}

}

TEST_SUITE("seq-model") {

TEST_CASE("KL loss closed forms") {
  Mat uniform = Mat::Constant(1, 4, 0.25);
  CHECK(kl_loss(uniform, {1}, 0.0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  auto q = smoothed_target(6, 2, 0.1);
  CHECK(q.sum() == doctest::Approx(1.0));
  CHECK(q(2) == doctest::Approx(0.9));
  CHECK(q(0) == doctest::Approx(0.02));
  Mat exact(2, 6);
  exact.row(0) = smoothed_target(6, 2, 0.1);
  exact.row(1) = smoothed_target(6, 4, 0.1);
  CHECK(std::fabs(kl_loss(exact, {2, 4}, 0.1)) < 1e-12);
  // PAD targets are not scored
  CHECK(kl_loss(Mat::Constant(2, 4, 0.25), {1, kPad}, 0.0) == doctest::Approx(std::log(4.0)));
  // Hand-computed: q = (0.05, 0.9, 0.05), p = (0.2, 0.5, 0.3)
  Mat p(1, 3);
  p << 0.2, 0.5, 0.3;
  double want = 0.05 * std::log(0.05 / 0.2) + 0.9 * std::log(0.9 / 0.5) + 0.05 * std::log(0.05 / 0.3);
  CHECK(kl_loss(p, {1}, 0.1) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("zero weights predict the uniform distribution") {
  Transformer m(tiny(), 10);
  Mat probs = m.forward({5, 6, kEos}, {kBos, 7});
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    for (Eigen::Index c = 0; c < probs.cols(); ++c) CHECK(probs(r, c) == doctest::Approx(0.1));
  }
}

TEST_CASE("decoder positions only see earlier tokens") {
  Transformer m(tiny(), 12);
  m.init(4);
  Mat a = m.forward({5, 6, kEos}, {kBos, 7, 8, 9});
  Mat b = m.forward({5, 6, kEos}, {kBos, 7, 10, 11});
  CHECK((a.topRows(2) - b.topRows(2)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.row(2) - b.row(2)).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("PAD in the encoder input is ignored") {
  Transformer m(tiny(), 12);
  m.init(5);
  Mat a = m.forward({5, 6, kEos}, {kBos, 7});
  Mat b = m.forward({5, 6, kEos, kPad, kPad}, {kBos, 7});
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("analytic gradients match central differences") {
  Transformer m(tiny(), 12);
  m.init(3);
  TrainingPair pair{{5, 6, kSep, 7, kEos}, {kBos, 8, 9, kEos}, 0, 0};
  for (double eps : {0.0, 0.1}) {
    auto r = grad_check(m, pair, 1e-4, 300, 2, eps);
    CHECK(r.checked == 300);
    CHECK(r.max_rel_error < 1e-4);
  }
  // Central differences are second order: halving the step cuts the error ~4x.
  auto coarse = grad_check(m, pair, 2e-3, 300, 2, 0.1);
  auto fine = grad_check(m, pair, 1e-3, 300, 2, 0.1);
  double ratio = coarse.sum_abs_error / fine.sum_abs_error;
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.0);
}

TEST_CASE("gradients through a deeper model with dropout off") {
  ModelParams p = tiny();
  p.num_layers = 2;
  p.embed_dim = 12;
  p.num_heads = 3;
  Transformer m(p, 15);
  m.init(8);
  TrainingPair pair{{5, 6, 7, kSep, 8, kEos, kPad}, {kBos, 9, 10, 11, kEos}, 0, 0};
  CHECK(grad_check(m, pair, 1e-4, 300, 9, 0.1).max_rel_error < 1e-4);
}

TEST_CASE("hyperparameters are validated") {
  ModelParams p = tiny();
  p.num_heads = 3;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = tiny();
  p.dropout_rate = 1.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = tiny();
  p.label_smoothing = -0.1;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

}

TEST_SUITE("seq-train") {

TEST_CASE("training lowers the loss and the history never rises") {
  auto t = table1();
  auto v = build_vocab(t, {name_rule()});
  auto pairs = make_training_pairs(t, {name_rule()}, v);
  ModelParams p = tiny();
  p.epochs = 40;
  p.dropout_rate = 0.1;
  auto ck = train(pairs, v, p);
  CHECK(ck.final_loss < ck.initial_loss);
  CHECK(ck.loss_history.size() == ck.lr_history.size());
  for (std::size_t i = 1; i < ck.loss_history.size(); ++i) {
    CHECK(ck.loss_history[i] <= ck.loss_history[i - 1]);
    CHECK((ck.lr_history[i] == ck.lr_history[i - 1] || ck.lr_history[i] == ck.lr_history[i - 1] / 2));
  }
  CHECK(ck.final_loss == doctest::Approx(mean_loss(ck.model, pairs)));
  auto again = train(pairs, v, p);
  CHECK(checkpoint_bytes(again) == checkpoint_bytes(ck));
}

TEST_CASE("zero epochs leave the initial loss") {
  auto t = table1();
  auto v = build_vocab(t, {name_rule()});
  ModelParams p = tiny();
  p.epochs = 0;
  auto ck = train(make_training_pairs(t, {name_rule()}, v), v, p);
  CHECK(ck.final_loss == ck.initial_loss);
  CHECK(ck.loss_history.empty());
}

TEST_CASE("divergence is reported") {
  auto t = table1();
  auto v = build_vocab(t, {name_rule()});
  ModelParams p = tiny();
  p.learning_rate = 1e300;
  p.epochs = 3;
  try {
    train(make_training_pairs(t, {name_rule()}, v), v, p);
    FAIL("expected divergence");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
  CHECK_THROWS_AS(train({}, v, tiny()), TrainingError);
}

}

TEST_SUITE("seq-checkpoint") {

TEST_CASE("save and load round trip") {
  auto t = table1();
  auto v = build_vocab(t, {name_rule()});
  ModelParams p = tiny();
  p.epochs = 3;
  auto ck = train(make_training_pairs(t, {name_rule()}, v), v, p);
  auto bytes = checkpoint_bytes(ck);
  auto back = checkpoint_from_bytes(bytes);
  CHECK(back.params() == ck.params());
  CHECK(back.vocab == ck.vocab);
  CHECK(back.loss_history == ck.loss_history);
  CHECK(back.lr_history == ck.lr_history);
  CHECK(checkpoint_bytes(back) == bytes);
  Mat a = ck.model.forward({5, 6, kEos}, {kBos});
  Mat b = back.model.forward({5, 6, kEos}, {kBos});
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(training_log_csv(ck).rfind("epoch,loss,lr\n", 0) == 0);
}

TEST_CASE("damaged checkpoints are refused") {
  auto v = build_vocab(table1(), {name_rule()});
  Checkpoint ck(tiny(), v);
  ck.model.init(1);
  auto bytes = checkpoint_bytes(ck);
  CHECK_THROWS_AS(checkpoint_from_bytes(bytes.substr(0, bytes.size() / 2)), Error);
  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x10;
  CHECK_THROWS_WITH_AS(checkpoint_from_bytes(flipped), doctest::Contains("integrity"), Error);
  CHECK_THROWS_AS(checkpoint_from_bytes("not a checkpoint at all"), Error);

  // A future version with a valid checksum.
  auto body = bytes.substr(0, bytes.size() - 8);
  body[4] = 2;
  std::uint64_t h = fnv1a(body);
  std::string trailer(8, '\0');
  for (int i = 0; i < 8; ++i) trailer[i] = static_cast<char>((h >> (8 * i)) & 0xff);
  CHECK_THROWS_WITH_AS(checkpoint_from_bytes(body + trailer), doctest::Contains("version"), Error);
  // The untouched bytes pass the same independent checksum.
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[bytes.size() - 8 + i])) << (8 * i);
  CHECK(stored == fnv1a(bytes.substr(0, bytes.size() - 8)));
}

}

TEST_SUITE("seq-beam") {

TEST_CASE("constrained beam follows the template and ranks by normalised score") {
  auto t = table1();
  auto r = parse_rules("LHS: eq(x.Name, *); RHS: eq(y.Name, *); eq(y.Year, *);")[0];
  auto v = build_vocab(t, {r});
  Transformer m(tiny(), v.size());
  m.init(21);
  auto tmpl = decode_template(r, t.columns, v);
  auto enc = *encoder_input(t, t.rows[1], r, v);
  auto pred = predict_topk(m, v, enc, 4, &tmpl);
  REQUIRE(pred.hypotheses.size() == 4);
  for (std::size_t i = 0; i < pred.hypotheses.size(); ++i) {
    const auto& h = pred.hypotheses[i];
    if (h.tokens.back() == kEos) {
      CHECK(slot_values(tmpl, h.tokens, 0).has_value());
      CHECK(slot_values(tmpl, h.tokens, 1).has_value());
    }
    CHECK(h.score == doctest::Approx(h.log_prob / static_cast<double>(h.tokens.size())));
    if (i > 0) CHECK(pred.hypotheses[i - 1].score >= h.score);
  }
  CHECK_FALSE(pred.unk_input);
  CHECK(predict_topk(m, v, {v.id("x.Name"), v.id("=0"), kUnk, kEos}, 1, &tmpl).unk_input);
  CHECK_THROWS_AS(predict_topk(m, v, enc, 0, &tmpl), ValidationError);
}

TEST_CASE("unconstrained beam stops at EOS or the length limit") {
  ModelParams p = tiny();
  p.max_seq_len = 6;
  Transformer m(p, 9);
  m.init(2);
  auto pred = predict_topk(m, Vocabulary{}, {5, 6, kEos}, 3);
  REQUIRE_FALSE(pred.hypotheses.empty());
  for (const auto& h : pred.hypotheses) {
    CHECK((h.tokens.back() == kEos || h.tokens.size() == 6));
    for (int tok : h.tokens) CHECK((tok != kPad && tok != kBos));
  }
}

TEST_CASE("a trained model recalls the games pairs") {
  auto t = table1();
  auto v = build_vocab(t, {name_rule()});
  auto pairs = make_training_pairs(t, {name_rule()}, v);
  ModelParams p;
  p.embed_dim = 16;
  p.feedforward_dim = 32;
  p.learning_rate = 1e-2;
  p.epochs = 100;
  auto ck = train(pairs, v, p);
  auto tmpl = decode_template(name_rule(), t.columns, v);
  auto enc = *encoder_input(t, t.rows[1], name_rule(), v);
  auto best = predict_topk(ck.model, v, enc, 2, &tmpl).hypotheses.at(0);
  CHECK(words(v, *slot_values(tmpl, best.tokens, 0)) == std::vector<std::string>{"F20"});
}

}
