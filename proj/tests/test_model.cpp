// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numeric>

#include "hnsa/error.hpp"
#include "hnsa/grad_check.hpp"
#include "hnsa/model.hpp"
#include "test_util.hpp"

namespace ad = hnsa::ad;
using hnsa::testing::numeric_gradient;
using hnsa::testing::random_tensor;
using hnsa::testing::sym_rel_err;
using hnsa::testing::tiny_dialog;
using hnsa::testing::tiny_dims;
using hnsa::testing::tiny_params;

namespace {

std::vector<double> vec(const ad::Tensor& t) { return {t.values().begin(), t.values().end()}; }

hnsa::BiLstmParams random_cell(std::size_t in, std::size_t h, hnsa::Rng& rng) {
  hnsa::BiLstmParams p;
  p.input_dim = in;
  p.hidden_dim = h;
  for (auto* d : {&p.forward, &p.backward}) {
    d->w_ih = random_tensor({4 * h, in}, rng);
    d->w_hh = random_tensor({4 * h, h}, rng);
    d->bias = random_tensor({4 * h}, rng);
  }
  return p;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(LstmStepTest, ZeroWeightsGiveZeroOutput) {
  const auto params = hnsa::allocate_params(10, 2, tiny_dims(), true);
  ad::Tape tape(false);
  hnsa::Rng rng(1);
  const auto x = random_tensor({8}, rng, -5, 5, false);
  const auto next = hnsa::lstm_step(tape, params.utterance_lstm, hnsa::Direction::kForward, x,
                                    hnsa::zero_state(4));
  EXPECT_EQ(vec(next.h), std::vector<double>(4, 0.0));
  EXPECT_EQ(vec(next.c), std::vector<double>(4, 0.0));
}

TEST(LstmStepTest, MatchesScalarReference) {
  // A 1-unit cell computed by hand from the gate equations.
  hnsa::Rng rng(2);
  const auto p = random_cell(2, 1, rng);
  const auto x = ad::Tensor::vector({0.4, -0.9});
  const hnsa::LstmState s{ad::Tensor::vector({0.2}), ad::Tensor::vector({-0.3})};
  ad::Tape tape(false);
  const auto out = hnsa::lstm_step(tape, p, hnsa::Direction::kForward, x, s);
  std::array<double, 4> z{};
  for (std::size_t g = 0; g < 4; ++g) {
    z[g] = p.forward.w_ih.at(g, 0) * 0.4 + p.forward.w_ih.at(g, 1) * -0.9 +
           p.forward.w_hh.at(g, 0) * 0.2 + p.forward.bias[g];
  }
  const double c = sigmoid(z[1]) * -0.3 + sigmoid(z[0]) * std::tanh(z[2]);
  const double h = sigmoid(z[3]) * std::tanh(c);
  EXPECT_NEAR(out.c.item(), c, 1e-15);
  EXPECT_NEAR(out.h.item(), h, 1e-15);
}

TEST(LstmStepTest, TwoUnitCellGradient) {
  hnsa::Rng rng(3);
  const auto p = random_cell(3, 2, rng);
  auto x = random_tensor({3}, rng);
  const hnsa::LstmState s{random_tensor({2}, rng), random_tensor({2}, rng)};
  const auto w = random_tensor({2}, rng, -1, 1, false);
  const auto loss = [&](ad::Tape& t) {
    const auto next = hnsa::lstm_step(t, p, hnsa::Direction::kForward, x, s);
    return ad::add(t, ad::sum(t, ad::mul(t, next.h, w)), ad::sum(t, next.c));
  };
  std::vector<ad::Tensor> tensors{p.forward.w_ih, p.forward.w_hh, p.forward.bias, x, s.h, s.c};
  EXPECT_LT(ad::grad_check(loss, tensors).max_rel_error, 1e-5);
}

TEST(LstmStepTest, ShapeErrors) {
  hnsa::Rng rng(4);
  const auto p = random_cell(3, 2, rng);
  ad::Tape tape(false);
  EXPECT_THROW(hnsa::lstm_step(tape, p, hnsa::Direction::kForward, ad::Tensor::zeros({4}),
                               hnsa::zero_state(2)),
               hnsa::ShapeError);
  EXPECT_THROW(hnsa::lstm_step(tape, p, hnsa::Direction::kBackward, ad::Tensor::zeros({3}),
                               hnsa::zero_state(3)),
               hnsa::ShapeError);
}

TEST(BiLstmTest, ComposesSteps) {
  hnsa::Rng rng(5);
  const auto p = random_cell(2, 3, rng);
  std::vector<ad::Tensor> xs;
  for (int i = 0; i < 3; ++i) xs.push_back(random_tensor({2}, rng, -1, 1, false));
  ad::Tape tape(false);
  const auto out = hnsa::run_bilstm(tape, p, xs);

  hnsa::LstmState s = hnsa::zero_state(3);
  for (const auto& x : xs) s = hnsa::lstm_step(tape, p, hnsa::Direction::kForward, x, s);
  EXPECT_EQ(vec(out.forward[2]), vec(s.h));
  s = hnsa::zero_state(3);
  for (int i = 2; i >= 0; --i) s = hnsa::lstm_step(tape, p, hnsa::Direction::kBackward, xs[i], s);
  EXPECT_EQ(vec(out.backward[0]), vec(s.h));
}

TEST(EncodeUtteranceTest, SingleTokenAttention) {
  const auto params = tiny_params(6);
  hnsa::Rng rng(6);
  ad::Tape tape(false);
  const auto x = random_tensor({1, 8}, rng, -1, 1, false);
  const auto enc = hnsa::encode_utterance(tape, params, x);
  EXPECT_EQ(vec(enc.attention), std::vector<double>{1.0});
  const std::vector<ad::Tensor> steps{ad::reshape(tape, x, {8})};
  const auto h = hnsa::run_bilstm(tape, params.utterance_lstm, steps);
  EXPECT_EQ(vec(enc.representation), vec(ad::concat(tape, h.forward[0], h.backward[0])));
}

TEST(EncodeUtteranceTest, AttentionIsADistribution) {
  hnsa::Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto params = tiny_params(100 + trial);
    ad::Tape tape(false);
    const auto enc = hnsa::encode_utterance(tape, params, random_tensor({7, 8}, rng, -2, 2, false));
    ASSERT_EQ(enc.attention.size(), 7u);
    double total = 0.0;
    for (double a : enc.attention.values()) {
      EXPECT_GE(a, 0.0);
      total += a;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    EXPECT_EQ(enc.representation.size(), 8u);
  }
}

TEST(EncodeUtteranceTest, AblationUsesFinalStates) {
  const auto params = tiny_params(8, false);
  hnsa::Rng rng(8);
  ad::Tape tape(false);
  const auto x = random_tensor({5, 8}, rng, -1, 1, false);
  const auto enc = hnsa::encode_utterance(tape, params, x);
  std::vector<ad::Tensor> steps;
  for (std::size_t i = 0; i < 5; ++i) steps.push_back(ad::row(tape, x, i));
  const auto h = hnsa::run_bilstm(tape, params.utterance_lstm, steps);
  EXPECT_EQ(vec(enc.representation), vec(ad::concat(tape, h.forward[4], h.backward[0])));
  for (double a : enc.attention.values()) EXPECT_DOUBLE_EQ(a, 0.2);
}

TEST(EncodeUtteranceTest, AblationAgreesWithAttentionAtLengthOne) {
  auto with = tiny_params(9, true);
  auto without = with.clone();
  without.attention_enabled = false;
  hnsa::Rng rng(9);
  const auto x = random_tensor({1, 8}, rng, -1, 1, false);
  ad::Tape tape(false);
  EXPECT_EQ(vec(hnsa::encode_utterance(tape, with, x).representation),
            vec(hnsa::encode_utterance(tape, without, x).representation));
}

TEST(EncodeDialogTest, SingleUtteranceAndOrder) {
  const auto params = tiny_params(10);
  hnsa::Rng rng(10);
  ad::Tape tape(false);
  const std::vector<ad::Tensor> one{random_tensor({8}, rng, -1, 1, false)};
  const auto single = hnsa::encode_dialog(tape, params, one);
  const auto h = hnsa::run_bilstm(tape, params.dialog_lstm, one);
  EXPECT_EQ(vec(single), vec(ad::concat(tape, h.forward[0], h.backward[0])));

  std::vector<ad::Tensor> seq{random_tensor({8}, rng, -1, 1, false),
                              random_tensor({8}, rng, -1, 1, false),
                              random_tensor({8}, rng, -1, 1, false)};
  const auto a = vec(hnsa::encode_dialog(tape, params, seq));
  std::swap(seq[0], seq[2]);
  EXPECT_NE(a, vec(hnsa::encode_dialog(tape, params, seq)));
  EXPECT_THROW(hnsa::encode_dialog(tape, params, {}), hnsa::ValidationError);
}

TEST(EncodeDialogTest, FullWidthOutput) {
  hnsa::ModelDims dims;
  dims.embed_dim = 6;
  const auto params = hnsa::init_params(hnsa::testing::numbered_vocab(5), 2, 1, dims);
  ad::Tape tape(false);
  const std::vector<ad::Tensor> reps{ad::Tensor::zeros({512})};
  EXPECT_EQ(hnsa::encode_dialog(tape, params, reps).shape(), (ad::Shape{512}));
  EXPECT_EQ(params.classifier.shape(), (ad::Shape{2, 512}));
}

TEST(PredictTest, ZeroClassifierIsUniform) {
  const auto vocab = hnsa::testing::numbered_vocab(20);
  auto params = hnsa::init_params(vocab, 42, 3, tiny_dims());
  for (auto& v : params.classifier.mutable_values()) v = 0.0;
  const auto pred = hnsa::predict(params, tiny_dialog());
  ASSERT_EQ(pred.probs.size(), 42u);
  for (double p : pred.probs) EXPECT_NEAR(p, 1.0 / 42.0, 1e-15);
  EXPECT_NEAR(pred.probs[0], 0.0238, 1e-4);
  EXPECT_EQ(pred.label, 0u);
}

TEST(PredictTest, ArgmaxTies) {
  EXPECT_EQ(hnsa::argmax(std::vector<double>{0.1, 0.45, 0.45}), 1u);
  EXPECT_EQ(hnsa::argmax(std::vector<double>{0.5, 0.5}), 0u);
  EXPECT_THROW(hnsa::argmax(std::vector<double>{}), hnsa::ValidationError);
}

TEST(PredictTest, ProbabilitiesNormalizedAndPure) {
  hnsa::Rng rng(11);
  const auto params = tiny_params(11);
  const auto before = params.clone();
  for (int trial = 0; trial < 20; ++trial) {
    hnsa::EncodedDialog d;
    const auto n = 1 + rng.below(4);
    for (std::uint64_t u = 0; u < n; ++u) {
      std::vector<hnsa::TokenId> ids(1 + rng.below(6));
      for (auto& id : ids) id = rng.below(20);
      d.utterances.push_back(ids);
    }
    const auto pred = hnsa::predict(params, d);
    EXPECT_NEAR(std::accumulate(pred.probs.begin(), pred.probs.end(), 0.0), 1.0, 1e-6);
    EXPECT_EQ(pred.label, hnsa::argmax(pred.probs));
    EXPECT_EQ(pred.attention.size(), n);
    EXPECT_EQ(pred.probs, hnsa::predict(params, d).probs);
  }
  const auto a = params.named_tensors();
  const auto b = before.named_tensors();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(vec(a[i].tensor), vec(b[i].tensor));
  EXPECT_THROW(hnsa::predict(params, hnsa::EncodedDialog{}), hnsa::ValidationError);
}

TEST(InitTest, DeterministicWithForgetBias) {
  const auto vocab = hnsa::testing::numbered_vocab(20);
  const auto a = hnsa::init_params(vocab, 3, 5, tiny_dims());
  const auto b = hnsa::init_params(vocab, 3, 5, tiny_dims());
  const auto c = hnsa::init_params(vocab, 3, 6, tiny_dims());
  const auto ta = a.named_tensors(), tb = b.named_tensors(), tc = c.named_tensors();
  ASSERT_EQ(ta.size(), tb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    EXPECT_EQ(ta[i].name, tb[i].name);
    EXPECT_EQ(vec(ta[i].tensor), vec(tb[i].tensor));
    any_diff |= vec(ta[i].tensor) != vec(tc[i].tensor);
  }
  EXPECT_TRUE(any_diff);
  const std::size_t h = 4;
  for (const auto* dir : {&a.utterance_lstm.forward, &a.dialog_lstm.backward}) {
    for (std::size_t i = 0; i < 4 * h; ++i) {
      EXPECT_EQ(dir->bias[i], (i >= h && i < 2 * h) ? 1.0 : 0.0);
    }
  }
  EXPECT_EQ(a.classifier.shape(), (ad::Shape{3, 8}));
  EXPECT_EQ(ta.front().name, "embeddings");
  EXPECT_TRUE(ta.front().pad_row_frozen);
}

TEST(InitTest, GlorotBounds) {
  const auto p = hnsa::init_params(hnsa::testing::numbered_vocab(20), 3, 5, tiny_dims());
  for (const auto& named : p.named_tensors()) {
    if (named.tensor.rank() != 2 || named.name == "embeddings") continue;
    const double limit =
        std::sqrt(6.0 / static_cast<double>(named.tensor.dim(0) + named.tensor.dim(1)));
    for (double v : named.tensor.values()) EXPECT_LE(std::abs(v), limit) << named.name;
  }
  EXPECT_THROW(hnsa::allocate_params(10, 0, tiny_dims(), true), hnsa::ValidationError);
}

TEST(ModelGradientTest, TinyEndToEnd) {
  for (bool attention : {true, false}) {
    auto params = tiny_params(21, attention);
    const auto dialog = tiny_dialog();
    std::vector<ad::Tensor> tensors;
    for (auto& named : params.named_tensors()) tensors.push_back(named.tensor);
    const auto result = ad::grad_check(
        [&](ad::Tape& t) { return hnsa::dialog_loss(t, params, dialog, 1); }, tensors);
    EXPECT_LT(result.max_rel_error, 1e-3) << "attention=" << attention;
  }
}

TEST(ModelGradientTest, IndependentOracleOnClassifier) {
  auto params = tiny_params(22);
  const auto dialog = tiny_dialog();
  {
    ad::Tape tape;
    tape.backward(hnsa::dialog_loss(tape, params, dialog, 2));
  }
  const auto fd = numeric_gradient(
      [&] {
        ad::Tape t(false);
        return hnsa::dialog_loss(t, params, dialog, 2).item();
      },
      params.classifier);
  for (std::size_t i = 0; i < fd.size(); ++i) {
    EXPECT_LT(sym_rel_err(params.classifier.grad()[i], fd[i]), 1e-6);
  }
}

TEST(EncodeTokensTest, TruncatesAndMapsUnknowns) {
  const auto vocab = hnsa::Vocab::from_tokens({"a", "b"});
  hnsa::ModelDims dims;
  dims.max_utterance_len = 2;
  dims.max_dialog_len = 1;
  const auto d = hnsa::testing::make_dialog("x", "T", {{"a", "zzz", "b"}, {"b"}});
  const auto enc = hnsa::encode_tokens(vocab, d, dims);
  ASSERT_EQ(enc.utterances.size(), 1u);
  EXPECT_EQ(enc.utterances[0], (std::vector<hnsa::TokenId>{2, hnsa::Vocab::kUnk}));
}
