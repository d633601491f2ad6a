// SPDX-License-Identifier: Apache-2.0
//
// Throughput of the hot paths: one LSTM cell step, inference on a dialog and
// one full training step (forward, backward, clip, Adam).
#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "hnsa/model.hpp"
#include "hnsa/rng.hpp"
#include "hnsa/trainer.hpp"

namespace {

hnsa::ModelDims dims_for(std::int64_t width) {
  hnsa::ModelDims d;
  d.embed_dim = static_cast<std::size_t>(width);
  d.hidden_dim = static_cast<std::size_t>(width);
  d.attention_dim = static_cast<std::size_t>(width);
  return d;
}

hnsa::Vocab vocab_of(std::size_t total) {
  std::vector<std::string> tokens;
  for (std::size_t i = 2; i < total; ++i) tokens.push_back("w" + std::to_string(i));
  return hnsa::Vocab::from_tokens(tokens);
}

hnsa::EncodedDialog random_dialog(std::size_t utterances, std::size_t len, std::size_t vocab) {
  hnsa::Rng rng = hnsa::substream(1, "bench");
  hnsa::EncodedDialog d;
  for (std::size_t u = 0; u < utterances; ++u) {
    std::vector<hnsa::TokenId> ids(len);
    for (auto& id : ids) id = 2 + rng.below(vocab - 2);
    d.utterances.push_back(ids);
  }
  return d;
}

void BM_LstmStep(benchmark::State& state) {
  const auto dims = dims_for(state.range(0));
  const auto params = hnsa::init_params(vocab_of(50), 4, 0, dims);
  const auto x = hnsa::ad::Tensor::filled({dims.embed_dim}, 0.1);
  const auto s = hnsa::zero_state(dims.hidden_dim);
  for (auto _ : state) {
    hnsa::ad::Tape tape(false);
    auto next = hnsa::lstm_step(tape, params.utterance_lstm, hnsa::Direction::kForward, x, s);
    benchmark::DoNotOptimize(next.h);
  }
}
BENCHMARK(BM_LstmStep)->Arg(16)->Arg(64)->Arg(256);

void BM_Predict(benchmark::State& state) {
  const auto dims = dims_for(state.range(0));
  const auto params = hnsa::init_params(vocab_of(500), 8, 0, dims);
  const auto dialog = random_dialog(8, 16, 500);
  for (auto _ : state) benchmark::DoNotOptimize(hnsa::predict(params, dialog));
}
BENCHMARK(BM_Predict)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto dims = dims_for(state.range(0));
  auto params = hnsa::init_params(vocab_of(500), 8, 0, dims);
  const auto named = params.named_tensors();
  auto adam = hnsa::AdamState::for_params(named);
  const auto dialog = random_dialog(8, 16, 500);
  for (auto _ : state) {
    hnsa::zero_grads(named);
    hnsa::ad::Tape tape(true);
    const auto loss = hnsa::dialog_loss(tape, params, dialog, 3);
    tape.backward(loss);
    hnsa::clip_gradients(named, 5.0);
    hnsa::adam_step(named, adam, 1e-3);
  }
}
BENCHMARK(BM_TrainStep)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
