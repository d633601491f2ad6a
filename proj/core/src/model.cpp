// SPDX-License-Identifier: Apache-2.0
#include "hnsa/model.hpp"

#include <algorithm>
#include <cmath>

#include "hnsa/error.hpp"
#include "hnsa/rng.hpp"

namespace hnsa {
namespace {

LstmDirection allocate_direction(std::size_t input_dim, std::size_t hidden_dim) {
  LstmDirection d{ad::Tensor::zeros({4 * hidden_dim, input_dim}, true),
                  ad::Tensor::zeros({4 * hidden_dim, hidden_dim}, true),
                  ad::Tensor::zeros({4 * hidden_dim}, true)};
  auto bias = d.bias.mutable_values();
  std::fill(bias.begin() + static_cast<std::ptrdiff_t>(hidden_dim),
            bias.begin() + static_cast<std::ptrdiff_t>(2 * hidden_dim), 1.0);
  return d;
}

BiLstmParams allocate_bilstm(std::size_t input_dim, std::size_t hidden_dim) {
  return BiLstmParams{allocate_direction(input_dim, hidden_dim),
                      allocate_direction(input_dim, hidden_dim), input_dim, hidden_dim};
}

void glorot(ad::Tensor& w, Rng& rng) {
  const double fan_out = static_cast<double>(w.dim(0));
  const double fan_in = static_cast<double>(w.dim(1));
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : w.mutable_values()) v = rng.uniform(-limit, limit);
}

LstmDirection clone_direction(const LstmDirection& d) {
  return LstmDirection{d.w_ih.clone(), d.w_hh.clone(), d.bias.clone()};
}

BiLstmParams clone_bilstm(const BiLstmParams& p) {
  return BiLstmParams{clone_direction(p.forward), clone_direction(p.backward), p.input_dim,
                      p.hidden_dim};
}

void append_lstm(std::vector<NamedTensor>& out, const std::string& prefix,
                 const BiLstmParams& p) {
  out.push_back({prefix + ".forward.w_ih", p.forward.w_ih});
  out.push_back({prefix + ".forward.w_hh", p.forward.w_hh});
  out.push_back({prefix + ".forward.bias", p.forward.bias});
  out.push_back({prefix + ".backward.w_ih", p.backward.w_ih});
  out.push_back({prefix + ".backward.w_hh", p.backward.w_hh});
  out.push_back({prefix + ".backward.bias", p.backward.bias});
}

}  // namespace

std::vector<NamedTensor> ModelParams::named_tensors() const {
  std::vector<NamedTensor> out;
  out.push_back({"embeddings", embeddings.table, true});
  append_lstm(out, "utterance_lstm", utterance_lstm);
  out.push_back({"attention.w1", attention.w1});
  out.push_back({"attention.b1", attention.b1});
  out.push_back({"attention.w2", attention.w2});
  out.push_back({"attention.b2", attention.b2});
  append_lstm(out, "dialog_lstm", dialog_lstm);
  out.push_back({"classifier", classifier});
  return out;
}

ModelParams ModelParams::clone() const {
  ModelParams copy;
  copy.embeddings = EmbeddingMatrix{embeddings.table.clone(), embeddings.coverage};
  copy.utterance_lstm = clone_bilstm(utterance_lstm);
  copy.attention = AttentionParams{attention.w1.clone(), attention.b1.clone(),
                                   attention.w2.clone(), attention.b2.clone()};
  copy.dialog_lstm = clone_bilstm(dialog_lstm);
  copy.classifier = classifier.clone();
  copy.attention_enabled = attention_enabled;
  return copy;
}

std::optional<std::size_t> Model::topic_index(std::string_view topic) const {
  const auto it = std::lower_bound(topics.begin(), topics.end(), topic);
  if (it != topics.end() && *it == topic) return static_cast<std::size_t>(it - topics.begin());
  // Labels are normally sorted; fall back to a scan for hand-built models.
  const auto found = std::find(topics.begin(), topics.end(), topic);
  if (found == topics.end()) return std::nullopt;
  return static_cast<std::size_t>(found - topics.begin());
}

Model Model::clone() const { return Model{vocab, topics, dims, params.clone()}; }

EncodedDialog encode_tokens(const Vocab& vocab, const Dialog& dialog, const ModelDims& dims) {
  EncodedDialog out;
  const std::size_t n = std::min(dialog.utterances.size(), dims.max_dialog_len);
  out.utterances.reserve(n);
  for (std::size_t u = 0; u < n; ++u) {
    const auto& tokens = dialog.utterances[u].tokens;
    const std::size_t len = std::min(tokens.size(), dims.max_utterance_len);
    std::vector<TokenId> ids(len);
    for (std::size_t i = 0; i < len; ++i) ids[i] = vocab.lookup(tokens[i]);
    out.utterances.push_back(std::move(ids));
  }
  return out;
}

LstmState zero_state(std::size_t hidden_dim) {
  return LstmState{ad::Tensor::zeros({hidden_dim}), ad::Tensor::zeros({hidden_dim})};
}

LstmState lstm_step(ad::Tape& tape, const BiLstmParams& params, Direction direction,
                    const ad::Tensor& x, const LstmState& state) {
  const auto& p = direction == Direction::kForward ? params.forward : params.backward;
  const std::size_t h = params.hidden_dim;
  if (x.rank() != 1 || x.size() != params.input_dim) {
    throw ShapeError("lstm_step: input shape " + ad::shape_string(x.shape()) + " vs input_dim " +
                     std::to_string(params.input_dim));
  }
  if (state.h.size() != h || state.c.size() != h) {
    throw ShapeError("lstm_step: state does not match hidden_dim " + std::to_string(h));
  }
  const ad::Tensor z =
      ad::add(tape, ad::add(tape, ad::matmul(tape, p.w_ih, x), ad::matmul(tape, p.w_hh, state.h)),
              p.bias);
  const ad::Tensor i = ad::sigmoid(tape, ad::slice(tape, z, 0, h));
  const ad::Tensor f = ad::sigmoid(tape, ad::slice(tape, z, h, h));
  const ad::Tensor g = ad::tanh(tape, ad::slice(tape, z, 2 * h, h));
  const ad::Tensor o = ad::sigmoid(tape, ad::slice(tape, z, 3 * h, h));
  const ad::Tensor c = ad::add(tape, ad::mul(tape, f, state.c), ad::mul(tape, i, g));
  return LstmState{ad::mul(tape, o, ad::tanh(tape, c)), c};
}

BiLstmOutput run_bilstm(ad::Tape& tape, const BiLstmParams& params,
                        std::span<const ad::Tensor> inputs) {
  const std::size_t n = inputs.size();
  BiLstmOutput out;
  out.forward.resize(n);
  out.backward.resize(n);
  LstmState state = zero_state(params.hidden_dim);
  for (std::size_t t = 0; t < n; ++t) {
    state = lstm_step(tape, params, Direction::kForward, inputs[t], state);
    out.forward[t] = state.h;
  }
  state = zero_state(params.hidden_dim);
  for (std::size_t t = n; t-- > 0;) {
    state = lstm_step(tape, params, Direction::kBackward, inputs[t], state);
    out.backward[t] = state.h;
  }
  return out;
}

UtteranceEncoding encode_utterance(ad::Tape& tape, const ModelParams& params,
                                   const ad::Tensor& token_vectors) {
  if (!token_vectors.defined() || token_vectors.rank() != 2) {
    throw ValidationError("encode_utterance expects an [L, d] matrix of token vectors");
  }
  const std::size_t len = token_vectors.dim(0);
  std::vector<ad::Tensor> steps;
  steps.reserve(len);
  for (std::size_t i = 0; i < len; ++i) steps.push_back(ad::row(tape, token_vectors, i));
  const BiLstmOutput states = run_bilstm(tape, params.utterance_lstm, steps);

  if (!params.attention_enabled) {
    return UtteranceEncoding{ad::concat(tape, states.forward.back(), states.backward.front()),
                             ad::Tensor::filled({len}, 1.0 / static_cast<double>(len))};
  }

  std::vector<ad::Tensor> rows;
  rows.reserve(len);
  for (std::size_t i = 0; i < len; ++i) {
    rows.push_back(ad::concat(tape, states.forward[i], states.backward[i]));
  }
  const ad::Tensor hidden = ad::stack(tape, rows);  // [L, 2h]
  const auto& att = params.attention;
  const ad::Tensor projected =
      ad::tanh(tape, ad::add(tape, ad::matmul(tape, hidden, ad::transpose(tape, att.w1)), att.b1));
  const ad::Tensor scores =
      ad::reshape(tape, ad::add(tape, ad::matmul(tape, projected, att.w2), att.b2), {len});
  const ad::Tensor weights = ad::softmax(tape, scores);
  return UtteranceEncoding{ad::matmul(tape, weights, hidden), weights};
}

ad::Tensor encode_dialog(ad::Tape& tape, const ModelParams& params,
                         std::span<const ad::Tensor> utterance_reps) {
  if (utterance_reps.empty()) throw ValidationError("encode_dialog of an empty dialog");
  const BiLstmOutput states = run_bilstm(tape, params.dialog_lstm, utterance_reps);
  return ad::concat(tape, states.forward.back(), states.backward.front());
}

ForwardPass forward(ad::Tape& tape, const ModelParams& params, const EncodedDialog& dialog) {
  if (dialog.utterances.empty()) throw ValidationError("cannot classify a dialog with no utterances");
  ForwardPass pass;
  std::vector<ad::Tensor> reps;
  reps.reserve(dialog.utterances.size());
  for (const auto& ids : dialog.utterances) {
    auto enc = encode_utterance(tape, params, lookup(tape, params.embeddings, ids));
    reps.push_back(std::move(enc.representation));
    pass.attention.push_back(std::move(enc.attention));
  }
  pass.logits = ad::matmul(tape, params.classifier, encode_dialog(tape, params, reps));
  return pass;
}

ad::Tensor dialog_loss(ad::Tape& tape, const ModelParams& params, const EncodedDialog& dialog,
                       std::size_t label) {
  return ad::nll_loss(tape, forward(tape, params, dialog).logits, label);
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ValidationError("argmax of an empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

TopicPrediction predict(const ModelParams& params, const EncodedDialog& dialog) {
  ad::Tape tape(false);
  const ForwardPass pass = forward(tape, params, dialog);
  const ad::Tensor probs = ad::softmax(tape, pass.logits);
  TopicPrediction out;
  out.probs.assign(probs.values().begin(), probs.values().end());
  out.label = argmax(out.probs);
  for (const auto& a : pass.attention) out.attention.emplace_back(a.values().begin(), a.values().end());
  return out;
}

TopicPrediction predict(const Model& model, const Dialog& dialog) {
  return predict(model.params, encode_tokens(model.vocab, dialog, model.dims));
}

ModelParams allocate_params(std::size_t vocab_size, std::size_t n_topics, const ModelDims& dims,
                            bool attention_enabled) {
  if (vocab_size < 2 || n_topics == 0 || dims.embed_dim == 0 || dims.hidden_dim == 0 ||
      dims.attention_dim == 0 || dims.max_utterance_len == 0 || dims.max_dialog_len == 0) {
    throw ValidationError("model dimensions must be positive");
  }
  const std::size_t h2 = 2 * dims.hidden_dim;
  ModelParams p;
  p.embeddings.table = ad::Tensor::zeros({vocab_size, dims.embed_dim}, true);
  p.utterance_lstm = allocate_bilstm(dims.embed_dim, dims.hidden_dim);
  p.attention = AttentionParams{ad::Tensor::zeros({dims.attention_dim, h2}, true),
                                ad::Tensor::zeros({dims.attention_dim}, true),
                                ad::Tensor::zeros({dims.attention_dim, 1}, true),
                                ad::Tensor::zeros({1}, true)};
  p.dialog_lstm = allocate_bilstm(h2, dims.hidden_dim);
  p.classifier = ad::Tensor::zeros({n_topics, h2}, true);
  p.attention_enabled = attention_enabled;
  return p;
}

ModelParams init_params(const Vocab& vocab, std::size_t n_topics, std::uint64_t seed,
                        const ModelDims& dims, bool attention_enabled,
                        std::optional<EmbeddingMatrix> embeddings) {
  ModelParams p = allocate_params(vocab.size(), n_topics, dims, attention_enabled);
  if (embeddings) {
    if (embeddings->vocab_size() != vocab.size() || embeddings->dim() != dims.embed_dim) {
      throw ValidationError("embedding matrix does not match vocabulary size and embed_dim");
    }
    p.embeddings = EmbeddingMatrix{embeddings->table.clone(), embeddings->coverage};
  } else {
    p.embeddings = random_embeddings(vocab, dims.embed_dim, seed);
  }
  Rng rng = substream(seed, "init");
  for (auto& named : p.named_tensors()) {
    if (named.name == "embeddings" || named.tensor.rank() != 2) continue;
    glorot(named.tensor, rng);
  }
  return p;
}

void quantize_to_f32(ModelParams& params) {
  for (auto& named : params.named_tensors()) {
    for (auto& v : named.tensor.mutable_values()) v = static_cast<double>(static_cast<float>(v));
  }
}

}  // namespace hnsa
