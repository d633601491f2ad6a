// SPDX-License-Identifier: Apache-2.0
//
// Hierarchical topic classifier over dialogs.
//
//   tokens --E--> BiLSTM --self-attention pooling--> utterance vector s_k
//   s_1..s_N --> BiLSTM --> [forward final : backward final] --W_f--> softmax
//
// With attention disabled (the HN ablation) the utterance vector is the
// concatenation of the utterance BiLSTM's final states instead.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hnsa/corpus.hpp"
#include "hnsa/embeddings.hpp"
#include "hnsa/tensor.hpp"

namespace hnsa {

struct ModelDims {
  std::size_t embed_dim = 300;
  std::size_t hidden_dim = 256;  // per direction
  std::size_t attention_dim = 128;
  std::size_t max_utterance_len = 128;  // tokens beyond this are dropped
  std::size_t max_dialog_len = 512;     // utterances beyond this are dropped

  bool operator==(const ModelDims&) const = default;
};

/// One direction of an LSTM. Gate rows are ordered input, forget, cell
/// candidate, output: w_ih is [4h, in], w_hh is [4h, h], bias is [4h].
struct LstmDirection {
  ad::Tensor w_ih;
  ad::Tensor w_hh;
  ad::Tensor bias;
};

struct BiLstmParams {
  LstmDirection forward;
  LstmDirection backward;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
};

/// score_i = w2 . tanh(w1 h_i + b1) + b2. w2 is stored as [attention_dim, 1].
/// b2 cannot change the softmax but is kept so the scoring head is a plain
/// affine map.
struct AttentionParams {
  ad::Tensor w1;  // [attention_dim, 2h]
  ad::Tensor b1;  // [attention_dim]
  ad::Tensor w2;  // [attention_dim, 1]
  ad::Tensor b2;  // [1]
};

struct NamedTensor {
  std::string name;
  ad::Tensor tensor;
  /// Row 0 is the padding embedding and must never be updated.
  bool pad_row_frozen = false;
};

struct ModelParams {
  EmbeddingMatrix embeddings;
  BiLstmParams utterance_lstm;
  AttentionParams attention;
  BiLstmParams dialog_lstm;
  ad::Tensor classifier;  // [n_topics, 2h], no bias
  bool attention_enabled = true;

  std::size_t n_topics() const { return classifier.dim(0); }
  /// Every trainable tensor in a fixed order (the checkpoint order). The
  /// attention head is included even when attention is disabled.
  std::vector<NamedTensor> named_tensors() const;
  /// Deep copy; the copy shares no storage with this.
  ModelParams clone() const;
};

/// Parameters plus the label and token spaces they were trained on.
struct Model {
  Vocab vocab;
  std::vector<std::string> topics;
  ModelDims dims;
  ModelParams params;

  std::optional<std::size_t> topic_index(std::string_view topic) const;
  Model clone() const;
};

/// Token ids per utterance, truncated to the dims' caps.
struct EncodedDialog {
  std::vector<std::vector<TokenId>> utterances;
};

EncodedDialog encode_tokens(const Vocab& vocab, const Dialog& dialog, const ModelDims& dims);

struct LstmState {
  ad::Tensor h;
  ad::Tensor c;
};

enum class Direction { kForward, kBackward };

LstmState zero_state(std::size_t hidden_dim);

/// i, f, o = sigmoid; g = tanh; c' = f*c + i*g; h' = o*tanh(c').
/// Throws ShapeError if x or the state does not fit the parameters.
LstmState lstm_step(ad::Tape& tape, const BiLstmParams& params, Direction direction,
                    const ad::Tensor& x, const LstmState& state);

/// Per-position hidden states of both directions, indexed by input
/// position. `backward[0]` is the backward direction's final state.
struct BiLstmOutput {
  std::vector<ad::Tensor> forward;
  std::vector<ad::Tensor> backward;
};

BiLstmOutput run_bilstm(ad::Tape& tape, const BiLstmParams& params,
                        std::span<const ad::Tensor> inputs);

struct UtteranceEncoding {
  ad::Tensor representation;  // [2h]
  ad::Tensor attention;       // [L], sums to 1
};

/// token_vectors is [L, embed_dim]. Throws ValidationError for L == 0.
UtteranceEncoding encode_utterance(ad::Tape& tape, const ModelParams& params,
                                   const ad::Tensor& token_vectors);

/// Forward final state concatenated with the backward final state, [2h].
/// Throws ValidationError for an empty sequence.
ad::Tensor encode_dialog(ad::Tape& tape, const ModelParams& params,
                         std::span<const ad::Tensor> utterance_reps);

struct ForwardPass {
  ad::Tensor logits;  // [n_topics]
  std::vector<ad::Tensor> attention;
};

ForwardPass forward(ad::Tape& tape, const ModelParams& params, const EncodedDialog& dialog);

/// Negative log likelihood of `label` for one dialog.
ad::Tensor dialog_loss(ad::Tape& tape, const ModelParams& params, const EncodedDialog& dialog,
                       std::size_t label);

struct TopicPrediction {
  std::vector<double> probs;
  std::size_t label = 0;
  std::vector<std::vector<double>> attention;

  double confidence() const { return probs.at(label); }
};

/// Index of the maximum; the lowest index wins ties.
std::size_t argmax(std::span<const double> values);

TopicPrediction predict(const ModelParams& params, const EncodedDialog& dialog);
TopicPrediction predict(const Model& model, const Dialog& dialog);

/// Correctly shaped parameters, all zero (forget-gate bias slices 1.0).
ModelParams allocate_params(std::size_t vocab_size, std::size_t n_topics, const ModelDims& dims,
                            bool attention_enabled);

/// Glorot-uniform weights (+-sqrt(6 / (fan_in + fan_out))) from the seed's
/// "init" substream, zero biases except forget-gate slices = 1.0. The
/// embedding table is taken from `embeddings` when given, otherwise drawn by
/// random_embeddings(vocab, dims.embed_dim, seed).
ModelParams init_params(const Vocab& vocab, std::size_t n_topics, std::uint64_t seed,
                        const ModelDims& dims, bool attention_enabled = true,
                        std::optional<EmbeddingMatrix> embeddings = std::nullopt);

/// Rounds every parameter through 32-bit float, in place.
void quantize_to_f32(ModelParams& params);

}  // namespace hnsa
