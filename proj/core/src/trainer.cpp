// SPDX-License-Identifier: Apache-2.0
#include "hnsa/trainer.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hnsa/error.hpp"
#include "hnsa/rng.hpp"

namespace hnsa {
namespace {

struct LabeledDialog {
  EncodedDialog tokens;
  std::size_t label;
};

std::vector<LabeledDialog> encode_corpus(const Model& model, const Corpus& corpus) {
  std::vector<LabeledDialog> out;
  out.reserve(corpus.size());
  for (const auto& d : corpus.dialogs()) {
    const auto label = model.topic_index(d.topic);
    if (!label) throw ValidationError("topic '" + d.topic + "' of dialog '" + d.id + "' is unknown to the model");
    out.push_back({encode_tokens(model.vocab, d, model.dims), *label});
  }
  return out;
}

double accuracy(const ModelParams& params, const std::vector<LabeledDialog>& data) {
  std::size_t correct = 0;
  for (const auto& d : data) correct += predict(params, d.tokens).label == d.label ? 1 : 0;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ValidationError("lr0 must be positive");
  if (max_epochs == 0) throw ValidationError("max_epochs must be at least 1");
  if (plateau_patience_epochs == 0) throw ValidationError("plateau_patience_epochs must be at least 1");
  if (grad_clip_norm < 0.0) throw ValidationError("grad_clip_norm must be non-negative");
  if (min_lr < 0.0) throw ValidationError("min_lr must be non-negative");
}

AdamState AdamState::for_params(std::span<const NamedTensor> params) {
  AdamState state;
  for (const auto& p : params) {
    state.m.emplace_back(p.tensor.size(), 0.0);
    state.v.emplace_back(p.tensor.size(), 0.0);
  }
  return state;
}

void adam_step(std::span<const NamedTensor> params, AdamState& state, double lr) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw UsageError("adam_step: optimizer state does not match the parameter list");
  }
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericalError("non-finite gradient in " + p.name);
    }
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Tensor tensor = params[k].tensor;
    const auto grad = tensor.grad();
    auto values = tensor.mutable_values();
    auto& m = state.m[k];
    auto& v = state.v[k];
    const std::size_t skip = params[k].pad_row_frozen && tensor.rank() == 2 ? tensor.dim(1) : 0;
    for (std::size_t i = skip; i < values.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grad[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

double global_grad_norm(std::span<const NamedTensor> params) {
  double total = 0.0;
  for (const auto& p : params)
    for (double g : p.tensor.grad()) total += g * g;
  return std::sqrt(total);
}

double clip_gradients(std::span<const NamedTensor> params, double max_norm) {
  if (!(max_norm > 0.0)) throw UsageError("clip_gradients: max_norm must be positive");
  const double norm = global_grad_norm(params);
  if (!(norm > max_norm)) return 1.0;
  const double scale = max_norm / norm;
  for (const auto& p : params) {
    ad::Tensor t = p.tensor;
    for (auto& g : t.mutable_grad()) g *= scale;
  }
  return scale;
}

void zero_grads(std::span<const NamedTensor> params) {
  for (const auto& p : params) {
    ad::Tensor t = p.tensor;
    t.zero_grad();
  }
}

std::string history_csv(const TrainHistory& history) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,train_acc,dev_acc,lr,seconds\n";
  for (const auto& r : history.epochs) {
    os << r.epoch << ',' << r.train_loss << ',' << r.train_acc << ',' << r.dev_acc << ',' << r.lr
       << ',' << r.seconds << '\n';
  }
  return os.str();
}

TrainResult train(const Model& initial, const SplitCorpus& split, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (split.train.empty()) throw ValidationError("cannot train on an empty train split");

  const auto train_data = encode_corpus(initial, split.train);
  const auto dev_data = encode_corpus(initial, split.dev);

  Model current = initial.clone();
  const auto params = current.params.named_tensors();
  AdamState adam = AdamState::for_params(params);
  Rng shuffler = substream(config.seed, "shuffle");
  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{current.clone(), {}};
  double best_metric = -1.0;
  std::size_t stale_epochs = 0;
  double lr = config.lr0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    if (config.shuffle) shuffler.shuffle(order);

    double loss_total = 0.0;
    std::size_t correct = 0;
    for (auto idx : order) {
      const auto& example = train_data[idx];
      zero_grads(params);
      ad::Tape tape;
      const ForwardPass pass = forward(tape, current.params, example.tokens);
      const ad::Tensor loss = ad::nll_loss(tape, pass.logits, example.label);
      loss_total += loss.item();
      correct += argmax(pass.logits.values()) == example.label ? 1 : 0;
      tape.backward(loss);
      if (config.grad_clip_norm > 0.0) clip_gradients(params, config.grad_clip_norm);
      try {
        adam_step(params, adam, lr);
      } catch (const NumericalError& e) {
        ++result.history.skipped_steps;
        spdlog::warn("epoch {}: skipped update: {}", epoch, e.what());
      }
    }
    zero_grads(params);

    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    record.train_loss = loss_total / static_cast<double>(train_data.size());
    record.train_acc = 100.0 * static_cast<double>(correct) / static_cast<double>(train_data.size());
    record.dev_acc = dev_data.empty() ? record.train_acc : accuracy(current.params, dev_data);

    const bool improved = record.dev_acc > best_metric;
    if (improved) {
      best_metric = record.dev_acc;
      stale_epochs = 0;
      result.best = current.clone();
      result.history.best_epoch = epoch;
      result.history.best_dev_acc = record.dev_acc;
    } else if (config.lr_halve_on_plateau && ++stale_epochs >= config.plateau_patience_epochs) {
      lr /= 2.0;
      stale_epochs = 0;
      record.lr_halved = true;
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.epochs.push_back(record);
    spdlog::info("epoch {:>3}  loss {:.4f}  train {:.2f}%  dev {:.2f}%  lr {:.2e}{}", epoch,
                 record.train_loss, record.train_acc, record.dev_acc, record.lr,
                 record.lr_halved ? "  (halving lr)" : "");

    if (on_epoch && !on_epoch(result.best, record, improved)) break;
    if (lr < config.min_lr) break;
  }
  return result;
}

}  // namespace hnsa
