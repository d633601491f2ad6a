// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hnsa/corpus.hpp"
#include "hnsa/model.hpp"

namespace hnsa {

struct TrainConfig {
  double lr0 = 1e-3;
  std::size_t max_epochs = 30;
  bool lr_halve_on_plateau = true;
  std::size_t plateau_patience_epochs = 1;
  double min_lr = 1e-5;
  double grad_clip_norm = 5.0;  // 0 disables clipping
  std::uint64_t seed = 0;
  bool shuffle = true;

  /// Throws ValidationError for lr0 <= 0, max_epochs == 0, patience == 0 or
  /// a negative clip norm.
  void validate() const;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState for_params(std::span<const NamedTensor> params);
};

/// Bias-corrected Adam update from the grads held by each tensor. Rows
/// flagged pad_row_frozen keep row 0 untouched. Throws NumericalError, with
/// params and state unchanged, if any grad is not finite.
void adam_step(std::span<const NamedTensor> params, AdamState& state, double lr);

double global_grad_norm(std::span<const NamedTensor> params);

/// Rescales all grads by max_norm / norm when the global L2 norm exceeds
/// max_norm. Returns the factor applied (1.0 when unchanged).
double clip_gradients(std::span<const NamedTensor> params, double max_norm);

void zero_grads(std::span<const NamedTensor> params);

struct EpochRecord {
  std::size_t epoch = 0;     // 1-based
  double train_loss = 0.0;   // mean NLL over the epoch's steps
  double train_acc = 0.0;    // percent, predictions taken before each step
  double dev_acc = 0.0;      // percent
  double lr = 0.0;           // in effect during the epoch
  double seconds = 0.0;
  bool lr_halved = false;    // plateau detected at the end of this epoch
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_dev_acc = 0.0;
  std::size_t skipped_steps = 0;
};

/// Header: epoch,train_loss,train_acc,dev_acc,lr,seconds
std::string history_csv(const TrainHistory& history);

struct TrainResult {
  Model best;
  TrainHistory history;
};

/// Called after every epoch with the best model so far. Return false to
/// stop training early.
using EpochCallback =
    std::function<bool(const Model& best, const EpochRecord& record, bool improved)>;

/// One Adam step per train dialog in seeded shuffled order. After each
/// epoch the dev accuracy (train accuracy when dev is empty) is compared to
/// the best so far; an epoch that is not strictly better counts towards the
/// plateau, and `plateau_patience_epochs` such epochs in a row halve the
/// learning rate. Stops after max_epochs or once the rate drops below
/// min_lr. Returns a snapshot of the best-scoring epoch.
/// Throws ValidationError for an empty train split or labels unknown to the
/// model.
TrainResult train(const Model& initial, const SplitCorpus& split, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace hnsa
