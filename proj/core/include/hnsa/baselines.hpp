// SPDX-License-Identifier: Apache-2.0
//
// Comparators for the hierarchical model: bag-of-words multinomial logistic
// regression and the majority-class predictor.
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hnsa/corpus.hpp"
#include "hnsa/evaluator.hpp"

namespace hnsa {

/// Raw token counts over a whole dialog, keyed by token id.
using BowVector = std::map<TokenId, double>;

/// Unknown tokens are counted under Vocab::kUnk.
BowVector bow_features(const Dialog& dialog, const Vocab& vocab);

struct LogisticConfig {
  double l2 = 1e-4;
  double lr = 0.1;
  std::size_t epochs = 500;
  std::uint64_t seed = 0;
};

struct LogisticModel {
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
  std::vector<double> weights;  // [n_classes, n_features], row-major
  std::vector<double> bias;     // [n_classes]

  std::vector<double> scores(const BowVector& x) const;
  std::vector<double> probabilities(const BowVector& x) const;
  /// Ties go to the lowest class index.
  std::size_t predict(const BowVector& x) const;
};

/// Mean NLL plus (l2 / 2) * ||weights||^2; the bias is not penalised.
double logistic_objective(const LogisticModel& model, std::span<const BowVector> features,
                          std::span<const std::size_t> labels, double l2);

/// Full-batch proximal gradient descent on logistic_objective from small seeded
/// weights. Each epoch starts from step min(lr, 2 * last accepted step) and
/// halves it until the objective does not increase, so raw counts cannot
/// make the iteration diverge. Throws ValidationError when n_classes < 2,
/// the labels use a single class, or inputs are inconsistent.
LogisticModel train_logistic(std::span<const BowVector> features,
                             std::span<const std::size_t> labels, std::size_t n_classes,
                             std::size_t n_features, const LogisticConfig& config);

/// Vocabulary and label space fitted on a train corpus, plus the classifier.
struct BowBaseline {
  Vocab vocab;
  std::vector<std::string> topics;
  LogisticModel model;
};

BowBaseline fit_bow_baseline(const Corpus& train, const LogisticConfig& config);
/// Same report schema as the neural evaluator. Topics unseen in training are
/// scored as errors.
EvalReport evaluate(const BowBaseline& baseline, const Corpus& corpus);

/// Accuracy (percent) on split.test of always answering the most frequent
/// train topic (ties: lexicographically first). 0 for an empty test part.
double majority_baseline(const SplitCorpus& split);

}  // namespace hnsa
