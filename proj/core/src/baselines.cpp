// SPDX-License-Identifier: Apache-2.0
#include "hnsa/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hnsa/error.hpp"
#include "hnsa/model.hpp"
#include "hnsa/rng.hpp"

namespace hnsa {

BowVector bow_features(const Dialog& dialog, const Vocab& vocab) {
  BowVector counts;
  for (const auto& u : dialog.utterances)
    for (const auto& t : u.tokens) counts[vocab.lookup(t)] += 1.0;
  return counts;
}

std::vector<double> LogisticModel::scores(const BowVector& x) const {
  std::vector<double> out(bias);
  for (std::size_t c = 0; c < n_classes; ++c) {
    const double* w = weights.data() + c * n_features;
    for (const auto& [id, count] : x) {
      if (id < n_features) out[c] += w[id] * count;
    }
  }
  return out;
}

std::vector<double> LogisticModel::probabilities(const BowVector& x) const {
  auto s = scores(x);
  const double mx = *std::max_element(s.begin(), s.end());
  double total = 0.0;
  for (auto& v : s) total += (v = std::exp(v - mx));
  for (auto& v : s) v /= total;
  return s;
}

std::size_t LogisticModel::predict(const BowVector& x) const { return argmax(scores(x)); }

namespace {

void check_inputs(std::span<const BowVector> features, std::span<const std::size_t> labels,
                  std::size_t n_classes) {
  if (features.size() != labels.size()) throw ValidationError("features and labels differ in length");
  if (features.empty()) throw ValidationError("no training examples");
  for (auto l : labels) {
    if (l >= n_classes) throw ValidationError("label " + std::to_string(l) + " out of range");
  }
}

// Objective and, when grad_w/grad_b are non-null, its gradient.
double objective(const LogisticModel& model, std::span<const BowVector> features,
                 std::span<const std::size_t> labels, double l2, std::vector<double>* grad_w,
                 std::vector<double>* grad_b) {
  const double n = static_cast<double>(features.size());
  if (grad_w) {
    grad_w->assign(model.weights.size(), 0.0);
    grad_b->assign(model.bias.size(), 0.0);
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto probs = model.probabilities(features[i]);
    loss -= std::log(std::max(probs[labels[i]], 1e-12));
    if (!grad_w) continue;
    for (std::size_t c = 0; c < model.n_classes; ++c) {
      const double delta = (probs[c] - (c == labels[i] ? 1.0 : 0.0)) / n;
      (*grad_b)[c] += delta;
      double* gw = grad_w->data() + c * model.n_features;
      for (const auto& [id, count] : features[i]) {
        if (id < model.n_features) gw[id] += delta * count;
      }
    }
  }
  double penalty = 0.0;
  for (double w : model.weights) penalty += w * w;
  if (grad_w) {
    for (std::size_t k = 0; k < model.weights.size(); ++k) (*grad_w)[k] += l2 * model.weights[k];
  }
  return loss / n + 0.5 * l2 * penalty;
}

}  // namespace

double logistic_objective(const LogisticModel& model, std::span<const BowVector> features,
                          std::span<const std::size_t> labels, double l2) {
  check_inputs(features, labels, model.n_classes);
  return objective(model, features, labels, l2, nullptr, nullptr);
}

LogisticModel train_logistic(std::span<const BowVector> features,
                             std::span<const std::size_t> labels, std::size_t n_classes,
                             std::size_t n_features, const LogisticConfig& config) {
  if (n_classes < 2) throw ValidationError("logistic regression needs at least 2 classes");
  check_inputs(features, labels, n_classes);
  if (std::set<std::size_t>(labels.begin(), labels.end()).size() < 2) {
    throw ValidationError("training labels contain a single class");
  }
  if (!(config.lr > 0.0) || config.l2 < 0.0) throw ValidationError("invalid logistic config");

  LogisticModel model;
  model.n_classes = n_classes;
  model.n_features = n_features;
  model.weights.resize(n_classes * n_features);
  model.bias.assign(n_classes, 0.0);
  Rng rng = substream(config.seed, "logistic");
  for (auto& w : model.weights) w = rng.uniform(-0.01, 0.01);

  std::vector<double> grad_w;
  std::vector<double> grad_b;
  double step = config.lr;
  double current = objective(model, features, labels, config.l2, &grad_w, &grad_b);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    LogisticModel candidate = model;
    double trial = current;
    step = std::min(config.lr, 2.0 * step);
    for (int halvings = 0; halvings < 60; ++halvings) {
      // Proximal step: the ridge term is applied in closed form so a large
      // l2 does not force tiny steps on the unpenalised bias.
      for (std::size_t k = 0; k < model.weights.size(); ++k) {
        const double smooth = grad_w[k] - config.l2 * model.weights[k];
        candidate.weights[k] = (model.weights[k] - step * smooth) / (1.0 + step * config.l2);
      }
      for (std::size_t c = 0; c < n_classes; ++c) candidate.bias[c] = model.bias[c] - step * grad_b[c];
      trial = objective(candidate, features, labels, config.l2, nullptr, nullptr);
      if (trial <= current) break;
      step /= 2.0;
    }
    if (!(trial <= current)) break;  // no descent possible at machine precision
    model = std::move(candidate);
    current = objective(model, features, labels, config.l2, &grad_w, &grad_b);
  }
  return model;
}

BowBaseline fit_bow_baseline(const Corpus& train, const LogisticConfig& config) {
  BowBaseline baseline{build_vocab(train), train.topic_set(), {}};
  std::vector<BowVector> features;
  std::vector<std::size_t> labels;
  for (const auto& d : train.dialogs()) {
    features.push_back(bow_features(d, baseline.vocab));
    const auto it = std::lower_bound(baseline.topics.begin(), baseline.topics.end(), d.topic);
    labels.push_back(static_cast<std::size_t>(it - baseline.topics.begin()));
  }
  baseline.model = train_logistic(features, labels, baseline.topics.size(), baseline.vocab.size(), config);
  return baseline;
}

EvalReport evaluate(const BowBaseline& baseline, const Corpus& corpus) {
  if (corpus.empty()) throw ValidationError("cannot evaluate on an empty corpus");
  std::vector<DialogRecord> records;
  for (const auto& d : corpus.dialogs()) {
    const auto x = bow_features(d, baseline.vocab);
    const auto probs = baseline.model.probabilities(x);
    const std::size_t label = baseline.model.predict(x);
    records.push_back({d.id, d.topic, baseline.topics[label], probs[label]});
  }
  return make_report(std::move(records));
}

double majority_baseline(const SplitCorpus& split) {
  if (split.test.empty() || split.train.empty()) return 0.0;
  std::map<std::string, std::size_t> counts;
  for (const auto& d : split.train.dialogs()) ++counts[d.topic];
  std::string majority;
  std::size_t best = 0;
  for (const auto& [topic, count] : counts) {
    if (count > best) {
      best = count;
      majority = topic;
    }
  }
  std::size_t hits = 0;
  for (const auto& d : split.test.dialogs()) hits += d.topic == majority ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(split.test.size());
}

}  // namespace hnsa
