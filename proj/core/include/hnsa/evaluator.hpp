// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hnsa/corpus.hpp"
#include "hnsa/model.hpp"

namespace hnsa {

struct DialogRecord {
  std::string id;
  std::string gold;
  std::string predicted;
  double confidence = 0.0;
};

struct EvalReport {
  double accuracy = 0.0;  // percent, 100 * n_correct / n_total
  std::size_t n_correct = 0;
  std::size_t n_total = 0;
  std::vector<DialogRecord> records;
};

/// Greedy argmax per dialog, ties to the lowest class index. Throws
/// ValidationError for an empty corpus or a gold label the model lacks.
EvalReport evaluate(const Model& model, const Corpus& corpus);

/// Builds a report from (gold, predicted, confidence) triples.
EvalReport make_report(std::vector<DialogRecord> records);

/// counts[gold][predicted]; rows follow `labels`.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> counts;

  /// Each row divided by its sum. Rows without support stay all-zero.
  std::vector<std::vector<double>> normalized() const;
  std::vector<bool> zero_support() const;
  std::size_t total() const;
  std::size_t diagonal() const;
};

ConfusionMatrix confusion(const Model& model, const Corpus& corpus);
/// Throws ValidationError when a record names a label outside `labels`.
ConfusionMatrix confusion_from_report(const EvalReport& report, std::vector<std::string> labels);

/// max(1, round_half_up(fraction * n)), capped at n. Throws ValidationError
/// unless 0 < fraction <= 1.
std::size_t prefix_length(std::size_t n, double fraction);

/// The first prefix_length(N, fraction) utterances, same id and topic.
Dialog make_subdialog(const Dialog& dialog, double fraction);

/// 1/32, 1/16, 1/8, 1/4, 1/2, 1.
std::vector<double> default_fractions();

struct OnlinePoint {
  double fraction = 0.0;
  double mean_utterances = 0.0;
  double absolute_accuracy = 0.0;  // percent
  double relative_accuracy = 0.0;  // absolute / absolute at fraction 1; NaN if that is 0
};

struct OnlineCurve {
  std::vector<OnlinePoint> points;
};

/// Evaluates every prefix corpus. Fraction 1 is always evaluated (appended
/// if missing) and goes through evaluate() on the unmodified dialogs.
OnlineCurve online_eval(const Model& model, const Corpus& corpus,
                        std::span<const double> fractions);
OnlineCurve online_eval(const Model& model, const Corpus& corpus);

/// dialog_id,gold,pred,confidence
std::string report_csv(const EvalReport& report);
/// {"accuracy", "n_correct", "n_total"}.
std::string report_summary_json(const EvalReport& report);
/// Header row and column are the labels. `normalized` selects row-normalized
/// values; a trailing zero_support column flags empty rows.
std::string confusion_csv(const ConfusionMatrix& matrix, bool normalized);
/// fraction,n_utterances_mean,absolute_acc,relative_acc
std::string online_csv(const OnlineCurve& curve);

}  // namespace hnsa
