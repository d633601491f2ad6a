// SPDX-License-Identifier: Apache-2.0
#include "hnsa/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hnsa/error.hpp"
#include "json.hpp"

namespace hnsa {

EvalReport make_report(std::vector<DialogRecord> records) {
  EvalReport report;
  report.n_total = records.size();
  for (const auto& r : records) report.n_correct += r.gold == r.predicted ? 1 : 0;
  report.accuracy = report.n_total == 0 ? 0.0
                                        : 100.0 * static_cast<double>(report.n_correct) /
                                              static_cast<double>(report.n_total);
  report.records = std::move(records);
  return report;
}

EvalReport evaluate(const Model& model, const Corpus& corpus) {
  if (corpus.empty()) throw ValidationError("cannot evaluate on an empty corpus");
  std::vector<DialogRecord> records;
  records.reserve(corpus.size());
  for (const auto& d : corpus.dialogs()) {
    if (!model.topic_index(d.topic)) {
      throw ValidationError("topic '" + d.topic + "' of dialog '" + d.id + "' is unknown to the model");
    }
    const TopicPrediction p = predict(model, d);
    records.push_back({d.id, d.topic, model.topics.at(p.label), p.confidence()});
  }
  return make_report(std::move(records));
}

std::vector<std::vector<double>> ConfusionMatrix::normalized() const {
  std::vector<std::vector<double>> out(counts.size());
  for (std::size_t r = 0; r < counts.size(); ++r) {
    std::size_t support = 0;
    for (auto c : counts[r]) support += c;
    out[r].assign(counts[r].size(), 0.0);
    if (support == 0) continue;
    for (std::size_t c = 0; c < counts[r].size(); ++c) {
      out[r][c] = static_cast<double>(counts[r][c]) / static_cast<double>(support);
    }
  }
  return out;
}

std::vector<bool> ConfusionMatrix::zero_support() const {
  std::vector<bool> out;
  for (const auto& row : counts) {
    out.push_back(std::all_of(row.begin(), row.end(), [](std::size_t c) { return c == 0; }));
  }
  return out;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts)
    for (auto c : row) n += c;
  return n;
}

std::size_t ConfusionMatrix::diagonal() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
  return n;
}

ConfusionMatrix confusion_from_report(const EvalReport& report, std::vector<std::string> labels) {
  ConfusionMatrix m;
  m.labels = std::move(labels);
  m.counts.assign(m.labels.size(), std::vector<std::size_t>(m.labels.size(), 0));
  const auto index = [&](const std::string& label) {
    const auto it = std::find(m.labels.begin(), m.labels.end(), label);
    if (it == m.labels.end()) throw ValidationError("label '" + label + "' not in confusion labels");
    return static_cast<std::size_t>(it - m.labels.begin());
  };
  for (const auto& r : report.records) ++m.counts[index(r.gold)][index(r.predicted)];
  return m;
}

ConfusionMatrix confusion(const Model& model, const Corpus& corpus) {
  return confusion_from_report(evaluate(model, corpus), model.topics);
}

std::size_t prefix_length(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ValidationError("sub-dialog fraction must lie in (0, 1]");
  }
  const auto rounded = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
  return std::min(n, std::max<std::size_t>(1, rounded));
}

Dialog make_subdialog(const Dialog& dialog, double fraction) {
  const std::size_t len = prefix_length(dialog.utterances.size(), fraction);
  Dialog out{dialog.id, dialog.topic, {}};
  out.utterances.assign(dialog.utterances.begin(),
                        dialog.utterances.begin() + static_cast<std::ptrdiff_t>(len));
  return out;
}

std::vector<double> default_fractions() {
  return {1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0};
}

OnlineCurve online_eval(const Model& model, const Corpus& corpus, std::span<const double> fractions) {
  std::vector<double> fs(fractions.begin(), fractions.end());
  for (double f : fs) prefix_length(1, f);
  if (std::find(fs.begin(), fs.end(), 1.0) == fs.end()) fs.push_back(1.0);

  const EvalReport full = evaluate(model, corpus);
  OnlineCurve curve;
  for (double f : fs) {
    OnlinePoint point;
    point.fraction = f;
    std::size_t utterances = 0;
    double acc = full.accuracy;
    if (f == 1.0) {
      for (const auto& d : corpus.dialogs()) utterances += d.utterances.size();
    } else {
      std::vector<Dialog> prefixes;
      prefixes.reserve(corpus.size());
      for (const auto& d : corpus.dialogs()) {
        prefixes.push_back(make_subdialog(d, f));
        utterances += prefixes.back().utterances.size();
      }
      acc = evaluate(model, Corpus(std::move(prefixes))).accuracy;
    }
    point.absolute_accuracy = acc;
    point.mean_utterances = static_cast<double>(utterances) / static_cast<double>(corpus.size());
    point.relative_accuracy = full.accuracy > 0.0 ? acc / full.accuracy
                                                  : std::numeric_limits<double>::quiet_NaN();
    curve.points.push_back(point);
  }
  return curve;
}

OnlineCurve online_eval(const Model& model, const Corpus& corpus) {
  const auto fs = default_fractions();
  return online_eval(model, corpus, fs);
}

namespace {

// Quotes a CSV field when it contains a delimiter, quote or newline.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string report_csv(const EvalReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "dialog_id,gold,pred,confidence\n";
  for (const auto& r : report.records) {
    os << csv_field(r.id) << ',' << csv_field(r.gold) << ',' << csv_field(r.predicted) << ','
       << r.confidence << '\n';
  }
  return os.str();
}

std::string report_summary_json(const EvalReport& report) {
  const nlohmann::json j = {
      {"accuracy", report.accuracy}, {"n_correct", report.n_correct}, {"n_total", report.n_total}};
  return j.dump();
}

std::string confusion_csv(const ConfusionMatrix& matrix, bool normalized) {
  std::ostringstream os;
  os.precision(17);
  os << "target\\predicted";
  for (const auto& l : matrix.labels) os << ',' << csv_field(l);
  os << ",zero_support\n";
  const auto norm = matrix.normalized();
  const auto empty = matrix.zero_support();
  for (std::size_t r = 0; r < matrix.labels.size(); ++r) {
    os << csv_field(matrix.labels[r]);
    for (std::size_t c = 0; c < matrix.labels.size(); ++c) {
      os << ',';
      if (normalized) {
        os << norm[r][c];
      } else {
        os << matrix.counts[r][c];
      }
    }
    os << ',' << (empty[r] ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string online_csv(const OnlineCurve& curve) {
  std::ostringstream os;
  os.precision(17);
  os << "fraction,n_utterances_mean,absolute_acc,relative_acc\n";
  for (const auto& p : curve.points) {
    os << p.fraction << ',' << p.mean_utterances << ',' << p.absolute_accuracy << ',';
    if (std::isnan(p.relative_accuracy)) {
      os << "nan";
    } else {
      os << p.relative_accuracy;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace hnsa
