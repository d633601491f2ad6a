// SPDX-License-Identifier: Apache-2.0
#include "hnsa/corpus.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "hnsa/error.hpp"
#include "hnsa/hashing.hpp"
#include "hnsa/rng.hpp"
#include "json.hpp"

namespace hnsa {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Corpus

Corpus::Corpus(std::vector<Dialog> dialogs) : dialogs_(std::move(dialogs)) {
  std::unordered_set<std::string> ids;
  std::set<std::string> topics;
  for (const auto& d : dialogs_) {
    if (d.topic.empty()) throw ValidationError("dialog '" + d.id + "' has an empty topic");
    if (d.utterances.empty()) throw ValidationError("dialog '" + d.id + "' has no utterances");
    for (const auto& u : d.utterances) {
      if (u.tokens.empty()) throw ValidationError("dialog '" + d.id + "' has an empty utterance");
    }
    if (!ids.insert(d.id).second) throw ValidationError("duplicate dialog id '" + d.id + "'");
    topics.insert(d.topic);
  }
  topics_.assign(topics.begin(), topics.end());
}

// ---------------------------------------------------------------------------
// Tokenizer

namespace {

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_kept_symbol(char c) { return c == '#' || c == '?'; }

void push_word(std::string_view word, std::vector<std::string>& out) {
  std::vector<std::string> trailing;
  while (!word.empty() && is_punct(word.front())) {
    if (is_kept_symbol(word.front())) out.emplace_back(1, word.front());
    word.remove_prefix(1);
  }
  while (!word.empty() && is_punct(word.back())) {
    if (is_kept_symbol(word.back())) trailing.emplace_back(1, word.back());
    word.remove_suffix(1);
  }
  if (!word.empty()) {
    std::string lowered(word);
    for (auto& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(std::move(lowered));
  }
  out.insert(out.end(), trailing.rbegin(), trailing.rend());
}

void push_chunk(std::string_view chunk, std::vector<std::string>& out) {
  while (!chunk.empty()) {
    const auto open = chunk.find('<');
    const auto close = open == std::string_view::npos ? open : chunk.find('>', open + 1);
    if (close == std::string_view::npos || close == open + 1) {
      push_word(chunk, out);
      return;
    }
    push_word(chunk.substr(0, open), out);
    out.emplace_back(chunk.substr(open, close - open + 1));
    chunk.remove_prefix(close + 1);
  }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) push_chunk(text.substr(i, j - i), out);
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus files

namespace {

const json& require_field(const json& obj, const char* key, json::value_t type,
                          const char* type_name, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("missing field '") + key + "'", line);
  if (it->type() != type) {
    throw ParseError(std::string("field '") + key + "' must be " + type_name, line);
  }
  return *it;
}

}  // namespace

Dialog parse_dialog_line(std::string_view line, std::size_t line_number) {
  json record;
  try {
    record = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), line_number);
  }
  if (!record.is_object()) throw ParseError("record must be a JSON object", line_number);

  Dialog dialog;
  dialog.id = require_field(record, "id", json::value_t::string, "a string", line_number)
                  .get<std::string>();
  dialog.topic = require_field(record, "topic", json::value_t::string, "a string", line_number)
                     .get<std::string>();
  if (dialog.id.empty()) throw ParseError("empty dialog id", line_number);
  if (dialog.topic.empty()) {
    throw ValidationError("line " + std::to_string(line_number) + ": dialog '" + dialog.id +
                          "' has an empty topic");
  }
  const auto& utterances =
      require_field(record, "utterances", json::value_t::array, "an array", line_number);
  std::size_t dropped = 0;
  for (const auto& u : utterances) {
    if (!u.is_object()) throw ParseError("utterance must be a JSON object", line_number);
    Utterance utt;
    utt.speaker = require_field(u, "speaker", json::value_t::string, "a string", line_number)
                      .get<std::string>();
    utt.tokens = tokenize(
        require_field(u, "text", json::value_t::string, "a string", line_number).get_ref<const std::string&>());
    if (utt.tokens.empty()) {
      ++dropped;
      continue;
    }
    dialog.utterances.push_back(std::move(utt));
  }
  if (dropped > 0) {
    spdlog::debug("dialog '{}': dropped {} empty utterance(s)", dialog.id, dropped);
  }
  if (dialog.utterances.empty()) {
    throw ValidationError("line " + std::to_string(line_number) + ": dialog '" + dialog.id +
                          "' has no non-empty utterances");
  }
  return dialog;
}

Corpus read_corpus(std::istream& in) {
  std::vector<Dialog> dialogs;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Dialog d = parse_dialog_line(line, line_number);
    if (auto [it, inserted] = seen.emplace(d.id, line_number); !inserted) {
      throw ValidationError("line " + std::to_string(line_number) + ": duplicate dialog id '" +
                            d.id + "' (first seen on line " + std::to_string(it->second) + ")");
    }
    dialogs.push_back(std::move(d));
  }
  return Corpus(std::move(dialogs));
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file " + path.string());
  return read_corpus(in);
}

std::string dialog_to_json_line(const Dialog& dialog) {
  json utterances = json::array();
  for (const auto& u : dialog.utterances) {
    std::string text;
    for (const auto& t : u.tokens) {
      if (!text.empty()) text += ' ';
      text += t;
    }
    utterances.push_back({{"speaker", u.speaker}, {"text", std::move(text)}});
  }
  json record = {{"id", dialog.id}, {"topic", dialog.topic}, {"utterances", std::move(utterances)}};
  return record.dump();
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus file " + path.string());
  for (const auto& d : corpus.dialogs()) out << dialog_to_json_line(d) << '\n';
}

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() : id_to_token_{"<pad>", "<unk>"} {}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab vocab;
  for (auto& t : tokens) {
    if (t.empty()) throw ValidationError("empty vocabulary token");
    const TokenId id = vocab.id_to_token_.size();
    if (!vocab.token_to_id_.emplace(t, id).second) {
      throw ValidationError("duplicate vocabulary token '" + t + "'");
    }
    vocab.id_to_token_.push_back(std::move(t));
  }
  return vocab;
}

TokenId Vocab::lookup(std::string_view token) const {
  const auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return token_to_id_.contains(token); }

const std::string& Vocab::token(TokenId id) const {
  if (id >= id_to_token_.size()) {
    throw IndexError("token id " + std::to_string(id) + " out of range for vocabulary of " +
                     std::to_string(id_to_token_.size()));
  }
  return id_to_token_[id];
}

std::uint64_t Vocab::hash() const noexcept {
  std::uint64_t h = kFnvOffset;
  for (const auto& t : tokens()) {
    h = fnv1a64(t, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

Vocab build_vocab(const Corpus& corpus, std::size_t min_count) {
  if (corpus.empty()) throw ValidationError("cannot build a vocabulary from an empty corpus");
  if (min_count == 0) throw ValidationError("min_count must be at least 1");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& d : corpus.dialogs())
    for (const auto& u : d.utterances)
      for (const auto& t : u.tokens) ++counts[t];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [token, count] : counts) {
    if (count >= min_count) kept.emplace_back(token, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [token, count] : kept) tokens.push_back(std::move(token));
  return Vocab::from_tokens(std::move(tokens));
}

// ---------------------------------------------------------------------------
// Splits

namespace {

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

std::vector<std::string> sorted_ids(const std::vector<const Dialog*>& part) {
  std::vector<std::string> ids;
  ids.reserve(part.size());
  for (const auto* d : part) ids.push_back(d->id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

Corpus collect(const std::vector<const Dialog*>& part) {
  std::vector<const Dialog*> sorted(part);
  std::sort(sorted.begin(), sorted.end(),
            [](const Dialog* a, const Dialog* b) { return a->id < b->id; });
  std::vector<Dialog> dialogs;
  dialogs.reserve(sorted.size());
  for (const auto* d : sorted) dialogs.push_back(*d);
  return Corpus(std::move(dialogs));
}

}  // namespace

SplitCorpus make_covering_split(const Corpus& corpus, const SplitOptions& options) {
  const auto valid_fraction = [](double f) { return f >= 0.0 && f < 1.0; };
  if (!valid_fraction(options.test_fraction) || !valid_fraction(options.dev_fraction) ||
      options.test_fraction + options.dev_fraction >= 1.0) {
    throw ValidationError("split fractions must lie in [0, 1) and sum below 1");
  }

  std::map<std::string, std::vector<const Dialog*>> by_topic;
  for (const auto& d : corpus.dialogs()) by_topic[d.topic].push_back(&d);

  SplitCorpus split;
  split.options = options;
  std::vector<const Dialog*> train;
  std::vector<const Dialog*> dev;
  std::vector<const Dialog*> test;
  Rng rng = substream(options.seed, "split");

  for (auto& [topic, dialogs] : by_topic) {
    if (dialogs.size() < options.min_dialogs) {
      split.removed_topics.push_back(topic);
      continue;
    }
    const std::size_t n = dialogs.size();
    if (n < 2) {
      throw ValidationError("topic '" + topic + "' has " + std::to_string(n) +
                            " dialog(s); at least 2 are needed to cover train and test");
    }
    std::sort(dialogs.begin(), dialogs.end(),
              [](const Dialog* a, const Dialog* b) { return a->id < b->id; });
    rng.shuffle(dialogs);

    std::size_t n_test = std::max<std::size_t>(1, round_half_up(options.test_fraction * n));
    std::size_t n_dev = round_half_up(options.dev_fraction * n);
    if (n_test > n - 1) n_test = n - 1;
    if (n_test + n_dev > n - 1) n_dev = n - 1 - n_test;

    test.insert(test.end(), dialogs.begin(), dialogs.begin() + n_test);
    dev.insert(dev.end(), dialogs.begin() + n_test, dialogs.begin() + n_test + n_dev);
    train.insert(train.end(), dialogs.begin() + n_test + n_dev, dialogs.end());
  }

  split.train = collect(train);
  split.dev = collect(dev);
  split.test = collect(test);
  return split;
}

SplitManifest manifest_of(const SplitCorpus& split) {
  const auto ids = [](const Corpus& c) {
    std::vector<const Dialog*> ptrs;
    for (const auto& d : c.dialogs()) ptrs.push_back(&d);
    return sorted_ids(ptrs);
  };
  return SplitManifest{split.options.seed, ids(split.train), ids(split.dev), ids(split.test),
                       split.removed_topics};
}

std::string to_json(const SplitManifest& manifest) {
  json j = {{"seed", manifest.seed},
            {"train", manifest.train},
            {"dev", manifest.dev},
            {"test", manifest.test},
            {"removed_topics", manifest.removed_topics}};
  return j.dump(2) + "\n";
}

SplitManifest parse_split_manifest(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid split manifest: ") + e.what(), 0);
  }
  try {
    SplitManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.train = j.at("train").get<std::vector<std::string>>();
    m.dev = j.at("dev").get<std::vector<std::string>>();
    m.test = j.at("test").get<std::vector<std::string>>();
    m.removed_topics = j.at("removed_topics").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid split manifest: ") + e.what(), 0);
  }
}

void save_split_manifest(const SplitManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write split manifest " + path.string());
  out << to_json(manifest);
}

SplitManifest load_split_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open split manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_split_manifest(buf.str());
}

SplitCorpus apply_split(const Corpus& corpus, const SplitManifest& manifest) {
  std::unordered_map<std::string_view, const Dialog*> index;
  for (const auto& d : corpus.dialogs()) index.emplace(d.id, &d);
  std::unordered_set<std::string_view> used;
  const auto part = [&](const std::vector<std::string>& ids) {
    std::vector<const Dialog*> out;
    for (const auto& id : ids) {
      const auto it = index.find(id);
      if (it == index.end()) throw ValidationError("split manifest names unknown dialog '" + id + "'");
      if (!used.insert(it->first).second) {
        throw ValidationError("split manifest lists dialog '" + id + "' more than once");
      }
      out.push_back(it->second);
    }
    return collect(out);
  };
  SplitCorpus split;
  split.options.seed = manifest.seed;
  split.train = part(manifest.train);
  split.dev = part(manifest.dev);
  split.test = part(manifest.test);
  split.removed_topics = manifest.removed_topics;
  return split;
}

// ---------------------------------------------------------------------------
// Synthetic corpora

Corpus synth_corpus(const SynthSpec& spec) {
  if (spec.n_topics == 0 || spec.dialogs_per_topic == 0 || spec.utterances_per_dialog == 0 ||
      spec.utterance_len == 0) {
    throw ValidationError("synthetic corpus sizes must be positive");
  }
  if (!(spec.keyword_rate > 0.0 && spec.keyword_rate <= 1.0)) {
    throw ValidationError("keyword_rate must lie in (0, 1]");
  }
  if (spec.vocab_size < kKeywordsPerTopic * spec.n_topics + 1) {
    throw ValidationError("vocab_size " + std::to_string(spec.vocab_size) +
                          " is too small for " + std::to_string(spec.n_topics) +
                          " topic lexicons plus background");
  }

  const auto padded = [](std::size_t v, int width) {
    std::ostringstream os;
    os << std::setw(width) << std::setfill('0') << v;
    return os.str();
  };
  const std::size_t n_background = spec.vocab_size - kKeywordsPerTopic * spec.n_topics;
  std::vector<std::string> background(n_background);
  for (std::size_t i = 0; i < n_background; ++i) background[i] = "w" + padded(i, 5);

  Rng rng = substream(spec.seed, "synth");
  std::vector<Dialog> dialogs;
  dialogs.reserve(spec.n_topics * spec.dialogs_per_topic);
  for (std::size_t t = 0; t < spec.n_topics; ++t) {
    const std::string topic = "topic_" + padded(t, 2);
    std::vector<std::string> lexicon(kKeywordsPerTopic);
    for (std::size_t k = 0; k < kKeywordsPerTopic; ++k) {
      lexicon[k] = "kw" + padded(t, 2) + "_" + std::to_string(k);
    }
    for (std::size_t d = 0; d < spec.dialogs_per_topic; ++d) {
      Dialog dialog;
      dialog.id = "synth_t" + padded(t, 2) + "_d" + padded(d, 4);
      dialog.topic = topic;
      for (std::size_t u = 0; u < spec.utterances_per_dialog; ++u) {
        Utterance utt;
        utt.speaker = u % 2 == 0 ? "A" : "B";
        utt.tokens.reserve(spec.utterance_len);
        for (std::size_t i = 0; i < spec.utterance_len; ++i) {
          if (rng.uniform() < spec.keyword_rate) {
            utt.tokens.push_back(lexicon[rng.below(kKeywordsPerTopic)]);
          } else {
            utt.tokens.push_back(background[rng.below(n_background)]);
          }
        }
        dialog.utterances.push_back(std::move(utt));
      }
      dialogs.push_back(std::move(dialog));
    }
  }
  return Corpus(std::move(dialogs));
}

// ---------------------------------------------------------------------------
// Statistics

PartStats corpus_stats(const Corpus& corpus, std::string part) {
  PartStats stats;
  stats.part = std::move(part);
  stats.n_dialogs = corpus.size();
  stats.n_topics = corpus.topic_set().size();
  std::size_t total = 0;
  for (const auto& d : corpus.dialogs()) total += d.utterances.size();
  stats.avg_utterances =
      corpus.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(corpus.size());
  return stats;
}

std::vector<PartStats> corpus_stats(const SplitCorpus& split) {
  return {corpus_stats(split.train, "train"), corpus_stats(split.dev, "dev"),
          corpus_stats(split.test, "test")};
}

std::string format_stats_table(std::span<const PartStats> rows) {
  std::ostringstream os;
  os << std::left << std::setw(8) << "part" << std::right << std::setw(12) << "#dialogs"
     << std::setw(10) << "#topics" << std::setw(18) << "avg #utterances" << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(8) << r.part << std::right << std::setw(12) << r.n_dialogs
       << std::setw(10) << r.n_topics << std::setw(18) << std::fixed << std::setprecision(2)
       << r.avg_utterances << '\n';
  }
  return os.str();
}

}  // namespace hnsa
