// SPDX-License-Identifier: Apache-2.0
//
// Dialog data model, tokenizer, corpus files, vocabulary, topic-covering
// train/dev/test splits and the synthetic corpus generator.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hnsa {

using TokenId = std::size_t;

struct Utterance {
  std::string speaker;
  std::vector<std::string> tokens;

  bool operator==(const Utterance&) const = default;
};

struct Dialog {
  std::string id;
  std::string topic;
  std::vector<Utterance> utterances;

  bool operator==(const Dialog&) const = default;
};

/// A validated collection of dialogs. Construction enforces non-empty
/// topics and utterances, unique ids, and derives the sorted topic set.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Dialog> dialogs);

  const std::vector<Dialog>& dialogs() const noexcept { return dialogs_; }
  /// Distinct labels, sorted; a label's position is its class index.
  const std::vector<std::string>& topic_set() const noexcept { return topics_; }
  std::size_t size() const noexcept { return dialogs_.size(); }
  bool empty() const noexcept { return dialogs_.empty(); }

 private:
  std::vector<Dialog> dialogs_;
  std::vector<std::string> topics_;
};

/// Minimal preprocessing: whitespace split, ASCII lowercasing of words,
/// bracketed non-verbal markers such as "<Laughter>" kept verbatim, "#" and
/// "?" split off as their own tokens, any other leading or trailing
/// punctuation stripped from words. Never yields empty tokens.
std::vector<std::string> tokenize(std::string_view text);

// Corpus files: one JSON object per line,
//   {"id": str, "topic": str, "utterances": [{"speaker": str, "text": str}]}
// Unknown fields are ignored; blank lines are skipped.
Dialog parse_dialog_line(std::string_view line, std::size_t line_number);
Corpus read_corpus(std::istream& in);
Corpus load_corpus(const std::filesystem::path& path);
/// Text fields are the tokens joined by single spaces.
std::string dialog_to_json_line(const Dialog& dialog);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Token index space. Ids 0 and 1 are reserved for padding and unknown
/// tokens; real tokens occupy [2, size()).
class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;

  Vocab();
  /// Tokens in id order starting at id 2. Throws ValidationError on
  /// duplicates or empty tokens.
  static Vocab from_tokens(std::vector<std::string> tokens);

  /// kUnk for tokens not in the vocabulary.
  TokenId lookup(std::string_view token) const;
  bool contains(std::string_view token) const;
  /// Throws IndexError for ids >= size().
  const std::string& token(TokenId id) const;
  std::size_t size() const noexcept { return id_to_token_.size(); }
  /// Non-reserved tokens in id order.
  std::span<const std::string> tokens() const noexcept {
    return std::span<const std::string>(id_to_token_).subspan(2);
  }
  /// FNV-1a 64 over the non-reserved tokens; identifies the id mapping.
  std::uint64_t hash() const noexcept;

  bool operator==(const Vocab& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::map<std::string, TokenId, std::less<>> token_to_id_;
};

/// Tokens occurring at least min_count times. Ids are assigned by
/// descending count, ties broken lexicographically. Throws ValidationError
/// for an empty corpus or min_count == 0.
Vocab build_vocab(const Corpus& corpus, std::size_t min_count = 1);

struct SplitOptions {
  std::uint64_t seed = 0;
  std::size_t min_dialogs = 10;
  double test_fraction = 0.1;
  double dev_fraction = 0.05;
};

struct SplitCorpus {
  Corpus train;
  Corpus dev;
  Corpus test;
  SplitOptions options;
  std::vector<std::string> removed_topics;
};

/// Drops topics with fewer than min_dialogs dialogs, then assigns each
/// remaining topic's dialogs, shuffled with the seeded generator, to test
/// (at least one), dev (possibly none) and train (at least one). Per-topic
/// part sizes use half-up rounding of the requested fractions. Throws
/// ValidationError when a retained topic has fewer than two dialogs or the
/// fractions are outside [0, 1).
SplitCorpus make_covering_split(const Corpus& corpus, const SplitOptions& options);

struct SplitManifest {
  std::uint64_t seed = 0;
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;
  std::vector<std::string> removed_topics;

  bool operator==(const SplitManifest&) const = default;
};

SplitManifest manifest_of(const SplitCorpus& split);
std::string to_json(const SplitManifest& manifest);
SplitManifest parse_split_manifest(std::string_view json);
void save_split_manifest(const SplitManifest& manifest, const std::filesystem::path& path);
SplitManifest load_split_manifest(const std::filesystem::path& path);
/// Rebuilds the parts from a manifest. Throws ValidationError for ids that
/// the corpus does not contain.
SplitCorpus apply_split(const Corpus& corpus, const SplitManifest& manifest);

struct SynthSpec {
  std::size_t n_topics = 8;
  std::size_t dialogs_per_topic = 50;
  std::size_t utterances_per_dialog = 8;
  std::size_t utterance_len = 10;
  double keyword_rate = 0.3;
  std::size_t vocab_size = 2000;
  std::uint64_t seed = 7;
};

inline constexpr std::size_t kKeywordsPerTopic = 5;

/// Each topic owns kKeywordsPerTopic keywords; the rest of the vocabulary is
/// shared background. Every token is a uniform draw from the dialog's topic
/// lexicon with probability keyword_rate, else from the background.
/// Throws ValidationError for vocab_size < 5 * n_topics + 1, keyword_rate
/// outside (0, 1], or zero sizes.
Corpus synth_corpus(const SynthSpec& spec);

struct PartStats {
  std::string part;
  std::size_t n_dialogs = 0;
  std::size_t n_topics = 0;
  double avg_utterances = 0.0;
};

PartStats corpus_stats(const Corpus& corpus, std::string part);
std::vector<PartStats> corpus_stats(const SplitCorpus& split);
/// Whitespace-aligned table: part, #dialogs, #topics, avg #utterances.
std::string format_stats_table(std::span<const PartStats> rows);

}  // namespace hnsa
