// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hnsa/corpus.hpp"
#include "hnsa/error.hpp"
#include "test_util.hpp"

using hnsa::Corpus;
using hnsa::testing::make_dialog;
using Tokens = std::vector<std::string>;

namespace {

Corpus corpus_with_counts(const std::map<std::string, std::size_t>& counts) {
  std::vector<hnsa::Dialog> dialogs;
  for (const auto& [topic, n] : counts) {
    for (std::size_t i = 0; i < n; ++i) {
      dialogs.push_back(make_dialog(topic + "_" + std::to_string(i), topic, {{"w"}}));
    }
  }
  return Corpus(std::move(dialogs));
}

std::set<std::string> ids_of(const Corpus& c) {
  std::set<std::string> out;
  for (const auto& d : c.dialogs()) out.insert(d.id);
  return out;
}

// Dialog counts shaped like a 66-topic conversational corpus: 42 topics with
// 10 to 40 dialogs, 24 small ones below the threshold.
Corpus sixty_six_topic_corpus() {
  std::map<std::string, std::size_t> counts;
  for (int t = 0; t < 66; ++t) {
    char name[16];
    std::snprintf(name, sizeof name, "T%02d", t);
    counts[name] = t < 42 ? 10 + static_cast<std::size_t>(t * 7 % 31) : 1 + static_cast<std::size_t>(t % 9);
  }
  return corpus_with_counts(counts);
}

}  // namespace

TEST(TokenizeTest, Examples) {
  EXPECT_EQ(hnsa::tokenize("I grow roses <Laughter>"), (Tokens{"i", "grow", "roses", "<Laughter>"}));
  EXPECT_EQ(hnsa::tokenize("Really ?"), (Tokens{"really", "?"}));
  EXPECT_EQ(hnsa::tokenize(""), Tokens{});
  EXPECT_EQ(hnsa::tokenize("   \t "), Tokens{});
}

TEST(TokenizeTest, PunctuationRules) {
  EXPECT_EQ(hnsa::tokenize("Hello, world."), (Tokens{"hello", "world"}));
  EXPECT_EQ(hnsa::tokenize("really?"), (Tokens{"really", "?"}));
  EXPECT_EQ(hnsa::tokenize("#1 fan"), (Tokens{"#", "1", "fan"}));
  EXPECT_EQ(hnsa::tokenize("don't"), (Tokens{"don't"}));
  EXPECT_EQ(hnsa::tokenize("... -- !!"), Tokens{});
  EXPECT_EQ(hnsa::tokenize("yes<Noise>"), (Tokens{"yes", "<Noise>"}));
}

TEST(TokenizeTest, NeverEmitsEmptyTokensAndKeepsMarkers) {
  hnsa::Rng rng(17);
  const std::string alphabet = "aZ <>#?.,!'- x";
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    const auto n = rng.below(30);
    for (std::uint64_t i = 0; i < n; ++i) text += alphabet[rng.below(alphabet.size())];
    text += " <Marker_" + std::to_string(trial) + ">";
    const auto toks = hnsa::tokenize(text);
    for (const auto& t : toks) EXPECT_FALSE(t.empty()) << text;
    EXPECT_NE(std::find(toks.begin(), toks.end(), "<Marker_" + std::to_string(trial) + ">"),
              toks.end())
        << text;
  }
}

TEST(LoadCorpusTest, ReadsRecords) {
  std::istringstream in(
      R"({"id":"d1","topic":"PETS","utterances":[{"speaker":"A","text":"My dog ?"},{"speaker":"B","text":"..."}],"extra":1})"
      "\n\n"
      R"({"id":"d2","topic":"CARS","utterances":[{"speaker":"B","text":"Vroom"}]})"
      "\r\n");
  const Corpus c = hnsa::read_corpus(in);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.dialogs()[0].utterances.size(), 1u);  // "..." tokenizes to nothing
  EXPECT_EQ(c.dialogs()[0].utterances[0].tokens, (Tokens{"my", "dog", "?"}));
  EXPECT_EQ(c.topic_set(), (Tokens{"CARS", "PETS"}));
}

TEST(LoadCorpusTest, ErrorsCarryLineNumbers) {
  const auto line_of_error = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      hnsa::read_corpus(in);
    } catch (const hnsa::ParseError& e) {
      return e.line();
    }
    return 0;
  };
  const std::string good = R"({"id":"a","topic":"T","utterances":[{"speaker":"A","text":"x"}]})";
  EXPECT_EQ(line_of_error(good + "\n{not json\n"), 2u);
  EXPECT_EQ(line_of_error(good + "\n\n" + R"({"id":"b","topic":"T"})" + "\n"), 3u);
  EXPECT_EQ(line_of_error(R"({"id":"b","topic":"T","utterances":[{"speaker":"A"}]})"), 1u);
  EXPECT_EQ(line_of_error(R"({"id":7,"topic":"T","utterances":[]})"), 1u);
  EXPECT_EQ(line_of_error("[1,2]"), 1u);
}

TEST(LoadCorpusTest, RejectsEmptyDialogsAndDuplicates) {
  std::istringstream empty(R"({"id":"a","topic":"T","utterances":[]})");
  EXPECT_THROW(hnsa::read_corpus(empty), hnsa::ValidationError);
  std::istringstream blank(R"({"id":"a","topic":"T","utterances":[{"speaker":"A","text":" , "}]})");
  EXPECT_THROW(hnsa::read_corpus(blank), hnsa::ValidationError);
  const std::string rec = R"({"id":"a","topic":"T","utterances":[{"speaker":"A","text":"x"}]})";
  std::istringstream dup(rec + "\n" + rec + "\n");
  EXPECT_THROW(hnsa::read_corpus(dup), hnsa::ValidationError);
}

TEST(LoadCorpusTest, SaveLoadRoundTrip) {
  hnsa::SynthSpec spec;
  spec.n_topics = 3;
  spec.dialogs_per_topic = 4;
  const Corpus c = hnsa::synth_corpus(spec);
  const auto path = std::filesystem::temp_directory_path() / "hnsa_corpus_roundtrip.jsonl";
  hnsa::save_corpus(c, path);
  const Corpus back = hnsa::load_corpus(path);
  EXPECT_EQ(back.dialogs(), c.dialogs());
  std::filesystem::remove(path);
  EXPECT_THROW(hnsa::load_corpus(path), hnsa::Error);
}

TEST(CorpusTest, TopicSetMatchesLabels) {
  const Corpus c = corpus_with_counts({{"B", 2}, {"A", 1}});
  EXPECT_EQ(c.topic_set(), (Tokens{"A", "B"}));
  EXPECT_THROW(Corpus({make_dialog("x", "", {{"w"}})}), hnsa::ValidationError);
  EXPECT_THROW(Corpus({make_dialog("x", "T", {})}), hnsa::ValidationError);
}

TEST(VocabTest, MinCountAndUnk) {
  const Corpus c({make_dialog("d", "T", {{"the", "cat", "the"}, {"the"}})});
  const auto v2 = hnsa::build_vocab(c, 2);
  EXPECT_EQ(v2.size(), 3u);
  EXPECT_EQ(v2.lookup("the"), 2u);
  EXPECT_EQ(v2.lookup("cat"), hnsa::Vocab::kUnk);
  EXPECT_EQ(v2.lookup("never"), 1u);
  const auto v1 = hnsa::build_vocab(c);
  EXPECT_EQ(v1.size(), 4u);
  EXPECT_EQ(v1.token(3), "cat");
  EXPECT_EQ(v1.token(0), "<pad>");
  EXPECT_THROW(v1.token(4), hnsa::IndexError);
  EXPECT_THROW(hnsa::build_vocab(Corpus{}), hnsa::ValidationError);
  EXPECT_THROW(hnsa::build_vocab(c, 0), hnsa::ValidationError);
}

TEST(VocabTest, BijectiveAndDense) {
  const auto c = hnsa::synth_corpus({});
  const auto v = hnsa::build_vocab(c);
  std::set<std::string> seen;
  for (hnsa::TokenId id = 2; id < v.size(); ++id) {
    EXPECT_EQ(v.lookup(v.token(id)), id);
    EXPECT_TRUE(seen.insert(v.token(id)).second);
  }
  EXPECT_THROW(hnsa::Vocab::from_tokens({"a", "a"}), hnsa::ValidationError);
  EXPECT_NE(v.hash(), hnsa::Vocab::from_tokens({"a"}).hash());
}

TEST(SplitTest, ThresholdExample) {
  const Corpus c = corpus_with_counts({{"A", 12}, {"B", 9}, {"C", 30}});
  hnsa::SplitOptions opts;
  const auto split = hnsa::make_covering_split(c, opts);
  EXPECT_EQ(split.removed_topics, Tokens{"B"});
  EXPECT_EQ(split.test.topic_set(), (Tokens{"A", "C"}));
  EXPECT_EQ(split.train.topic_set(), (Tokens{"A", "C"}));
  EXPECT_EQ(split.train.size() + split.dev.size() + split.test.size(), 42u);
}

TEST(SplitTest, CoverageAndDisjointnessProperty) {
  hnsa::Rng rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    std::map<std::string, std::size_t> counts;
    const auto n_topics = 1 + rng.below(12);
    for (std::uint64_t t = 0; t < n_topics; ++t) counts["t" + std::to_string(t)] = 1 + rng.below(40);
    const Corpus c = corpus_with_counts(counts);
    hnsa::SplitOptions opts;
    opts.seed = rng();
    opts.min_dialogs = 2 + rng.below(10);
    opts.test_fraction = rng.uniform(0.0, 0.5);
    opts.dev_fraction = rng.uniform(0.0, 0.4);
    const auto split = hnsa::make_covering_split(c, opts);

    const auto train = ids_of(split.train), dev = ids_of(split.dev), test = ids_of(split.test);
    std::set<std::string> all;
    for (const auto* part : {&train, &dev, &test}) {
      for (const auto& id : *part) EXPECT_TRUE(all.insert(id).second) << "overlap at " << id;
    }
    std::set<std::string> expected;
    for (const auto& d : c.dialogs()) {
      if (counts[d.topic] >= opts.min_dialogs) expected.insert(d.id);
    }
    EXPECT_EQ(all, expected);
    EXPECT_EQ(split.train.topic_set(), split.test.topic_set());
    for (const auto& t : split.test.topic_set()) EXPECT_GE(counts[t], opts.min_dialogs);
    for (const auto& t : split.removed_topics) EXPECT_LT(counts[t], opts.min_dialogs);
  }
}

TEST(SplitTest, DeterministicPerSeed) {
  const Corpus c = sixty_six_topic_corpus();
  hnsa::SplitOptions opts;
  opts.seed = 5;
  const auto a = hnsa::to_json(hnsa::manifest_of(hnsa::make_covering_split(c, opts)));
  const auto b = hnsa::to_json(hnsa::manifest_of(hnsa::make_covering_split(c, opts)));
  EXPECT_EQ(a, b);
  opts.seed = 6;
  EXPECT_NE(a, hnsa::to_json(hnsa::manifest_of(hnsa::make_covering_split(c, opts))));
}

TEST(SplitTest, ProportionsApproachRequest) {
  const Corpus c = corpus_with_counts({{"A", 100}, {"B", 100}});
  hnsa::SplitOptions opts;
  opts.test_fraction = 0.2;
  opts.dev_fraction = 0.1;
  const auto split = hnsa::make_covering_split(c, opts);
  EXPECT_EQ(split.test.size(), 40u);
  EXPECT_EQ(split.dev.size(), 20u);
  EXPECT_EQ(split.train.size(), 140u);
}

TEST(SplitTest, Errors) {
  const Corpus c = corpus_with_counts({{"A", 1}, {"B", 5}});
  hnsa::SplitOptions opts;
  opts.min_dialogs = 1;
  EXPECT_THROW(hnsa::make_covering_split(c, opts), hnsa::ValidationError);
  opts.min_dialogs = 2;
  EXPECT_NO_THROW(hnsa::make_covering_split(c, opts));
  opts.test_fraction = 0.7;
  opts.dev_fraction = 0.4;
  EXPECT_THROW(hnsa::make_covering_split(c, opts), hnsa::ValidationError);
}

TEST(SplitManifestTest, RoundTripAndApply) {
  const Corpus c = sixty_six_topic_corpus();
  const auto split = hnsa::make_covering_split(c, {});
  const auto manifest = hnsa::manifest_of(split);
  EXPECT_EQ(hnsa::parse_split_manifest(hnsa::to_json(manifest)), manifest);
  const auto path = std::filesystem::temp_directory_path() / "hnsa_manifest.json";
  hnsa::save_split_manifest(manifest, path);
  EXPECT_EQ(hnsa::load_split_manifest(path), manifest);
  std::filesystem::remove(path);

  const auto rebuilt = hnsa::apply_split(c, manifest);
  EXPECT_EQ(rebuilt.test.dialogs(), split.test.dialogs());
  EXPECT_EQ(rebuilt.train.dialogs(), split.train.dialogs());

  auto bad = manifest;
  bad.test.push_back("nope");
  EXPECT_THROW(hnsa::apply_split(c, bad), hnsa::ValidationError);
  EXPECT_THROW(hnsa::parse_split_manifest("{\"seed\": 1}"), hnsa::ParseError);
}

TEST(SynthTest, SizesAndDeterminism) {
  const auto a = hnsa::synth_corpus({});
  EXPECT_EQ(a.size(), 400u);
  EXPECT_EQ(a.topic_set().size(), 8u);
  EXPECT_EQ(a.dialogs(), hnsa::synth_corpus({}).dialogs());
  hnsa::SynthSpec other;
  other.seed = 8;
  EXPECT_NE(a.dialogs(), hnsa::synth_corpus(other).dialogs());
  for (const auto& d : a.dialogs()) {
    ASSERT_EQ(d.utterances.size(), 8u);
    for (const auto& u : d.utterances) EXPECT_EQ(u.tokens.size(), 10u);
  }
}

TEST(SynthTest, FullKeywordRateIsSeparable) {
  hnsa::SynthSpec spec;
  spec.keyword_rate = 1.0;
  spec.dialogs_per_topic = 5;
  const auto corpus = hnsa::synth_corpus(spec);
  for (const auto& d : corpus.dialogs()) {
    // Keyword tokens are "kwTT_k"; TT must match the dialog's topic index.
    const std::string prefix = "kw" + d.topic.substr(d.topic.size() - 2) + "_";
    for (const auto& u : d.utterances) {
      for (const auto& t : u.tokens) EXPECT_EQ(t.rfind(prefix, 0), 0u) << t;
    }
  }
}

TEST(SynthTest, KeywordFrequencyNearRate) {
  hnsa::SynthSpec spec;
  spec.keyword_rate = 0.3;
  std::size_t kw = 0, total = 0;
  const auto corpus = hnsa::synth_corpus(spec);
  for (const auto& d : corpus.dialogs()) {
    for (const auto& u : d.utterances) {
      for (const auto& t : u.tokens) {
        kw += t.rfind("kw", 0) == 0;
        ++total;
      }
    }
  }
  EXPECT_NEAR(static_cast<double>(kw) / total, 0.3, 0.01);
}

TEST(SynthTest, Validation) {
  hnsa::SynthSpec spec;
  spec.vocab_size = 40;  // 5 * 8 = 40 < 41
  EXPECT_THROW(hnsa::synth_corpus(spec), hnsa::ValidationError);
  spec.vocab_size = 41;
  EXPECT_NO_THROW(hnsa::synth_corpus(spec));
  spec.keyword_rate = 0.0;
  EXPECT_THROW(hnsa::synth_corpus(spec), hnsa::ValidationError);
}

TEST(StatsTest, Averages) {
  const Corpus one({make_dialog("d", "T", {{"a"}, {"b"}, {"c"}, {"d"}, {"e"}})});
  const auto s = hnsa::corpus_stats(one, "test");
  EXPECT_EQ(s.n_dialogs, 1u);
  EXPECT_EQ(s.n_topics, 1u);
  EXPECT_DOUBLE_EQ(s.avg_utterances, 5.0);

  const auto split = hnsa::make_covering_split(sixty_six_topic_corpus(), {});
  const auto rows = hnsa::corpus_stats(split);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].part, "train");
  EXPECT_EQ(rows[2].n_topics, 42u);
  const auto table = hnsa::format_stats_table(rows);
  EXPECT_NE(table.find("train"), std::string::npos);
}
