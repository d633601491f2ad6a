// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>
#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "hnsa/embeddings.hpp"
#include "hnsa/error.hpp"
#include "test_util.hpp"

namespace ad = hnsa::ad;
namespace fs = std::filesystem;

namespace {

class TempFile {
 public:
  explicit TempFile(const std::string& name) : path_(fs::temp_directory_path() / name) {}
  ~TempFile() { fs::remove(path_); }
  const fs::path& path() const { return path_; }
  void write(const std::string& text) const { std::ofstream(path_) << text; }

 private:
  fs::path path_;
};

std::vector<double> row_of(const hnsa::EmbeddingMatrix& e, std::size_t r) {
  const auto v = e.table.values().subspan(r * e.dim(), e.dim());
  return {v.begin(), v.end()};
}

}  // namespace

TEST(EmbeddingsTest, FullCoverageCopiesVectors) {
  const auto vocab = hnsa::Vocab::from_tokens({"cat", "dog"});
  TempFile f("hnsa_emb_full.txt");
  f.write("cat 0.1 0.2 0.3\ndog -1 -2 -3\nbird 9 9 9\n");
  const auto e = hnsa::load_pretrained(f.path(), vocab, 3, 0);
  EXPECT_DOUBLE_EQ(e.coverage, 1.0);
  EXPECT_EQ(row_of(e, vocab.lookup("cat")), (std::vector<double>{0.1, 0.2, 0.3}));
  EXPECT_EQ(row_of(e, vocab.lookup("dog")), (std::vector<double>{-1, -2, -3}));
  EXPECT_EQ(row_of(e, 0), (std::vector<double>{0, 0, 0}));
  EXPECT_TRUE(e.table.requires_grad());
}

TEST(EmbeddingsTest, AbsentTokensAreSmallAndSeeded) {
  const auto vocab = hnsa::testing::numbered_vocab(50);
  TempFile f("hnsa_emb_partial.txt");
  f.write("2 5\ntok2 1 1 1 1 1\ntok3 2 2 2 2 2\n");
  const auto a = hnsa::load_pretrained(f.path(), vocab, 5, 42);
  const auto b = hnsa::load_pretrained(f.path(), vocab, 5, 42);
  EXPECT_NEAR(a.coverage, 2.0 / 48.0, 1e-15);
  EXPECT_EQ(std::vector<double>(a.table.values().begin(), a.table.values().end()),
            std::vector<double>(b.table.values().begin(), b.table.values().end()));
  for (std::size_t r = 4; r < vocab.size(); ++r) {
    for (double v : row_of(a, r)) {
      EXPECT_GE(v, -hnsa::kOovInitRange);
      EXPECT_LE(v, hnsa::kOovInitRange);
    }
  }
  // Absent rows match the plain random initialisation for the same seed.
  const auto random = hnsa::random_embeddings(vocab, 5, 42);
  EXPECT_EQ(row_of(a, 10), row_of(random, 10));
  EXPECT_EQ(row_of(a, 0), std::vector<double>(5, 0.0));
}

TEST(EmbeddingsTest, RandomEmbeddingsPadIsZero) {
  const auto e = hnsa::random_embeddings(hnsa::testing::numbered_vocab(10), 4, 1);
  EXPECT_EQ(e.vocab_size(), 10u);
  EXPECT_EQ(row_of(e, 0), std::vector<double>(4, 0.0));
  EXPECT_NE(row_of(e, 1), std::vector<double>(4, 0.0));
  EXPECT_EQ(e.coverage, 0.0);
}

TEST(EmbeddingsTest, ArityErrors) {
  const auto vocab = hnsa::Vocab::from_tokens({"a"});
  TempFile f("hnsa_emb_arity.txt");
  f.write("a 1 2\n");
  EXPECT_THROW(hnsa::load_pretrained(f.path(), vocab, 3, 0), hnsa::ValidationError);
  f.write("3 4\na 1 2 3\n");
  EXPECT_THROW(hnsa::load_pretrained(f.path(), vocab, 3, 0), hnsa::ValidationError);
  f.write("a 1 2 3\nb 1 2\n");
  try {
    hnsa::load_pretrained(f.path(), vocab, 3, 0);
    FAIL() << "expected ParseError";
  } catch (const hnsa::ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  f.write("a 1 x 3\n");
  EXPECT_THROW(hnsa::load_pretrained(f.path(), vocab, 3, 0), hnsa::ParseError);
  EXPECT_THROW(hnsa::load_pretrained("/nonexistent/vectors.txt", vocab, 3, 0), hnsa::Error);
}

TEST(EmbeddingsTest, ReadsGzip) {
  const auto vocab = hnsa::Vocab::from_tokens({"a", "b"});
  const auto path = fs::temp_directory_path() / "hnsa_emb.txt.gz";
  gzFile gz = gzopen(path.c_str(), "wb");
  ASSERT_NE(gz, nullptr);
  const std::string text = "b 0.5 0.25\n";
  gzwrite(gz, text.data(), static_cast<unsigned>(text.size()));
  gzclose(gz);
  const auto e = hnsa::load_pretrained(path, vocab, 2, 0);
  fs::remove(path);
  EXPECT_DOUBLE_EQ(e.coverage, 0.5);
  EXPECT_EQ(row_of(e, vocab.lookup("b")), (std::vector<double>{0.5, 0.25}));
}

TEST(LookupTest, ShapeAndUnkRow) {
  const auto e = hnsa::random_embeddings(hnsa::testing::numbered_vocab(10), 300, 3);
  ad::Tape tape(false);
  const std::vector<hnsa::TokenId> ids{hnsa::Vocab::kUnk};
  const auto out = hnsa::lookup(tape, e, ids);
  EXPECT_EQ(out.shape(), (ad::Shape{1, 300}));
  EXPECT_EQ(std::vector<double>(out.values().begin(), out.values().end()), row_of(e, 1));
  EXPECT_THROW(hnsa::lookup(tape, e, {}), hnsa::ValidationError);
  const std::vector<hnsa::TokenId> bad{10};
  EXPECT_THROW(hnsa::lookup(tape, e, bad), hnsa::IndexError);
}

TEST(LookupTest, RepeatedIdsAccumulate) {
  const auto e = hnsa::random_embeddings(hnsa::testing::numbered_vocab(10), 3, 3);
  const std::vector<hnsa::TokenId> ids{5, 5};
  ad::Tape tape;
  tape.backward(ad::sum(tape, hnsa::lookup(tape, e, ids)));
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(e.table.grad()[5 * 3 + j], 2.0);
}

TEST(LookupTest, GradientMassIsConserved) {
  hnsa::Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto e = hnsa::random_embeddings(hnsa::testing::numbered_vocab(30), 4, trial);
    std::vector<hnsa::TokenId> ids(1 + rng.below(15));
    for (auto& id : ids) id = rng.below(30);
    const auto upstream = hnsa::testing::random_tensor({ids.size(), 4}, rng, -1, 1, false);
    ad::Tape tape;
    tape.backward(ad::sum(tape, ad::mul(tape, hnsa::lookup(tape, e, ids), upstream)));
    const double grad_mass = std::accumulate(e.table.grad().begin(), e.table.grad().end(), 0.0);
    const double upstream_mass =
        std::accumulate(upstream.values().begin(), upstream.values().end(), 0.0);
    EXPECT_NEAR(grad_mass, upstream_mass, 1e-12);
  }
}
