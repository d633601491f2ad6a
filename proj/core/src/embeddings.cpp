// SPDX-License-Identifier: Apache-2.0
#include "hnsa/embeddings.hpp"

#include <spdlog/spdlog.h>
#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "hnsa/error.hpp"
#include "hnsa/rng.hpp"

namespace hnsa {
namespace {

// gzopen reads uncompressed files transparently.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path)
      : file_(gzopen(path.string().c_str(), "rb"), &gzclose) {
    if (!file_) throw Error("cannot open embeddings file " + path.string());
  }

  bool next(std::string& line) {
    line.clear();
    char buf[1 << 14];
    while (gzgets(file_.get(), buf, sizeof(buf)) != nullptr) {
      line += buf;
      if (!line.empty() && line.back() == '\n') break;
    }
    if (line.empty()) return false;
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
    return true;
  }

 private:
  std::unique_ptr<gzFile_s, decltype(&gzclose)> file_;
};

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

EmbeddingMatrix random_embeddings(const Vocab& vocab, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ValidationError("embedding dimension must be positive");
  Rng rng = substream(seed, "embed");
  std::vector<double> values(vocab.size() * dim, 0.0);
  for (std::size_t row = 0; row < vocab.size(); ++row) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double v = rng.uniform(-kOovInitRange, kOovInitRange);
      if (row != Vocab::kPad) values[row * dim + i] = v;
    }
  }
  return EmbeddingMatrix{ad::Tensor::matrix(vocab.size(), dim, std::move(values), true), 0.0};
}

EmbeddingMatrix load_pretrained(const std::filesystem::path& path, const Vocab& vocab,
                                std::size_t dim, std::uint64_t seed) {
  EmbeddingMatrix emb = random_embeddings(vocab, dim, seed);
  auto table = emb.table.mutable_values();
  std::vector<bool> filled(vocab.size(), false);

  LineReader reader(path);
  std::string line;
  std::size_t line_number = 0;
  bool first_vector = true;
  while (reader.next(line)) {
    ++line_number;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (line_number == 1 && fields.size() == 2) {
      std::size_t count = 0;
      std::size_t header_dim = 0;
      if (parse_number(fields[0], count) && parse_number(fields[1], header_dim)) {
        if (header_dim != dim) {
          throw ValidationError("embeddings header declares dimension " +
                                std::to_string(header_dim) + ", expected " + std::to_string(dim));
        }
        continue;
      }
    }
    if (fields.size() != dim + 1) {
      if (first_vector) {
        throw ValidationError("embeddings file has vectors of dimension " +
                              std::to_string(fields.size() - 1) + ", expected " +
                              std::to_string(dim));
      }
      throw ParseError("expected token plus " + std::to_string(dim) + " values, got " +
                           std::to_string(fields.size()) + " fields",
                       line_number);
    }
    first_vector = false;
    const TokenId id = vocab.lookup(fields[0]);
    if (id == Vocab::kUnk || filled[id]) continue;
    std::vector<double> vec(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!parse_number(fields[i + 1], vec[i]) || !std::isfinite(vec[i])) {
        throw ParseError("bad number '" + std::string(fields[i + 1]) + "'", line_number);
      }
    }
    std::copy(vec.begin(), vec.end(), table.begin() + static_cast<std::ptrdiff_t>(id * dim));
    filled[id] = true;
  }

  const std::size_t real = vocab.size() - 2;
  std::size_t hits = 0;
  for (std::size_t id = 2; id < vocab.size(); ++id) hits += filled[id] ? 1 : 0;
  emb.coverage = real == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(real);
  spdlog::info("pretrained embeddings: {}/{} vocabulary tokens covered", hits, real);
  return emb;
}

ad::Tensor lookup(ad::Tape& tape, const EmbeddingMatrix& embeddings,
                  std::span<const TokenId> ids) {
  if (ids.empty()) throw ValidationError("embedding lookup of an empty token sequence");
  return ad::gather_rows(tape, embeddings.table, ids);
}

}  // namespace hnsa
