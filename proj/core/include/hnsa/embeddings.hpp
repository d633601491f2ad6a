// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "hnsa/corpus.hpp"
#include "hnsa/tensor.hpp"

namespace hnsa {

inline constexpr double kOovInitRange = 0.05;

/// Trainable |V| x d token embedding table. Row Vocab::kPad stays zero.
struct EmbeddingMatrix {
  ad::Tensor table;
  /// Fraction of non-reserved vocabulary rows taken from a pretrained file.
  double coverage = 0.0;

  std::size_t vocab_size() const { return table.dim(0); }
  std::size_t dim() const { return table.dim(1); }
};

/// Every non-PAD row uniform in [-0.05, 0.05], drawn row by row from the
/// seed's "embed" substream.
EmbeddingMatrix random_embeddings(const Vocab& vocab, std::size_t dim, std::uint64_t seed);

/// Reads whitespace-delimited "token v1 ... v_dim" lines (plain or gzip).
/// An optional leading "<count> <dim>" header line is honoured. Vocabulary
/// tokens present in the file take its vector; the rest keep their random
/// initialisation from random_embeddings(vocab, dim, seed).
/// Throws ValidationError when the first vector's (or header's) dimension
/// differs from dim, ParseError with the line number for any later line of
/// the wrong arity or with a non-numeric field.
EmbeddingMatrix load_pretrained(const std::filesystem::path& path, const Vocab& vocab,
                                std::size_t dim, std::uint64_t seed);

/// Row gather: [ids.size(), d]. Throws ValidationError for an empty id list
/// and IndexError for an id outside the table.
ad::Tensor lookup(ad::Tape& tape, const EmbeddingMatrix& embeddings,
                  std::span<const TokenId> ids);

}  // namespace hnsa
