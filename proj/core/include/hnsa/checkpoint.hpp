// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container:
//   8 bytes   magic "HNSACKPT"
//   8 bytes   little-endian u64 header length
//   header    UTF-8 JSON: format_version, dims, attention_enabled, topics,
//             vocab (non-reserved tokens in id order), vocab_hash,
//             params [{name, shape}] in storage order
//   payload   little-endian IEEE-754 float32 values of each parameter, in
//             header order, row-major
#pragma once

#include <filesystem>
#include <iosfwd>

#include "hnsa/model.hpp"

namespace hnsa {

inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(const Model& model, std::ostream& out);
/// Throws ParseError on a malformed container and ValidationError when the
/// header is inconsistent (vocab hash, parameter names or shapes).
Model read_checkpoint(std::istream& in);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace hnsa
