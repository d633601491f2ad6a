// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace hnsa {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = kFnvOffset) noexcept {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

/// FNV-1a 64 of a file's bytes, as hex. Throws hnsa::Error if unreadable.
std::string hash_file(const std::filesystem::path& path);

}  // namespace hnsa
