// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>
#include <utility>
#include <vector>

namespace hnsa {

/// xoshiro256** seeded through splitmix64. The output sequence is fully
/// specified, so splits and synthetic corpora reproduce across platforms
/// and standard libraries (std::uniform_*_distribution and std::shuffle do
/// not give that guarantee).
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

  /// Fisher-Yates, walking from the back.
  template <typename T>
  void shuffle(std::vector<T>& items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_;
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Independent generator for one purpose ("split", "init", "shuffle",
/// "synth", ...) derived from a root seed.
Rng substream(std::uint64_t root_seed, std::string_view purpose) noexcept;

}  // namespace hnsa
