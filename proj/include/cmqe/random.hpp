#pragma once

// Platform-stable seeded permutations.
//
// std::mt19937_64 has a fully specified output sequence, but the standard
// distributions do not, so the bounded draw and the shuffle are spelled out
// here rather than delegated to <random>'s distributions.

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace cmqe {

// Uniform integer in [0, bound) by rejection; bound must be > 0.
inline std::uint64_t uniform_below(std::mt19937_64& engine, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
  for (;;) {
    const std::uint64_t r = engine();
    if (r >= threshold) return r % bound;
  }
}

// Fisher-Yates, descending: for i = n-1 .. 1 swap(v[i], v[uniform_below(i+1)]).
template <typename T>
void seeded_shuffle(std::span<T> items, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(engine, i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace cmqe
