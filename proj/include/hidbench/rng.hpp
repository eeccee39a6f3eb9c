#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace hidbench {

// SplitMix64 (Steele, Lea, Flood 2014). Chosen because the full algorithm
// fits in a few lines and is trivially re-implementable, so shuffles can be
// replayed bit-for-bit from another language given the same seed:
//
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform-ish integer in [0, bound) by 64x64->128 multiply-high.
  // bound must be > 0.
  constexpr std::uint64_t below(std::uint64_t bound) noexcept {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

 private:
  std::uint64_t state_;
};

// Fisher-Yates from the back: for i = n-1 .. 1, swap(a[i], a[below(i+1)]).
template <typename T>
void shuffle_in_place(std::span<T> items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

// The i-th output of SplitMix64(root). Distinct for distinct i because the
// state sequence never repeats within 2^64 steps and the mixer is a bijection.
constexpr std::uint64_t derive_seed(std::uint64_t root,
                                    std::uint64_t index) noexcept {
  SplitMix64 rng(root + index * 0x9E3779B97F4A7C15ULL);
  return rng.next();
}

}  // namespace hidbench
