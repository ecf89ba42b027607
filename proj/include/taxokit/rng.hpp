#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace taxokit {

// All randomness in the toolkit flows through mt19937_64 plus the bounded
// draws below. The raw engine output is fully specified by the standard, so
// seeded results are reproducible across platforms; std::shuffle and the
// distribution classes are not, which is why they are avoided here.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Derives an independent stream seed from a base seed, a textual tag
// (taxonomy id, file name, ...) and a numeric salt (run index, ...).
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag,
                              std::uint64_t salt = 0) {
  return splitmix64(seed ^ splitmix64(fnv1a64(tag) + 0x9e3779b97f4a7c15ull * salt));
}

// Unbiased draw in [0, n).
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Draw in [0, 1) with 53 bits of precision.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Fisher-Yates; deterministic for a given engine state.
template <typename T>
void shuffle_vec(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_below(rng, i)]);
  }
}

// First k elements of a random permutation of [0, n). Requires k <= n.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
  if (k > n) throw std::invalid_argument("sample_indices: k exceeds population size");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
    std::swap(idx[i], idx[i + uniform_below(rng, n - i)]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace taxokit
