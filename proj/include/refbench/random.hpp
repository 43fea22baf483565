#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace refbench::rnd {

// Seeded generator with platform-stable bounded draws. std::mt19937_64 output
// is fully specified by the standard; the bounded reduction below avoids
// std::uniform_int_distribution, whose mapping is implementation-defined.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform draw in [0, n). Rejection sampling, unbiased.
  std::uint64_t bounded(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t threshold = (0u - n) % n;
    for (;;) {
      std::uint64_t r = engine_();
      if (r >= threshold) return r % n;
    }
  }

 private:
  std::mt19937_64 engine_;
};

// FNV-1a, used to derive per-item substream seeds from string ids.
inline std::uint64_t hash64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view key) {
  std::uint64_t h = hash64(key);
  // splitmix64 finalizer over the combination
  std::uint64_t z = seed ^ (h + 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace refbench::rnd
