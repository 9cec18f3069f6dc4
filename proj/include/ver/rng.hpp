#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ver::rng {

// splitmix64 step. Small, fast, and fully portable: identical output on every
// platform, unlike the standard <random> distributions.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Mixes a seed with a stream index so that streams are random-access:
// stream(seed, i) is independent of stream(seed, j) without sequential state.
inline uint64_t derive_stream(uint64_t seed, uint64_t index) {
  uint64_t s = seed ^ (0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL);
  splitmix64(s);
  uint64_t t = splitmix64(s);
  return t;
}

inline uint64_t derive_stream(uint64_t seed, uint64_t a, uint64_t b) {
  return derive_stream(derive_stream(seed, a), b);
}

inline uint64_t derive_stream(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  return derive_stream(derive_stream(seed, a, b), c);
}

// Counter-based deterministic generator.
class Rng {
public:
  explicit Rng(uint64_t stream_seed) : state_(stream_seed) {}

  uint64_t next_u64() { return splitmix64(state_); }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Rejection-free widening multiply would bias by
  // at most 2^-64; we use rejection sampling for exactness anyway.
  uint64_t next_below(uint64_t n) {
    if (n == 0) return 0;
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Uniform in [-mag, +mag]; zero-mean by symmetry.
  double next_symmetric(double mag) { return (2.0 * next_double() - 1.0) * mag; }

  // k distinct values drawn from [0, n) via partial Fisher-Yates on a dense
  // index vector. Order of the result is the draw order.
  std::vector<uint64_t> sample_distinct(uint64_t n, uint64_t k) {
    std::vector<uint64_t> pool(n);
    for (uint64_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<uint64_t> out;
    out.reserve(k);
    for (uint64_t i = 0; i < k && i < n; ++i) {
      uint64_t j = i + next_below(n - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

  // Samples an index from an (unnormalized is fine) nonnegative weight vector.
  size_t next_categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = next_double() * total;
    double acc = 0.0;
    for (size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.empty() ? 0 : weights.size() - 1;
  }

private:
  uint64_t state_;
};

}  // namespace ver::rng
