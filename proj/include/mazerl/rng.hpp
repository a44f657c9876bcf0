#ifndef MAZERL_RNG_HPP_
#define MAZERL_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string_view>
#include <vector>

namespace mazerl {

// SplitMix64 step. Used for seed derivation only.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a, 64-bit. Stable across platforms; used for cache keys and
// seed derivation from strings.
inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Derives a child seed from a parent seed and a stream tag. Every
// component that needs randomness gets its own derived stream so that
// adding or reordering consumers never perturbs unrelated streams.
inline uint64_t derive_seed(uint64_t parent, uint64_t stream) {
  uint64_t s = parent ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  uint64_t a = splitmix64(s);
  uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

inline uint64_t derive_seed(uint64_t parent, std::string_view tag) {
  return derive_seed(parent, fnv1a64(tag));
}

// PCG32 (O'Neill). Small, fast, and fully specified, so results are
// identical on every platform and standard library.
class Rng {
 public:
  Rng() : Rng(0x853c49e6748fea9bULL, 0xda3e39cb94b95bdbULL) {}
  explicit Rng(uint64_t seed, uint64_t stream = 0xda3e39cb94b95bdbULL) {
    state_ = 0u;
    inc_ = (stream << 1u) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  uint32_t next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
  }

  uint64_t next_u64() {
    uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Unbiased integer in [0, bound) via rejection sampling.
  uint32_t uniform_int(uint32_t bound) {
    if (bound <= 1) return 0;
    uint32_t threshold = (-bound) % bound;
    for (;;) {
      uint32_t r = next_u32();
      if (r >= threshold) return r % bound;
    }
  }

  // Double in [0, 1) with 53 random bits.
  double uniform_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Float in [0, 1) with 24 random bits.
  float uniform_float() {
    return static_cast<float>(next_u32() >> 8) * 0x1.0p-24f;
  }

  // Box-Muller; caches the spare draw.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform_double();
    } while (u1 <= 1e-300);
    u2 = uniform_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Fisher-Yates with explicit draws (std::shuffle is not portable
  // across standard libraries).
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_int(static_cast<uint32_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_ = 0;
  uint64_t inc_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mazerl

#endif  // MAZERL_RNG_HPP_
