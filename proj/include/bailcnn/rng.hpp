#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace bailcnn {

namespace detail {

/// splitmix64, used only to spread user seeds into sub-stream seeds.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Stream ids for deriving independent sub-generators from one run seed.
/// The mapping seed -> sub-seed is splitmix64(seed + stream id), so two
/// streams never share state and the whole run is reproducible from the
/// single configured seed.
enum class RngStream : uint64_t {
  kInit = 1,
  kDropout = 2,
  kShuffle = 3,
  kHoldout = 4,
};

/// Deterministic random source. mt19937_64 has a fully specified output
/// sequence, and all float/int draws below avoid std distributions (whose
/// results are implementation-defined), so identical seeds give identical
/// streams on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  static Rng derive(uint64_t seed, RngStream stream, uint64_t salt = 0) {
    uint64_t s = seed + (static_cast<uint64_t>(stream) << 32) + salt;
    return Rng(detail::splitmix64(s));
  }

  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  /// Unbiased uniform integer in [0, n). Rejection sampling keeps the
  /// draw deterministic and exact for any n.
  uint64_t next_below(uint64_t n) {
    if (n <= 1) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  /// Fisher-Yates with our own bounded draw; std::shuffle is
  /// implementation-defined and would break bit-reproducibility.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bailcnn
