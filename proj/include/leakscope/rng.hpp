#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <utility>
#include <vector>

namespace leakscope::rng {

// SplitMix64 finalizer: statelessly maps a 64-bit input to a well-mixed
// 64-bit output.
inline uint64_t mix(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a over the bytes of a string, for building keys from identifiers.
inline uint64_t hash_str(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Combines heterogeneous parts (seed, ids, indices) into one stream key.
inline uint64_t key(std::initializer_list<uint64_t> parts) {
  uint64_t k = 0x6c656b73636f7065ULL;  // arbitrary domain constant
  for (uint64_t p : parts) k = mix(k ^ mix(p));
  return k;
}

// Counter-based stream: every draw is a pure function of (key, counter),
// so identical keys replay identical sequences regardless of call order
// or thread placement.
class Stream {
 public:
  explicit Stream(uint64_t k) : key_(k) {}

  uint64_t next_u64() { return mix(key_ ^ mix(counter_++)); }

  // Uniform in [0, 1) with 53 random bits.
  double next_uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased draw in [0, n) via rejection on the top of the range.
  uint64_t next_below(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
};

// Deterministic Fisher-Yates; std::shuffle is implementation-defined and
// would break byte-identical manifests across standard libraries.
template <typename T>
void shuffle(std::vector<T>& values, Stream& stream) {
  for (size_t i = values.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(stream.next_below(i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace leakscope::rng
