#pragma once

#include <cstdint>

namespace ntklab {

// Counter-based generator: every output is a hash of (key, counter), so any
// slice of a stream can be produced independently and in parallel without
// changing the values. stream(id) derives a child key; initialization uses one
// stream per layer and per row, which makes it reproducible under any schedule.
// Gaussians come from Box-Muller (no rejection, so counters advance uniformly).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(mix(seed + kSeedDomain)) {}

  CounterRng stream(std::uint64_t id) const {
    return CounterRng(mix(key_ + kStreamDomain) ^ mix(id + kIdDomain), 0);
  }

  std::uint64_t next_u64() { return mix(key_ ^ mix(counter_++ + kValueDomain)); }

  // Uniform in (0, 1]; never 0, so log() is safe.
  double next_unit() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double next_gaussian();

  double next_sign() { return (next_u64() & 1u) ? 1.0 : -1.0; }

 private:
  CounterRng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t kSeedDomain = 0x243f6a8885a308d3ull;
  static constexpr std::uint64_t kStreamDomain = 0x13198a2e03707344ull;
  static constexpr std::uint64_t kIdDomain = 0xa4093822299f31d0ull;
  static constexpr std::uint64_t kValueDomain = 0x082efa98ec4e6c89ull;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace ntklab
