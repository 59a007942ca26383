#pragma once

#include <cstdint>
#include <string_view>

namespace mosaic {

// Counter-based stream built on the SplitMix64 finalizer (Steele, Lea and
// Flood, 2014). Value n of stream key K is mix64(K + (n + 1) * 0x9E3779B97F4A7C15).
// The mapping is fixed so other implementations can reproduce streams.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double next_unit();
  // Uniform on (0, 1].
  double next_unit_open();
  // Box-Muller; consumes two values per call, no cached spare.
  double next_normal();

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z);
// FNV-1a 64-bit.
std::uint64_t hash_name(std::string_view name);
// Stream key for a named entry under a global seed.
std::uint64_t stream_key(std::uint64_t seed, std::string_view name);

}  // namespace mosaic
