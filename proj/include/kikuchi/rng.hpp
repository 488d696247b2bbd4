#pragma once

#include <cstdint>

namespace kikuchi {

// Counter-based generator: every draw is a pure function of
// (seed, stream, counter). Sampling loops indexed by subset rank are
// order-independent, so parallel generation reproduces the serial output.

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
} // namespace detail

enum class Stream : std::uint64_t {
  edges = 1,
  labels = 2,
  batch_mask = 3,
  iteration = 4,
  shots = 5,
  sampling = 6,
  cells = 7,
};

inline std::uint64_t counter_hash(std::uint64_t seed, Stream stream, std::uint64_t counter) {
  std::uint64_t h = detail::splitmix64(seed);
  h = detail::splitmix64(h ^ (static_cast<std::uint64_t>(stream) << 32));
  return detail::splitmix64(h ^ counter);
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::uint64_t seed, Stream stream, std::uint64_t counter) {
  return static_cast<double>(counter_hash(seed, stream, counter) >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, m) by 128-bit multiply-shift.
inline std::uint64_t uniform_int(std::uint64_t seed, Stream stream, std::uint64_t counter,
                                 std::uint64_t m) {
  const std::uint64_t h = counter_hash(seed, stream, counter);
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(h) * static_cast<unsigned __int128>(m)) >> 64);
}

// Small stateful view for iterative consumers (solver start vectors, shot
// sampling). Still counter-based underneath: state is just the next counter.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, Stream stream) : seed_(seed), stream_(stream) {}

  double next_double() { return uniform01(seed_, stream_, counter_++); }
  std::uint64_t next_u64() { return counter_hash(seed_, stream_, counter_++); }
  std::uint64_t next_int(std::uint64_t m) { return uniform_int(seed_, stream_, counter_++, m); }
  // symmetric uniform on [-1, 1)
  double next_sym() { return 2.0 * next_double() - 1.0; }

 private:
  std::uint64_t seed_;
  Stream stream_;
  std::uint64_t counter_ = 0;
};

} // namespace kikuchi
