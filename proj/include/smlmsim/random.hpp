// ============================================================================
// random.hpp -- seedable random streams with counter-based substreams
//
// Every simulated frame draws from its own stream, derived from the master
// seed and the frame index, so outputs never depend on how frames are
// scheduled across workers.
// ============================================================================
#pragma once
#include <array>
#include <cstdint>
#include <limits>

namespace smlm {

/// SplitMix64 finalizer; used to expand seeds and mix counters.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Purpose tags so that the same frame index yields unrelated streams for
/// emitter sampling, photon assignment and camera noise.
enum class StreamPurpose : std::uint64_t {
  sampling = 1,
  photons = 2,
  noise = 3,
  curve = 4,
  pilot = 5,
};

// ============================================================================
// RandomStream -- xoshiro256** engine (UniformRandomBitGenerator)
// ============================================================================
class RandomStream {
public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed = 0) noexcept { reseed(seed); }

  /// Independent substream: f(master_seed, purpose, index).
  static RandomStream derive(std::uint64_t master_seed, StreamPurpose purpose,
                             std::uint64_t index) noexcept {
    std::uint64_t h = splitmix64(master_seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    h = splitmix64(h ^ index);
    return RandomStream(h);
  }

  /// Raw state constructor, mainly for reference-vector tests.
  static RandomStream from_state(const std::array<std::uint64_t, 4>& s) noexcept {
    RandomStream r;
    r.s_ = s;
    return r;
  }

  void reseed(std::uint64_t seed) noexcept {
    std::uint64_t x = seed;
    for (auto& w : s_) {
      x += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      w = z ^ (z >> 31);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
};

}  // namespace smlm
