#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>

namespace vsgg {

// Deterministic RNG with explicit, serializable state (xoshiro256++).
// std::normal_distribution is implementation-defined, so the transforms
// here are spelled out; every stream is reproducible byte-for-byte.
class Rng {
 public:
  Rng() : Rng(0x9e3779b97f4a7c15ULL) {}

  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  // Derives an independent stream from a seed plus a key path, e.g.
  // Rng::from_key(seed, {kVideo, video_id, kTrajectory}).
  static Rng from_key(uint64_t seed, std::initializer_list<uint64_t> key) {
    uint64_t acc = mix(seed);
    for (uint64_t word : key) acc = mix(acc ^ mix(word + 0x9e3779b97f4a7c15ULL));
    return Rng(acc);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive bounds. Rejection sampling keeps the draw unbiased.
  int uniform_int(int lo, int hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t draw = next_u64();
    while (draw >= limit) draw = next_u64();
    return lo + static_cast<int>(draw % span);
  }

  // Box-Muller; consumes exactly two uniform draws per call so the
  // stream position never depends on cached spares.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
      const int j = uniform_int(0, static_cast<int>(i));
      std::swap(first[i], first[j]);
    }
  }

  std::array<uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

 private:
  static uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    return mix_body(x);
  }

  static uint64_t mix(uint64_t x) { return mix_body(x + 0x9e3779b97f4a7c15ULL); }

  static uint64_t mix_body(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<uint64_t, 4> state_{};
};

// Stream key tags used across the project. Values are arbitrary but frozen:
// changing them changes every generated dataset.
enum StreamTag : uint64_t {
  kTagVideo = 101,
  kTagTrajectory = 102,
  kTagDetector = 103,
  kTagObjectNoise = 104,
  kTagUnionNoise = 105,
  kTagPadding = 106,
  kTagTraining = 107,
  kTagClassTable = 108,
  kTagPositional = 109,
  kTagBoxExpansion = 110,
  kTagInit = 111,
  kTagRetry = 112,
  kTagLoss = 113,
  kTagShuffle = 114,
  kTagStage2 = 115,
};

}  // namespace vsgg
