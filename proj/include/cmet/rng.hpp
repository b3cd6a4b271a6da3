#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cmet {

// xoshiro256** with splitmix64 seeding. Self-contained so that streams are
// reproducible across compilers and platforms; std::normal_distribution and
// friends are implementation-defined and would break the bit-exactness
// contract between runs of different builds.
class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller. Draws two uniforms per call and keeps
  // no cached spare, so the state alone fully describes the stream (needed
  // for checkpoint/resume equivalence).
  double normal() {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::array<uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<uint64_t, 4> state_{};
};

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named sub-stream of a root seed. All randomness in a run flows from the
// single config seed through these, so subcommands are independently
// reproducible.
inline Rng substream(uint64_t root_seed, std::string_view name) {
  uint64_t x = root_seed ^ fnv1a(name);
  return Rng(Rng::splitmix64(x));
}

// Order-independent per-sample seed (world generation parallelizes over
// samples without changing results).
inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  uint64_t x = seed;
  x ^= 0x9e3779b97f4a7c15ULL + a;
  x = Rng::splitmix64(x);
  x ^= 0xc2b2ae3d27d4eb4fULL + b;
  x = Rng::splitmix64(x);
  x ^= 0x165667b19e3779f9ULL + c;
  return Rng::splitmix64(x);
}

}  // namespace cmet
