#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace venom {

// splitmix64 finalizer. Used both as the generator step and as the seed
// mixing function for sub-streams.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic sub-seed derivation: stream k of a master seed is
// mix64(master + GOLDEN * (k + 1)). Every seeded stage of the pipeline
// derives its seed this way so stage-level reruns reproduce full runs.
inline std::uint64_t sub_seed(std::uint64_t master, std::uint64_t stream) {
  return mix64(master + 0x9e3779b97f4a7c15ULL * (stream + 1));
}

// Self-contained splitmix64 generator. The standard library distributions
// are implementation-defined, so all sampling goes through this.
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next_u64() {
    state += 0x9e3779b97f4a7c15ULL;
    return mix64(state);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n > 0. Lemire multiply-shift.
  std::uint64_t uniform_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  int uniform_int(int lo, int hi_inclusive) {
    return lo + static_cast<int>(uniform_below(
                    static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
  }

  // Standard normal via Box-Muller. No spare caching so the draw count per
  // call is fixed, which keeps independent transcriptions in lockstep.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }
};

// Fisher-Yates shuffle driven by Rng.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.uniform_below(i);
    std::swap(v[i - 1], v[j]);
  }
}

// Front-loading partial Fisher-Yates: after the call the first
// min(k, v.size()) elements are a uniform draw without replacement.
template <typename T>
void partial_shuffle(std::vector<T>& v, std::size_t k, Rng& rng) {
  std::size_t n = v.size();
  if (k > n) k = n;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + rng.uniform_below(n - i);
    std::swap(v[i], v[j]);
  }
}

}  // namespace venom
