#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace svvad {

// Deterministic RNG. Distributions are derived from the raw engine output by
// hand so that streams are bit-identical across standard library
// implementations, not just across runs.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; second draw is cached.
  double normal();

  // [0, n). Modulo bias is negligible for the n used here and keeps the
  // stream reproducible.
  size_t index(size_t n) { return static_cast<size_t>(engine_() % n); }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

// splitmix64 step; used to derive per-name / per-item seeds from a base seed.
uint64_t mix_seed(uint64_t a, uint64_t b);

uint64_t fnv1a_hash(const std::string& s);
uint64_t fnv1a_hash_bytes(const void* data, size_t n);

}  // namespace svvad
