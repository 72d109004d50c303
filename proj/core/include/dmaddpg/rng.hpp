#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace dmaddpg {

// Seeded random source with portable distributions. The std:: distributions
// are implementation-defined, so uniform/normal draws are computed here from
// the raw 64-bit engine output to keep runs bit-reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), rejection-sampled (no modulo bias).
  std::uint64_t index(std::uint64_t n);

  // Standard normal via Box-Muller; the spare variate is cached.
  double normal();

  // Independent child stream derived from this generator's seed and a label.
  // Does not advance this generator.
  static Rng stream(std::uint64_t root_seed, std::string_view label);

  std::string save_state() const;
  void load_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finalizer; used to derive per-consumer seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace dmaddpg
