#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace macn {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 1469598103934665603ULL);

// Seeded generator that can derive independent child streams by tag, so that
// every consumer (initialisation, world generation, splits) gets its own
// reproducible stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }
  Rng split(std::string_view tag) const;
  Rng split(std::uint64_t index) const;

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace macn
