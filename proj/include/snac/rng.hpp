#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

namespace snac {

// Seeded generator with distribution code of our own, so sequences do not
// depend on the standard library's implementation-defined distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // N(0, 1), Box-Muller without caching
  std::size_t index(std::size_t n);      // [0, n)

  // Textual engine state; restore() reproduces the exact continuation.
  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 mix of (seed, stream): independent per-stream seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace snac
