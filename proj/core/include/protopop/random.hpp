#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace protopop {

// xoshiro256** seeded through splitmix64. Every distribution here is
// implemented in-house so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform();
  // Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);
  // Standard normal via Box-Muller (cached second draw).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_[4];
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Independent seed for a numbered sub-stream (per class, per tree, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace protopop
