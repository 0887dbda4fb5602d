#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace peerloss {

// Seeded generator with distribution helpers implemented here rather than
// through <random> distributions, whose output is implementation-defined.
// The engine itself (mt19937_64) is fully specified, so streams are
// bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [0, n) by rejection; n > 0.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// Mixes a master seed with a stream tag and index (splitmix64 finaliser) so
// independent parts of a run draw from unrelated streams.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t index = 0);

std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace peerloss
