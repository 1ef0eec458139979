#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace ssdrel {

/// splitmix64 finalizer; derives independent stream seeds from one base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Seeded generator with portable draws. std:: distributions are avoided
/// because their output differs between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Uniform in [lo, hi].
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) { return lo + below(hi - lo + 1); }
  /// Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return p > 0.0 && unit() < p; }
  void fill(std::uint8_t* out, std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ssdrel
