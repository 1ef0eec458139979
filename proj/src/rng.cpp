#include "ssdrel/rng.hpp"

#include <cstring>

namespace ssdrel {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + (stream + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Lemire's multiply-shift with rejection.
  unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = -n % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(next()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

void Rng::fill(std::uint8_t* out, std::size_t n) {
  while (n >= 8) {
    const std::uint64_t w = next();
    std::memcpy(out, &w, 8);
    out += 8;
    n -= 8;
  }
  if (n) {
    const std::uint64_t w = next();
    std::memcpy(out, &w, n);
  }
}

}  // namespace ssdrel
