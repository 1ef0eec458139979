#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

namespace ssdrel {

/// 64-bit digest used for every checksum field of a data packet.
///
/// The algorithm is CRC-64/XZ (ECMA-182 polynomial, reflected, init and
/// xorout all ones). Check value for "123456789" is 0x995DC9BBDF1939FA.
struct Checksum64 {
  std::uint64_t value = 0;

  friend constexpr auto operator<=>(const Checksum64&, const Checksum64&) = default;
};

Checksum64 checksum(std::span<const std::uint8_t> bytes);

/// Continues a running CRC. `crc` is a previous result (or the empty digest).
Checksum64 checksum_update(Checksum64 crc, std::span<const std::uint8_t> bytes);

/// Digest of A||B given digest(A), digest(B) and len(B).
Checksum64 checksum_combine(Checksum64 a, Checksum64 b, std::uint64_t len_b);

/// Digest of `len` zero bytes, computed without touching memory.
Checksum64 checksum_zeros(std::uint64_t len);

/// Precomputed "append len zero bytes" operator for repeated combines with
/// a fixed right-hand length: combine(a, b) == checksum_combine(a, b, len).
class ChecksumShift {
 public:
  explicit ChecksumShift(std::uint64_t len);
  Checksum64 combine(Checksum64 a, Checksum64 b) const { return {apply(a.value) ^ b.value}; }
  std::uint64_t apply(std::uint64_t crc) const {
    std::uint64_t r = 0;
    for (int k = 0; k < 8; ++k) r ^= table_[k][(crc >> (8 * k)) & 0xff];
    return r;
  }

 private:
  std::uint64_t table_[8][256];
};

std::string to_hex(Checksum64 c);
/// Parses exactly 16 lowercase or uppercase hex digits. Returns false on bad input.
bool from_hex(std::string_view text, Checksum64& out);

}  // namespace ssdrel
