#include "ssdrel/checksum.hpp"

#include <array>
#include <bit>
#include <memory>
#include <unordered_map>
#include <cstring>

namespace ssdrel {
namespace {

constexpr std::uint64_t kPoly = 0xC96C5795D7870F42ULL;  // reflected 0x42F0E1EBA9EA3693

using Table = std::array<std::array<std::uint64_t, 256>, 8>;

constexpr Table make_tables() {
  Table t{};
  for (std::uint64_t n = 0; n < 256; ++n) {
    std::uint64_t c = n;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? (c >> 1) ^ kPoly : c >> 1;
    t[0][n] = c;
  }
  for (std::size_t n = 0; n < 256; ++n) {
    std::uint64_t c = t[0][n];
    for (std::size_t k = 1; k < 8; ++k) {
      c = t[0][c & 0xff] ^ (c >> 8);
      t[k][n] = c;
    }
  }
  return t;
}

constexpr Table kTables = make_tables();

// Raw register update: no init/xorout applied.
std::uint64_t crc_raw(std::uint64_t crc, const std::uint8_t* p, std::size_t n) {
  while (n && (reinterpret_cast<std::uintptr_t>(p) & 7)) {
    crc = kTables[0][(crc ^ *p++) & 0xff] ^ (crc >> 8);
    --n;
  }
  while (n >= 8) {
    std::uint64_t w;
    std::memcpy(&w, p, 8);
    if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap64(w);
    crc ^= w;
    crc = kTables[7][crc & 0xff] ^ kTables[6][(crc >> 8) & 0xff] ^
          kTables[5][(crc >> 16) & 0xff] ^ kTables[4][(crc >> 24) & 0xff] ^
          kTables[3][(crc >> 32) & 0xff] ^ kTables[2][(crc >> 40) & 0xff] ^
          kTables[1][(crc >> 48) & 0xff] ^ kTables[0][crc >> 56];
    p += 8;
    n -= 8;
  }
  while (n--) crc = kTables[0][(crc ^ *p++) & 0xff] ^ (crc >> 8);
  return crc;
}

// GF(2) matrix helpers for combine, same scheme as zlib's crc32_combine.
using Matrix = std::array<std::uint64_t, 64>;

std::uint64_t gf2_times(const Matrix& m, std::uint64_t v) {
  std::uint64_t sum = 0;
  for (int i = 0; v; ++i, v >>= 1)
    if (v & 1) sum ^= m[i];
  return sum;
}

void gf2_square(Matrix& sq, const Matrix& m) {
  for (int n = 0; n < 64; ++n) sq[n] = gf2_times(m, m[n]);
}

// Advances a raw register over `len` zero bytes.
std::uint64_t shift_zeros(std::uint64_t crc, std::uint64_t len) {
  if (len == 0) return crc;
  Matrix odd{}, even{};
  odd[0] = kPoly;
  std::uint64_t row = 1;
  for (int n = 1; n < 64; ++n) {
    odd[n] = row;
    row <<= 1;
  }
  gf2_square(even, odd);  // 2 zero bits
  gf2_square(odd, even);  // 4 zero bits
  do {
    gf2_square(even, odd);
    if (len & 1) crc = gf2_times(even, crc);
    len >>= 1;
    if (!len) break;
    gf2_square(odd, even);
    if (len & 1) crc = gf2_times(odd, crc);
    len >>= 1;
  } while (len);
  return crc;
}

}  // namespace

Checksum64 checksum(std::span<const std::uint8_t> bytes) {
  return checksum_update(Checksum64{0}, bytes);
}

Checksum64 checksum_update(Checksum64 crc, std::span<const std::uint8_t> bytes) {
  return {~crc_raw(~crc.value, bytes.data(), bytes.size())};
}

Checksum64 checksum_combine(Checksum64 a, Checksum64 b, std::uint64_t len_b) {
  // Linearity: crc(A||B) = shift(crc(A), |B|) ^ crc(B), with init/xorout folded in.
  // Sub-request sizes repeat, so the shift operators are kept per thread.
  constexpr std::size_t kMaxCached = 64;
  thread_local std::unordered_map<std::uint64_t, std::unique_ptr<ChecksumShift>> cache;
  auto it = cache.find(len_b);
  if (it == cache.end()) {
    if (cache.size() >= kMaxCached) return {shift_zeros(a.value, len_b) ^ b.value};
    it = cache.emplace(len_b, std::make_unique<ChecksumShift>(len_b)).first;
  }
  return it->second->combine(a, b);
}

Checksum64 checksum_zeros(std::uint64_t len) {
  return {~shift_zeros(~std::uint64_t{0}, len)};
}

ChecksumShift::ChecksumShift(std::uint64_t len) {
  // Column images of the linear operator, folded into per-byte tables.
  std::uint64_t column[64];
  for (int i = 0; i < 64; ++i) column[i] = shift_zeros(std::uint64_t{1} << i, len);
  for (int k = 0; k < 8; ++k) {
    for (int v = 0; v < 256; ++v) {
      std::uint64_t r = 0;
      for (int b = 0; b < 8; ++b)
        if (v & (1 << b)) r ^= column[8 * k + b];
      table_[k][v] = r;
    }
  }
}

std::string to_hex(Checksum64 c) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = kDigits[c.value & 0xf];
    c.value >>= 4;
  }
  return s;
}

bool from_hex(std::string_view text, Checksum64& out) {
  if (text.size() != 16) return false;
  std::uint64_t v = 0;
  for (char ch : text) {
    int d;
    if (ch >= '0' && ch <= '9') d = ch - '0';
    else if (ch >= 'a' && ch <= 'f') d = ch - 'a' + 10;
    else if (ch >= 'A' && ch <= 'F') d = ch - 'A' + 10;
    else return false;
    v = (v << 4) | static_cast<std::uint64_t>(d);
  }
  out.value = v;
  return true;
}

}  // namespace ssdrel
