#pragma once

#include <cstdint>

namespace ssdrel {

using SimTime = std::int64_t;  // simulated microseconds

inline constexpr std::uint64_t KiB = 1024;
inline constexpr std::uint64_t MiB = 1024 * KiB;
inline constexpr std::uint64_t GiB = 1024 * MiB;

inline constexpr std::uint64_t kBlockBytes = 4 * KiB;
inline constexpr std::uint64_t kDefaultMaxSubBytes = 64 * KiB;

inline constexpr SimTime kSecond = 1'000'000;
inline constexpr SimTime kMillisecond = 1'000;

inline constexpr bool block_aligned(std::uint64_t v) { return v % kBlockBytes == 0; }

}  // namespace ssdrel
