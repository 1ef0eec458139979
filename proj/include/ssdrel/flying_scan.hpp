#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ssdrel/block_store.hpp"
#include "ssdrel/checksum.hpp"
#include "ssdrel/packet.hpp"

namespace ssdrel {

/// Checksum of every 4 KiB block of an image, for window checksums by combine.
class BlockChecksumIndex {
 public:
  BlockChecksumIndex() = default;
  /// Parallel over blocks.
  explicit BlockChecksumIndex(const BlockStore& image);
  static BlockChecksumIndex build_serial(const BlockStore& image);
  /// Rehashes only the blocks written since the last build of this image.
  void refresh(const BlockStore& image);

  std::size_t block_count() const { return sums_.size(); }
  Checksum64 block(std::size_t i) const { return sums_[i]; }
  /// Checksum of `n` consecutive blocks starting at `first`.
  Checksum64 window(std::size_t first, std::size_t n) const;

  bool operator==(const BlockChecksumIndex& o) const { return sums_ == o.sums_; }

 private:
  std::vector<Checksum64> sums_;
  std::vector<std::uint64_t> stamps_;
};

/// Lowest block-aligned address, with the region outside the packet's
/// destination, where every sub-request's data checksum matches in order.
std::optional<std::uint64_t> scan_flying(const BlockChecksumIndex& index, const DataPacket& packet);
std::optional<std::uint64_t> scan_flying(const BlockStore& image, const DataPacket& packet);

/// Brute-force reference: checksums raw bytes at every candidate address.
std::optional<std::uint64_t> scan_flying_reference(const BlockStore& image, const DataPacket& packet);

}  // namespace ssdrel
