#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "ssdrel/units.hpp"

namespace ssdrel {

/// Sparse byte store at 4 KiB granularity. Unwritten blocks read as zeros.
class BlockStore {
 public:
  using Block = std::array<std::uint8_t, kBlockBytes>;

  explicit BlockStore(std::uint64_t capacity_bytes = 0);
  BlockStore(const BlockStore& other);
  BlockStore& operator=(const BlockStore& other);
  BlockStore(BlockStore&&) noexcept = default;
  BlockStore& operator=(BlockStore&&) noexcept = default;

  std::uint64_t capacity_bytes() const { return blocks_.size() * kBlockBytes; }
  std::uint64_t block_count() const { return blocks_.size(); }

  /// Address and length must be 4 KiB aligned and inside the store.
  void write(std::uint64_t address, std::span<const std::uint8_t> data);
  void read(std::uint64_t address, std::span<std::uint8_t> out) const;

  bool written(std::uint64_t block) const { return blocks_[block] != nullptr; }
  /// Changes whenever the block is written; 0 for never-written blocks.
  std::uint64_t stamp(std::uint64_t block) const { return stamps_[block]; }
  /// View of one block; a shared zero block when unwritten.
  std::span<const std::uint8_t, kBlockBytes> block(std::uint64_t index) const;

  bool operator==(const BlockStore& other) const;

 private:
  void check_range(std::uint64_t address, std::uint64_t len) const;

  std::vector<std::unique_ptr<Block>> blocks_;
  std::vector<std::uint64_t> stamps_;
  std::uint64_t writes_ = 0;
};

}  // namespace ssdrel
