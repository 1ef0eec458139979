#include "ssdrel/block_store.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <string>

namespace ssdrel {
namespace {
const BlockStore::Block kZeroBlock{};
}

BlockStore::BlockStore(std::uint64_t capacity_bytes) {
  if (!block_aligned(capacity_bytes)) throw std::invalid_argument("capacity must be a multiple of 4 KiB");
  blocks_.resize(capacity_bytes / kBlockBytes);
  stamps_.resize(blocks_.size(), 0);
}

BlockStore::BlockStore(const BlockStore& other)
    : blocks_(other.blocks_.size()), stamps_(other.stamps_), writes_(other.writes_) {
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    if (other.blocks_[i]) blocks_[i] = std::make_unique<Block>(*other.blocks_[i]);
}

BlockStore& BlockStore::operator=(const BlockStore& other) {
  if (this != &other) *this = BlockStore(other);
  return *this;
}

void BlockStore::check_range(std::uint64_t address, std::uint64_t len) const {
  if (!block_aligned(address) || !block_aligned(len))
    throw std::invalid_argument("unaligned block store access at " + std::to_string(address));
  if (address > capacity_bytes() || len > capacity_bytes() - address)
    throw std::out_of_range("block store access beyond capacity at " + std::to_string(address));
}

void BlockStore::write(std::uint64_t address, std::span<const std::uint8_t> data) {
  check_range(address, data.size());
  for (std::uint64_t off = 0; off < data.size(); off += kBlockBytes) {
    const auto i = (address + off) / kBlockBytes;
    auto& b = blocks_[i];
    if (!b) b = std::make_unique_for_overwrite<Block>();
    stamps_[i] = ++writes_;
    std::memcpy(b->data(), data.data() + off, kBlockBytes);
  }
}

void BlockStore::read(std::uint64_t address, std::span<std::uint8_t> out) const {
  check_range(address, out.size());
  for (std::uint64_t off = 0; off < out.size(); off += kBlockBytes) {
    const auto& b = blocks_[(address + off) / kBlockBytes];
    std::memcpy(out.data() + off, b ? b->data() : kZeroBlock.data(), kBlockBytes);
  }
}

std::span<const std::uint8_t, kBlockBytes> BlockStore::block(std::uint64_t index) const {
  const auto& b = blocks_.at(index);
  return b ? std::span<const std::uint8_t, kBlockBytes>(*b) : std::span<const std::uint8_t, kBlockBytes>(kZeroBlock);
}

bool BlockStore::operator==(const BlockStore& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto a = block(i), b = other.block(i);
    if (!std::equal(a.begin(), a.end(), b.begin())) return false;
  }
  return true;
}

}  // namespace ssdrel
