#include "ssdrel/flying_scan.hpp"

#include <limits>

namespace ssdrel {

namespace {

const ChecksumShift& block_shift() {
  static const ChecksumShift shift(kBlockBytes);
  return shift;
}

bool outside(std::uint64_t start, const DataPacket& p) {
  return start + p.size_bytes <= p.address || start >= p.address + p.size_bytes;
}

}  // namespace

BlockChecksumIndex::BlockChecksumIndex(const BlockStore& image) { refresh(image); }

void BlockChecksumIndex::refresh(const BlockStore& image) {
  if (sums_.size() != image.block_count()) {
    sums_.assign(image.block_count(), checksum_zeros(kBlockBytes));
    stamps_.assign(image.block_count(), 0);
  }
  std::vector<std::int64_t> stale;
  for (std::size_t i = 0; i < sums_.size(); ++i)
    if (stamps_[i] != image.stamp(i)) stale.push_back(static_cast<std::int64_t>(i));
  const auto n = static_cast<std::int64_t>(stale.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < n; ++k) {
    const auto i = stale[k];
    sums_[i] = checksum(image.block(i));
    stamps_[i] = image.stamp(i);
  }
}

BlockChecksumIndex BlockChecksumIndex::build_serial(const BlockStore& image) {
  BlockChecksumIndex idx;
  idx.sums_.reserve(image.block_count());
  for (std::uint64_t i = 0; i < image.block_count(); ++i) {
    idx.sums_.push_back(checksum(image.block(i)));
    idx.stamps_.push_back(image.stamp(i));
  }
  return idx;
}

Checksum64 BlockChecksumIndex::window(std::size_t first, std::size_t n) const {
  const auto& shift = block_shift();
  Checksum64 c = sums_[first];
  for (std::size_t i = 1; i < n; ++i) c = shift.combine(c, sums_[first + i]);
  return c;
}

std::optional<std::uint64_t> scan_flying(const BlockChecksumIndex& index, const DataPacket& p) {
  const std::size_t total = p.size_bytes / kBlockBytes;
  if (total == 0 || total > index.block_count()) return std::nullopt;
  const auto last = static_cast<std::int64_t>(index.block_count() - total);

  auto matches = [&](std::size_t start) {
    std::size_t b = start;
    for (const auto& s : p.sub_requests) {
      std::size_t n = s.size_bytes / kBlockBytes;
      if (index.window(b, n) != s.data_checksum) return false;
      b += n;
    }
    return true;
  };

  std::int64_t best = std::numeric_limits<std::int64_t>::max();
#pragma omp parallel for schedule(dynamic, 256) reduction(min : best)
  for (std::int64_t s = 0; s <= last; ++s) {
    if (s >= best) continue;
    if (outside(static_cast<std::uint64_t>(s) * kBlockBytes, p) && matches(static_cast<std::size_t>(s))) best = s;
  }
  if (best == std::numeric_limits<std::int64_t>::max()) return std::nullopt;
  return static_cast<std::uint64_t>(best) * kBlockBytes;
}

std::optional<std::uint64_t> scan_flying(const BlockStore& image, const DataPacket& p) {
  return scan_flying(BlockChecksumIndex(image), p);
}

std::optional<std::uint64_t> scan_flying_reference(const BlockStore& image, const DataPacket& p) {
  if (p.size_bytes == 0 || p.size_bytes > image.capacity_bytes()) return std::nullopt;
  std::vector<std::uint8_t> buf;
  for (std::uint64_t start = 0; start + p.size_bytes <= image.capacity_bytes(); start += kBlockBytes) {
    if (!outside(start, p)) continue;
    bool all = true;
    std::uint64_t a = start;
    for (const auto& s : p.sub_requests) {
      buf.resize(s.size_bytes);
      image.read(a, buf);
      if (checksum(buf) != s.data_checksum) {
        all = false;
        break;
      }
      a += s.size_bytes;
    }
    if (all) return start;
  }
  return std::nullopt;
}

}  // namespace ssdrel
