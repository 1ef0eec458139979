#include <gtest/gtest.h>

#include <random>

#include "ssdrel/flying_scan.hpp"
#include "ssdrel/offline_classify.hpp"

namespace ssdrel {
namespace {

using Bytes = std::vector<std::uint8_t>;

Bytes random_bytes(std::mt19937_64& g, std::size_t n) {
  Bytes v(n);
  for (auto& b : v) b = static_cast<std::uint8_t>(g());
  return v;
}

BlockStore random_disk(std::mt19937_64& g, std::uint64_t bytes) {
  BlockStore s(bytes);
  s.write(0, random_bytes(g, bytes));
  return s;
}

DataPacket packet_at(std::uint64_t address, const Bytes& payload, const BlockStore& disk,
                     std::uint32_t sub_bytes = 8 * KiB) {
  Bytes initial(payload.size());
  disk.read(address, initial);
  PacketOptions opts;
  opts.max_sub_bytes = sub_bytes;
  auto p = build_packet(OpKind::Write, address, payload, 0, initial, opts);
  p.complete_time = 100;
  return p;
}

// Byte comparison at every block-aligned address outside the destination.
std::optional<std::uint64_t> oracle(const BlockStore& disk, std::uint64_t dst, const Bytes& payload) {
  Bytes window(payload.size());
  for (std::uint64_t a = 0; a + payload.size() <= disk.capacity_bytes(); a += kBlockBytes) {
    if (a < dst + payload.size() && dst < a + payload.size()) continue;
    disk.read(a, window);
    if (window == payload) return a;
  }
  return std::nullopt;
}

TEST(FlyingScan, PayloadAtDestinationIsNotAFinding) {
  std::mt19937_64 g(1);
  auto disk = random_disk(g, 1 * MiB);
  auto payload = random_bytes(g, 24 * KiB);
  auto p = packet_at(64 * KiB, payload, disk);
  disk.write(64 * KiB, payload);
  EXPECT_FALSE(scan_flying(disk, p));
  EXPECT_FALSE(scan_flying_reference(disk, p));
}

TEST(FlyingScan, PlantedCopyFound) {
  std::mt19937_64 g(2);
  auto disk = random_disk(g, 1 * MiB);
  auto payload = random_bytes(g, 24 * KiB);
  auto p = packet_at(64 * KiB, payload, disk);
  disk.write(500 * KiB, payload);
  EXPECT_EQ(scan_flying(disk, p), 500 * KiB);
  EXPECT_EQ(scan_flying_reference(disk, p), 500 * KiB);
}

TEST(FlyingScan, OverlappingDestinationWindowsExcluded) {
  std::mt19937_64 g(3);
  auto disk = random_disk(g, 1 * MiB);
  auto payload = random_bytes(g, 16 * KiB);
  auto p = packet_at(64 * KiB, payload, disk);
  // A copy that half overlaps the destination does not count.
  disk.write(72 * KiB, payload);
  EXPECT_EQ(oracle(disk, 64 * KiB, payload), std::nullopt);
  EXPECT_FALSE(scan_flying(disk, p));
}

// Random 1 MiB disks with the payload absent, fully planted, or planted with
// one sub missing; every scan agrees with the byte oracle.
TEST(FlyingScan, MatchesExhaustiveOracle) {
  std::mt19937_64 g(4);
  for (int trial = 0; trial < 60; ++trial) {
    auto disk = random_disk(g, 1 * MiB);
    const std::size_t blocks = 1 + g() % 12;
    auto payload = random_bytes(g, blocks * kBlockBytes);
    const std::uint64_t dst = (g() % (256 - blocks)) * kBlockBytes;
    auto p = packet_at(dst, payload, disk, static_cast<std::uint32_t>((1 + g() % 4) * kBlockBytes));
    const std::uint64_t at = (g() % (256 - blocks)) * kBlockBytes;
    switch (trial % 3) {
      case 0: break;
      case 1: disk.write(at, payload); break;
      case 2: {
        auto broken = payload;
        broken[broken.size() - 1] ^= 1;
        disk.write(at, broken);
        break;
      }
    }
    const auto want = oracle(disk, dst, payload);
    if (trial % 3 == 1 && !(at < dst + payload.size() && dst < at + payload.size())) EXPECT_TRUE(want);
    EXPECT_EQ(scan_flying_reference(disk, p), want) << trial;
    EXPECT_EQ(scan_flying(disk, p), want) << trial;
    EXPECT_EQ(scan_flying(BlockChecksumIndex(disk), p), want) << trial;
  }
}

TEST(BlockIndex, ParallelEqualsSerial) {
  std::mt19937_64 g(5);
  auto disk = random_disk(g, 2 * MiB);
  EXPECT_TRUE(BlockChecksumIndex(disk) == BlockChecksumIndex::build_serial(disk));
  BlockStore sparse(2 * MiB);
  sparse.write(40 * KiB, random_bytes(g, 8 * KiB));
  EXPECT_TRUE(BlockChecksumIndex(sparse) == BlockChecksumIndex::build_serial(sparse));
}

TEST(BlockIndex, RefreshTracksWrites) {
  std::mt19937_64 g(6);
  auto disk = random_disk(g, 1 * MiB);
  BlockChecksumIndex index(disk);
  for (int round = 0; round < 10; ++round) {
    for (int w = 0; w < 5; ++w) disk.write((g() % 250) * kBlockBytes, random_bytes(g, (1 + g() % 6) * kBlockBytes));
    index.refresh(disk);
    ASSERT_TRUE(index == BlockChecksumIndex::build_serial(disk)) << round;
  }
}

TEST(BlockIndex, WindowIsRangeChecksum) {
  std::mt19937_64 g(7);
  auto disk = random_disk(g, 256 * KiB);
  BlockChecksumIndex index(disk);
  for (std::size_t first : {0u, 3u, 50u}) {
    for (std::size_t n : {1u, 2u, 13u}) {
      Bytes bytes(n * kBlockBytes);
      disk.read(first * kBlockBytes, bytes);
      EXPECT_EQ(index.window(first, n), checksum(bytes));
    }
  }
}

// A mixed population of outcomes on one 4 MiB image: the parallel batch
// classifier returns exactly the serial reference's records.
TEST(OfflineClassify, ParallelEqualsSerial) {
  std::mt19937_64 g(8);
  auto disk = random_disk(g, 4 * MiB);
  std::vector<DataPacket> packets;
  std::uint64_t next = 0;
  for (std::uint64_t id = 0; id < 120; ++id) {
    const std::size_t blocks = 1 + g() % 8;
    auto payload = random_bytes(g, blocks * kBlockBytes);
    auto p = packet_at(next, payload, disk, 2 * kBlockBytes);
    p.id = id;
    const auto outcome = g() % 7;
    if (outcome == 0) disk.write(next, payload);
    if (outcome == 1) disk.write(next, random_bytes(g, kBlockBytes));  // shorn or FDC
    if (outcome == 2) disk.write(3 * MiB + (g() % 200) * kBlockBytes, payload);  // flew
    if (outcome == 3) p.complete_time.reset();
    if (outcome == 4) p.sequence_tag = SequenceTag::WAW;
    if (outcome == 5) p.op_kind = OpKind::Read;
    packets.push_back(std::move(p));
    next += blocks * kBlockBytes + kBlockBytes;
  }
  DetectorConfig cfg;
  auto parallel = classify_image(packets, disk, cfg);
  auto serial = classify_image_serial(packets, disk, cfg);
  EXPECT_EQ(parallel, serial);
  std::array<int, kFailureKindCount> seen{};
  for (const auto& r : serial) ++seen[static_cast<std::size_t>(r.verdict.kind)];
  EXPECT_GT(seen[static_cast<std::size_t>(FailureKind::FlyingWrite)], 0);
  EXPECT_GT(seen[static_cast<std::size_t>(FailureKind::FWA)], 0);
  EXPECT_GT(seen[static_cast<std::size_t>(FailureKind::Unserializable)], 0);
  EXPECT_GT(seen[static_cast<std::size_t>(FailureKind::IOError)], 0);
  EXPECT_GT(seen[static_cast<std::size_t>(FailureKind::NoFailure)], 0);
  for (const auto& r : serial) EXPECT_NE(packets[r.packet_id].op_kind, OpKind::Read);

  cfg.flying_scan = false;
  for (const auto& r : classify_image(packets, disk, cfg)) EXPECT_NE(r.verdict.kind, FailureKind::FlyingWrite);
}

}  // namespace
}  // namespace ssdrel
