#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ssdrel/packet.hpp"

namespace ssdrel {
namespace {

std::vector<std::uint8_t> random_bytes(std::mt19937_64& g, std::size_t n) {
  std::vector<std::uint8_t> v(n);
  for (auto& b : v) b = static_cast<std::uint8_t>(g());
  return v;
}

DataPacket random_packet(std::mt19937_64& g, std::uint64_t id) {
  const std::size_t blocks = 1 + g() % 40;
  auto payload = random_bytes(g, blocks * kBlockBytes);
  auto initial = random_bytes(g, payload.size());
  const auto op = g() % 4 == 0 ? OpKind::Read : OpKind::Write;
  PacketOptions opts;
  opts.max_sub_bytes = (1 + g() % 16) * kBlockBytes;
  auto p = build_packet(op, (g() % 1000) * kBlockBytes, payload, static_cast<SimTime>(g() % 1000000), initial, opts);
  p.id = id;
  p.sequence_tag = static_cast<SequenceTag>(g() % 5);
  p.origin = g() % 2 ? Origin::App : Origin::Promotion;
  p.issuer_id = static_cast<std::uint32_t>(g() % 3);
  if (g() % 2) finalize_packet(p, g() % 2 ? payload : initial, p.queue_time + static_cast<SimTime>(g() % 5000));
  return p;
}

TEST(Packet, OneMebibyteSplitsIntoSixteen) {
  std::vector<std::uint8_t> payload(1 * MiB, 0xab), initial(1 * MiB, 0);
  auto p = build_packet(OpKind::Write, 0, payload, 0, initial);
  ASSERT_EQ(p.sub_requests.size(), 16u);
  for (const auto& s : p.sub_requests) EXPECT_EQ(s.size_bytes, 64 * KiB);
}

TEST(Packet, SingleBlockMirrorsHeader) {
  std::mt19937_64 g(1);
  auto payload = random_bytes(g, 4 * KiB);
  std::vector<std::uint8_t> initial(4 * KiB, 0);
  auto p = build_packet(OpKind::Write, 8 * KiB, payload, 5, initial);
  ASSERT_EQ(p.sub_requests.size(), 1u);
  const auto& s = p.sub_requests[0];
  EXPECT_EQ(s.id, 0u);
  EXPECT_EQ(s.address, p.address);
  EXPECT_EQ(s.size_bytes, p.size_bytes);
  EXPECT_EQ(s.data_checksum, p.data_checksum);
  EXPECT_EQ(s.payload, payload);
  EXPECT_FALSE(p.complete_time);
  EXPECT_FALSE(p.final_checksum);
}

TEST(Packet, TailSubRequestIsShorter) {
  std::vector<std::uint8_t> payload(72 * KiB, 1), initial(72 * KiB, 0);
  auto p = build_packet(OpKind::Write, 0, payload, 0, initial);
  ASSERT_EQ(p.sub_requests.size(), 2u);
  EXPECT_EQ(p.sub_requests[1].size_bytes, 8 * KiB);
}

TEST(Packet, ChecksumsMatchRecomputation) {
  std::mt19937_64 g(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_packet(g, trial);
    if (p.op_kind == OpKind::Read) continue;
    std::vector<std::uint8_t> joined;
    for (const auto& s : p.sub_requests) {
      EXPECT_EQ(s.payload.size(), s.size_bytes);
      EXPECT_EQ(checksum(s.payload), s.data_checksum);
      joined.insert(joined.end(), s.payload.begin(), s.payload.end());
    }
    EXPECT_EQ(checksum(joined), p.data_checksum);
  }
}

TEST(Packet, SubRequestsPartitionTheRange) {
  std::mt19937_64 g(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto p = random_packet(g, trial);
    std::uint64_t next = p.address, total = 0;
    for (std::size_t i = 0; i < p.sub_requests.size(); ++i) {
      const auto& s = p.sub_requests[i];
      EXPECT_EQ(s.id, i);
      EXPECT_EQ(s.address, next);
      next += s.size_bytes;
      total += s.size_bytes;
    }
    EXPECT_EQ(total, p.size_bytes);
    EXPECT_EQ(next, p.address + p.size_bytes);
  }
}

TEST(Packet, MisalignmentRejected) {
  std::vector<std::uint8_t> ok(4 * KiB), odd(4 * KiB + 1);
  EXPECT_THROW(build_packet(OpKind::Write, 100, ok, 0, ok), AlignmentError);
  EXPECT_THROW(build_packet(OpKind::Write, 0, odd, 0, odd), AlignmentError);
}

TEST(Packet, InitialChecksumCoversSnapshot) {
  std::mt19937_64 g(4);
  auto payload = random_bytes(g, 16 * KiB), initial = random_bytes(g, 16 * KiB);
  auto p = build_packet(OpKind::Write, 0, payload, 0, initial);
  EXPECT_EQ(p.initial_checksum, checksum(initial));
}

TEST(Packet, FinalizeWithPayloadMatchesData) {
  std::mt19937_64 g(5);
  auto payload = random_bytes(g, 128 * KiB), initial = random_bytes(g, 128 * KiB);
  auto p = build_packet(OpKind::Write, 0, payload, 10, initial);
  finalize_packet(p, payload, 20);
  EXPECT_EQ(*p.final_checksum, p.data_checksum);
  EXPECT_EQ(*p.complete_time, 20);
  for (const auto& s : p.sub_requests) EXPECT_EQ(*s.final_checksum, s.data_checksum);
}

TEST(Packet, FinalizeWithInitialMatchesInitial) {
  std::mt19937_64 g(6);
  auto payload = random_bytes(g, 128 * KiB), initial = random_bytes(g, 128 * KiB);
  auto p = build_packet(OpKind::Write, 0, payload, 10, initial);
  finalize_packet(p, initial, 20);
  EXPECT_EQ(*p.final_checksum, p.initial_checksum);
}

TEST(Packet, FlippedByteChangesFinal) {
  std::mt19937_64 g(7);
  auto payload = random_bytes(g, 128 * KiB), initial = random_bytes(g, 128 * KiB);
  auto p = build_packet(OpKind::Write, 0, payload, 10, initial);
  auto bad = payload;
  bad[70000] ^= 0x10;
  finalize_packet(p, bad, 20);
  EXPECT_EQ(*p.final_checksum, checksum(bad));
  EXPECT_NE(*p.final_checksum, p.data_checksum);
  // Only the sub-request holding the flipped byte mismatches.
  for (const auto& s : p.sub_requests) EXPECT_EQ(s.id == 1, *s.final_checksum != s.data_checksum);
}

TEST(Packet, DoubleFinalizeIsStateError) {
  std::vector<std::uint8_t> payload(4 * KiB, 1), initial(4 * KiB, 0);
  auto p = build_packet(OpKind::Write, 0, payload, 0, initial);
  finalize_packet(p, payload, 1);
  EXPECT_THROW(finalize_packet(p, payload, 2), StateError);
}

TEST(PacketRecord, ThreeSubRoundTrip) {
  std::mt19937_64 g(8);
  auto payload = random_bytes(g, 12 * KiB), initial = random_bytes(g, 12 * KiB);
  PacketOptions opts;
  opts.max_sub_bytes = 4 * KiB;
  auto p = build_packet(OpKind::Write, 40 * KiB, payload, 33, initial, opts);
  p.id = 9;
  p.sequence_tag = SequenceTag::WAW;
  p.issuer_id = 1;
  finalize_packet(p, payload, 90);
  ASSERT_EQ(p.sub_requests.size(), 3u);
  const auto line = encode_record(p);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_NE(line.find("\"Initial_Checksum\""), std::string::npos);
  EXPECT_NE(line.find("\"Sub_Final_Checksum\""), std::string::npos);
  EXPECT_EQ(decode_record(line), p);
}

TEST(PacketRecord, RandomRoundTrips) {
  std::mt19937_64 g(9);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = random_packet(g, trial);
    EXPECT_EQ(decode_record(encode_record(p)), p) << trial;
  }
}

TEST(PacketRecord, TruncatedLineFails) {
  std::mt19937_64 g(10);
  const auto line = encode_record(random_packet(g, 1));
  for (std::size_t cut : {std::size_t{0}, std::size_t{1}, line.size() / 2, line.size() - 1}) {
    try {
      decode_record(std::string_view(line).substr(0, cut));
      ADD_FAILURE() << "decoded a truncated record at " << cut;
    } catch (const ParseError& e) {
      EXPECT_LE(e.offset(), cut + 1);  // 1-based position of the failure
    }
  }
}

TEST(PacketRecord, UppercaseSubDataRejected) {
  std::vector<std::uint8_t> payload(4 * KiB, 0xab), initial(4 * KiB, 0);
  auto line = encode_record(build_packet(OpKind::Write, 0, payload, 0, initial));
  const auto at = line.find("abab");
  ASSERT_NE(at, std::string::npos);
  line.replace(at, 4, "ABAB");
  EXPECT_THROW(decode_record(line), ParseError);
}

// The fold over digests recomputed from the raw payloads must survive a
// trip through the database text.
TEST(PacketRecord, ThousandPacketDatabase) {
  std::mt19937_64 g(11);
  std::uint64_t oracle = 0;
  std::ostringstream db;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const std::size_t blocks = 1 + g() % 8;
    auto payload = random_bytes(g, blocks * kBlockBytes);
    std::vector<std::uint8_t> initial(payload.size(), 0);
    oracle = oracle * 31 + checksum(payload).value;
    auto p = build_packet(OpKind::Write, i * 64 * KiB, payload, static_cast<SimTime>(i), initial);
    p.id = i;
    db << encode_record(p) << '\n';
  }
  std::istringstream in(db.str());
  std::string line;
  std::uint64_t fold = 0, n = 0;
  while (std::getline(in, line)) {
    fold = fold * 31 + decode_record(line).data_checksum.value;
    ++n;
  }
  EXPECT_EQ(n, 1000u);
  EXPECT_EQ(fold, oracle);
}

}  // namespace
}  // namespace ssdrel
