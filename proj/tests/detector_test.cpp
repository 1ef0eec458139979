#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "ssdrel/detector.hpp"

namespace ssdrel {
namespace {

using Bytes = std::vector<std::uint8_t>;

Bytes random_bytes(std::mt19937_64& g, std::size_t n) {
  Bytes v(n);
  for (auto& b : v) b = static_cast<std::uint8_t>(g());
  return v;
}

constexpr std::uint32_t kSub = 8 * KiB;

DataPacket packet_of(const Bytes& payload, const Bytes& initial) {
  PacketOptions opts;
  opts.max_sub_bytes = kSub;
  return build_packet(OpKind::Write, 0, payload, 0, initial, opts);
}

// Straight from the failure definitions, comparing raw bytes only.
FailureKind oracle(const Bytes& payload, const Bytes& initial, const Bytes& final_bytes, bool waw, bool timed_out,
                   std::uint32_t& failed_out) {
  failed_out = 0;
  if (timed_out) return FailureKind::IOError;
  if (final_bytes == payload) return FailureKind::NoFailure;
  if (final_bytes == initial) return waw ? FailureKind::Unserializable : FailureKind::FWA;
  const std::size_t n = payload.size() / kSub;
  std::uint32_t failed = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (!std::equal(final_bytes.begin() + i * kSub, final_bytes.begin() + (i + 1) * kSub, payload.begin() + i * kSub))
      ++failed;
  failed_out = failed;
  if (failed == n) return FailureKind::FDC;
  if (failed > 0) return FailureKind::ShornWrite;
  return FailureKind::InconsistentRecord;
}

// Each sub persisted, lost (old bytes kept) or corrupted (neither), for
// n = 1..4, with and without the WAW flag and a timeout. The persisted/lost
// half is the 2^n case set; corruption adds the all-failed-but-not-initial
// states that reach FDC.
TEST(Classify, ExhaustiveAgainstOracle) {
  std::mt19937_64 g(1);
  const DetectorConfig cfg;
  std::size_t cases = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto payload = random_bytes(g, n * kSub), initial = random_bytes(g, n * kSub),
               junk = random_bytes(g, n * kSub);
    std::size_t states = 1;
    for (std::size_t i = 0; i < n; ++i) states *= 3;
    for (std::size_t code = 0; code < states; ++code) {
      Bytes final_bytes(payload.size());
      std::size_t c = code;
      for (std::size_t i = 0; i < n; ++i, c /= 3) {
        const Bytes& src = c % 3 == 0 ? payload : c % 3 == 1 ? initial : junk;
        std::copy(src.begin() + i * kSub, src.begin() + (i + 1) * kSub, final_bytes.begin() + i * kSub);
      }
      for (bool waw : {false, true}) {
        for (bool timed_out : {false, true}) {
          const SimTime rt = timed_out ? cfg.timeout_us + 1 : cfg.timeout_us;
          std::uint32_t failed = 0;
          const auto want = oracle(payload, initial, final_bytes, waw, timed_out, failed);
          auto p = packet_of(payload, initial);
          const auto got = classify(p, final_bytes, waw, rt, cfg);
          ASSERT_EQ(got.kind, want) << "n=" << n << " code=" << code << " waw=" << waw << " timeout=" << timed_out;
          if (want == FailureKind::ShornWrite) {
            EXPECT_EQ(got.failed_subs, failed);
            EXPECT_GE(got.failed_subs, 1u);
            EXPECT_LT(got.failed_subs, n);
          }
          if (!timed_out) {
            finalize_packet(p, final_bytes, rt);
            EXPECT_EQ(classify(p, waw, rt, cfg), got);
          }
          ++cases;
        }
      }
    }
  }
  EXPECT_EQ(cases, 4u * (3 + 9 + 27 + 81));
}

struct Sixteen {
  Bytes payload, initial;
  DataPacket packet;
  Sixteen() {
    std::mt19937_64 g(2);
    payload = random_bytes(g, 16 * kSub);
    initial = random_bytes(g, 16 * kSub);
    packet = packet_of(payload, initial);
  }
  Bytes with_failed(std::size_t k) const {
    auto b = payload;
    for (std::size_t i = 0; i < k; ++i) b[i * kSub + 5] ^= 0xff;
    return b;
  }
};

TEST(Classify, Examples) {
  const DetectorConfig cfg;
  Sixteen s;
  EXPECT_EQ(classify(s.packet, s.payload, false, 10, cfg).kind, FailureKind::NoFailure);
  EXPECT_EQ(classify(s.packet, s.initial, false, 10, cfg).kind, FailureKind::FWA);
  EXPECT_EQ(classify(s.packet, s.initial, true, 10, cfg).kind, FailureKind::Unserializable);
  const auto shorn = classify(s.packet, s.with_failed(3), false, 10, cfg);
  EXPECT_EQ(shorn.kind, FailureKind::ShornWrite);
  EXPECT_EQ(shorn.failed_subs, 3u);
  EXPECT_EQ(shorn.detail(), "3");
  EXPECT_EQ(classify(s.packet, s.with_failed(16), false, 10, cfg).kind, FailureKind::FDC);
  EXPECT_EQ(classify(s.packet, s.payload, false, cfg.timeout_us + 1, cfg).kind, FailureKind::IOError);
}

TEST(Classify, NeverFwaWhenBytesMoved) {
  const DetectorConfig cfg;
  Sixteen s;
  for (std::size_t k = 1; k <= 16; ++k) EXPECT_NE(classify(s.packet, s.with_failed(k), false, 10, cfg).kind, FailureKind::FWA);
}

TEST(Classify, InconsistentRecordWhenOnlyWholeRangeDiffers) {
  const DetectorConfig cfg;
  Sixteen s;
  finalize_packet(s.packet, s.payload, 10);
  s.packet.final_checksum = Checksum64{s.packet.final_checksum->value ^ 1};
  EXPECT_EQ(classify(s.packet, false, 10, cfg).kind, FailureKind::InconsistentRecord);
}

TEST(Classify, MissingSnapshotIsError) {
  const DetectorConfig cfg;
  Sixteen s;
  EXPECT_THROW(classify(s.packet, false, 10, cfg), ClassificationError);
  EXPECT_THROW(classify(s.packet, std::span<const std::uint8_t>{}, false, 10, cfg), ClassificationError);
  const Bytes partial(kSub);
  EXPECT_THROW(classify(s.packet, partial, false, 10, cfg), ClassificationError);
  // A timed-out packet needs no snapshot.
  EXPECT_EQ(classify(s.packet, false, cfg.timeout_us + 1, cfg).kind, FailureKind::IOError);
}

TEST(Classify, ConfigValidation) {
  DetectorConfig cfg;
  cfg.timeout_us = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(VerdictLog, RoundTripEveryKind) {
  std::vector<VerdictRecord> records;
  for (std::size_t k = 0; k < kFailureKindCount; ++k) {
    VerdictRecord r;
    r.packet_id = k * 3;
    r.verdict.kind = static_cast<FailureKind>(k);
    r.response_time_us = static_cast<SimTime>(k * 1000 + 7);
    if (r.verdict.kind == FailureKind::ShornWrite) r.verdict.failed_subs = 5;
    if (r.verdict.kind == FailureKind::FlyingWrite) r.verdict.found_at = 40960;
    if (r.verdict.kind == FailureKind::DeadDevice) r.verdict.dead = DeadKind::Interface;
    records.push_back(r);
  }
  std::stringstream csv;
  write_verdict_log(csv, records);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "packet_id,kind,detail,response_time_us");
  auto back = read_verdict_log(csv);
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(back[i].packet_id, records[i].packet_id);
    EXPECT_EQ(back[i].verdict, records[i].verdict);
    EXPECT_EQ(back[i].response_time_us, records[i].response_time_us);
  }
}

TEST(VerdictLog, BadRowsRejected) {
  std::istringstream unknown("packet_id,kind,detail,response_time_us\n1,Gremlin,,5\n");
  EXPECT_THROW(read_verdict_log(unknown), ParseError);
  std::istringstream short_row("packet_id,kind,detail,response_time_us\n1,FWA\n");
  EXPECT_THROW(read_verdict_log(short_row), ParseError);
}

std::vector<AppliedEvent> cuts(std::size_t n) {
  std::vector<AppliedEvent> log;
  for (std::size_t i = 0; i < n; ++i)
    for (int d = 0; d < 2; ++d) {
      log.push_back({static_cast<SimTime>(i) * 20 * kSecond, FaultKind::PowerCut, d, Health::Healthy, 0});
      log.push_back({static_cast<SimTime>(i) * 20 * kSecond + 1'900'000, FaultKind::PowerOn, d, Health::Healthy, 0});
    }
  return log;
}

std::vector<VerdictRecord> verdicts(std::initializer_list<std::pair<FailureKind, int>> spec) {
  std::vector<VerdictRecord> out;
  for (auto [k, n] : spec)
    for (int i = 0; i < n; ++i) out.push_back({out.size(), Verdict{k}, 0, Origin::App});
  return out;
}

TEST(Aggregate, TenFailuresOverFiveFaults) {
  auto r = aggregate(verdicts({{FailureKind::FWA, 6}, {FailureKind::ShornWrite, 4}, {FailureKind::NoFailure, 50},
                               {FailureKind::IOError, 3}}),
                     cuts(5));
  EXPECT_EQ(r.power_faults, 5u);
  EXPECT_EQ(r.data_failures(), 10u);
  ASSERT_TRUE(r.failures_per_power_fault());
  EXPECT_DOUBLE_EQ(*r.failures_per_power_fault(), 2.0);
  EXPECT_DOUBLE_EQ(r.rate(FailureKind::FWA), 1.2);
}

TEST(Aggregate, NoFaultsIsCountsOnly) {
  auto r = aggregate(verdicts({{FailureKind::NoFailure, 20}}), {});
  EXPECT_EQ(r.data_failures(), 0u);
  EXPECT_FALSE(r.failures_per_power_fault());
  EXPECT_EQ(r.count(FailureKind::NoFailure), 20u);
}

TEST(Aggregate, DeadDeviceCountsIncidentsOnce) {
  auto log = cuts(3);
  // Device 1 turns up with corrupted metadata after the second cut and stays so.
  for (auto& e : log)
    if (e.device == 1 && e.time >= 20 * kSecond) e.health_after = Health::MetadataCorruption;
  auto r = aggregate({}, log);
  EXPECT_EQ(r.dead_incidents[0], 1u);
  EXPECT_EQ(r.count(FailureKind::DeadDevice), 1u);
}

// Random per-run verdicts and fault logs with absorbing health; the
// aggregate of the concatenation equals the sum of the per-run aggregates.
TEST(Aggregate, FoldEquivalence) {
  std::mt19937_64 g(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<VerdictRecord> all_v;
    std::vector<AppliedEvent> all_log;
    ExperimentReport sum;
    const int runs = 1 + static_cast<int>(g() % 5);
    for (int run = 0; run < runs; ++run) {
      std::vector<VerdictRecord> v;
      for (int i = static_cast<int>(g() % 40); i > 0; --i)
        v.push_back({g(), Verdict{static_cast<FailureKind>(g() % kFailureKindCount)}, 0, Origin::App});
      std::vector<AppliedEvent> log;
      std::array<Health, 2> h{Health::Healthy, Health::Healthy};
      SimTime t = static_cast<SimTime>(g() % 1000);
      for (int f = static_cast<int>(g() % 6); f > 0; --f) {
        for (FaultKind k : {FaultKind::PowerCut, FaultKind::PowerOn}) {
          for (int d = 0; d < 2; ++d) {
            if (k == FaultKind::PowerCut && h[d] == Health::Healthy && g() % 4 == 0)
              h[d] = static_cast<Health>(1 + g() % 3);
            log.push_back({t, k, d, h[d], 0});
          }
          t += 1000 + static_cast<SimTime>(g() % 100000);
        }
      }
      sum += aggregate(v, log);
      all_v.insert(all_v.end(), v.begin(), v.end());
      all_log.insert(all_log.end(), log.begin(), log.end());
    }
    const auto whole = aggregate(all_v, all_log);
    EXPECT_EQ(whole.counts, sum.counts) << trial;
    EXPECT_EQ(whole.power_faults, sum.power_faults) << trial;
    EXPECT_EQ(whole.dead_incidents, sum.dead_incidents) << trial;
  }
}

ExperimentReport report_with(std::initializer_list<std::pair<FailureKind, std::uint64_t>> counts,
                             std::uint64_t faults = 10) {
  ExperimentReport r;
  r.power_faults = faults;
  for (auto [k, n] : counts) r.counts[static_cast<std::size_t>(k)] = n;
  return r;
}

TEST(DependencyMatrix, VariationAndRanking) {
  std::vector<SweepGroup> groups;
  groups.push_back({"request_size",
                    {report_with({{FailureKind::FWA, 10}, {FailureKind::ShornWrite, 20}}),
                     report_with({{FailureKind::FWA, 20}, {FailureKind::ShornWrite, 20}}),
                     report_with({{FailureKind::FWA, 30}, {FailureKind::ShornWrite, 20}})}});
  groups.push_back({"sequence",
                    {report_with({{FailureKind::Unserializable, 0}, {FailureKind::ShornWrite, 10}}),
                     report_with({{FailureKind::Unserializable, 8}, {FailureKind::ShornWrite, 30}})}});
  auto m = dependency_matrix(groups);
  // FWA rates 1, 2, 3: (3 - 1) / 2 = 100%.
  EXPECT_DOUBLE_EQ(m.cell("request_size", FailureKind::FWA), 100.0);
  EXPECT_DOUBLE_EQ(m.cell("request_size", FailureKind::ShornWrite), 0.0);
  // Shorn rates 1, 3: (3 - 1) / 2 = 100%.
  EXPECT_DOUBLE_EQ(m.cell("sequence", FailureKind::ShornWrite), 100.0);
  // Unserializable rates 0, 0.8: 0.8 / 0.4 = 200%, in the sequence row only.
  EXPECT_DOUBLE_EQ(m.cell("sequence", FailureKind::Unserializable), 200.0);
  EXPECT_DOUBLE_EQ(m.cell("request_size", FailureKind::Unserializable), 0.0);
  for (const auto& row : {"request_size", "sequence"}) EXPECT_DOUBLE_EQ(m.cell(row, FailureKind::FlyingWrite), 0.0);
  EXPECT_EQ(m.ranking.front().first, FailureKind::Unserializable);
  EXPECT_EQ(m.rank_of(FailureKind::Unserializable), 0u);
  EXPECT_LT(m.rank_of(FailureKind::FWA), m.rank_of(FailureKind::FlyingWrite));
  EXPECT_THROW(m.cell("temperature", FailureKind::FWA), std::out_of_range);
}

TEST(DependencyMatrix, SinglePointGroupRejected) {
  EXPECT_THROW(dependency_matrix({SweepGroup{"wss", {report_with({})}}}), std::invalid_argument);
}

TEST(DependencyMatrix, CsvLayout) {
  auto m = dependency_matrix({SweepGroup{"wss", {report_with({{FailureKind::FDC, 5}}), report_with({{FailureKind::FDC, 15}})}}});
  std::ostringstream out;
  write_dependency_matrix(out, m);
  EXPECT_EQ(out.str(),
            "sweep,FWA,IOError,FDC,ShornWrite,FlyingWrite,Unserializable,DeadDevice\n"
            "wss,0.00,0.00,100.00,0.00,0.00,0.00,0.00\n"
            "total,0.00,0.00,100.00,0.00,0.00,0.00,0.00\n");
}

}  // namespace
}  // namespace ssdrel
