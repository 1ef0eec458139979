#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ssdrel/workload.hpp"

namespace ssdrel {
namespace {

WorkloadSpec base_spec() {
  WorkloadSpec s;
  s.wss_bytes = 64 * MiB;
  s.request_count = 1000;
  s.seed = 42;
  return s;
}

TEST(Workload, AllWritesAtZeroReadFraction) {
  auto reqs = generate(base_spec());
  ASSERT_EQ(reqs.size(), 1000u);
  for (const auto& r : reqs) EXPECT_EQ(r.op, OpKind::Write);
}

TEST(Workload, ReadFractionWithinOneRequest) {
  for (double f : {0.1, 0.25, 0.5, 0.77, 1.0}) {
    auto s = base_spec();
    s.read_fraction = f;
    s.request_count = 999;
    auto reqs = generate(s);
    const auto reads = std::count_if(reqs.begin(), reqs.end(), [](const auto& r) { return r.op == OpKind::Read; });
    EXPECT_LE(std::abs(static_cast<double>(reads) - f * 999), 1.0) << f;
  }
}

TEST(Workload, AddressesInsideWorkingSet) {
  auto s = base_spec();
  s.wss_bytes = 1 * GiB;
  s.request_count = 20000;
  for (const auto& r : generate(s)) {
    EXPECT_LT(r.address, 1ULL << 30);
    EXPECT_LE(r.address + r.size_bytes, s.wss_bytes);
    EXPECT_TRUE(block_aligned(r.address));
    EXPECT_TRUE(block_aligned(r.size_bytes));
  }
}

// Sizes are k * 4 KiB with k uniform on [1, 256], so the mean is
// 128.5 * 4096 = 526,336 bytes.
TEST(Workload, UniformSizeMean) {
  const double analytic = 128.5 * 4096.0;
  auto s = base_spec();
  s.request_count = 100000;
  double sum = 0;
  for (const auto& r : generate(s)) sum += static_cast<double>(r.size_bytes);
  EXPECT_NEAR(sum / 100000.0, analytic, 0.05 * analytic);
  EXPECT_DOUBLE_EQ(s.size.mean_bytes(), analytic);
}

TEST(Workload, FixedSizes) {
  auto s = base_spec();
  s.size = SizeDist::fixed(64 * KiB);
  for (const auto& r : generate(s)) EXPECT_EQ(r.size_bytes, 64 * KiB);
}

TEST(Workload, SameSeedSameStream) {
  auto s = base_spec();
  s.read_fraction = 0.3;
  EXPECT_EQ(generate(s), generate(s));
  auto t = s;
  t.seed = 43;
  EXPECT_NE(generate(s), generate(t));
}

TEST(Workload, SequentialIsAdjacentAndWraps) {
  auto s = base_spec();
  s.pattern = AccessPattern::Sequential;
  s.wss_bytes = 4 * MiB;
  s.size = SizeDist::fixed(64 * KiB);
  s.request_count = 200;
  auto reqs = generate(s);
  for (std::size_t i = 1; i < reqs.size(); ++i) {
    const auto expect = (reqs[i - 1].address + reqs[i - 1].size_bytes) % s.wss_bytes;
    EXPECT_EQ(reqs[i].address, expect) << i;
  }
  EXPECT_EQ(reqs[64].address, 0u);
}

TEST(Workload, WssSmallerThanRequestRejected) {
  auto s = base_spec();
  s.wss_bytes = 512 * KiB;
  EXPECT_THROW(generate(s), SpecError);
}

TEST(Workload, InvalidFieldsRejected) {
  auto s = base_spec();
  s.read_fraction = 1.5;
  EXPECT_THROW(s.validate(), SpecError);
  s = base_spec();
  s.request_count = 0;
  EXPECT_THROW(s.validate(), SpecError);
  s = base_spec();
  s.size = SizeDist::fixed(5000);
  EXPECT_THROW(s.validate(), SpecError);
}

struct PairCase {
  SequenceMode mode;
  OpKind first, second;
};

void PrintTo(const PairCase& c, std::ostream* os) { *os << to_string(c.mode); }

class SequenceModes : public ::testing::TestWithParam<PairCase> {};

// Every tagged request has an earlier partner at the same address, from the
// other issuer, with the mode's op, at most a window away.
TEST_P(SequenceModes, TaggedRequestsHavePartners) {
  const auto c = GetParam();
  auto s = base_spec();
  s.sequence_mode = c.mode;
  auto reqs = generate(s);
  ASSERT_EQ(reqs.size(), s.request_count);
  std::size_t tagged = 0;
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    const auto& r = reqs[i];
    if (r.tag == SequenceTag::Untagged) continue;
    ++tagged;
    EXPECT_EQ(r.op, c.second);
    bool found = false;
    for (std::size_t j = i > kSequenceWindow ? i - kSequenceWindow : 0; j < i && !found; ++j)
      found = reqs[j].address == r.address && reqs[j].size_bytes == r.size_bytes && reqs[j].op == c.first &&
              reqs[j].issuer_id != r.issuer_id;
    EXPECT_TRUE(found) << i;
  }
  EXPECT_EQ(tagged, s.request_count / 2);
}

INSTANTIATE_TEST_SUITE_P(Modes, SequenceModes,
                         ::testing::Values(PairCase{SequenceMode::WAW, OpKind::Write, OpKind::Write},
                                           PairCase{SequenceMode::RAW, OpKind::Write, OpKind::Read},
                                           PairCase{SequenceMode::WAR, OpKind::Read, OpKind::Write},
                                           PairCase{SequenceMode::RAR, OpKind::Read, OpKind::Read}),
                         [](const auto& info) { return std::string(to_string(info.param.mode)); });

TEST(Trace, ThreeRowsInOrder) {
  std::istringstream in("# header\n10 W 0 4096\n20 R 8192 8192\n\n30 w 4096 4096\n");
  auto reqs = read_trace(in, 1 * MiB);
  ASSERT_EQ(reqs.size(), 3u);
  EXPECT_EQ(reqs[0].op, OpKind::Write);
  EXPECT_EQ(reqs[1].op, OpKind::Read);
  EXPECT_EQ(reqs[1].address, 8192u);
  EXPECT_EQ(reqs[1].size_bytes, 8192u);
  EXPECT_EQ(reqs[2].trace_time, 30);
}

TEST(Trace, AddressesMappedIntoWorkingSet) {
  std::istringstream in("0 W 5000000 100\n");
  auto reqs = read_trace(in, 1 * MiB);
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_EQ(reqs[0].address, (5000000 % MiB) / 4096 * 4096);
  EXPECT_EQ(reqs[0].size_bytes, 4096u);
}

TEST(Trace, MalformedRowReportsLine) {
  std::istringstream in("0 W 0 4096\n1 X 0 4096\n");
  try {
    read_trace(in, 1 * MiB);
    FAIL() << "accepted a bad op";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 2u);
  }
  std::istringstream short_row("0 W 0\n");
  EXPECT_THROW(read_trace(short_row, 1 * MiB), ParseError);
}

TEST(Trace, CelloLikeRoundTripsAsEightKiB) {
  auto reqs = make_cello_like(3, 500, 16 * MiB, 0.4);
  std::stringstream file;
  write_trace(file, reqs);
  const auto text = file.str();
  std::istringstream a(text), b(text);
  auto first = read_trace(a, 16 * MiB);
  auto second = read_trace(b, 16 * MiB);
  EXPECT_EQ(first, second);
  ASSERT_EQ(first.size(), 500u);
  for (std::size_t i = 0; i < first.size(); ++i) {
    EXPECT_EQ(first[i].size_bytes, 8 * KiB);
    EXPECT_EQ(first[i].address, reqs[i].address);
    EXPECT_EQ(first[i].op, reqs[i].op);
  }
}

TEST(Pace, InterArrivalAt1200) {
  std::vector<IoRequest> reqs(3);
  pace(reqs, 1200, 100);
  EXPECT_EQ(reqs[0].issue_time, 100);
  EXPECT_EQ(reqs[1].issue_time, 100 + 833);
  EXPECT_EQ(reqs[2].issue_time, 100 + 1666);
}

TEST(Pace, UnlimitedIsAllAtStart) {
  std::vector<IoRequest> reqs(10);
  pace(reqs, kUnlimitedIops, 7);
  for (const auto& r : reqs) EXPECT_EQ(r.issue_time, 7);
}

TEST(Pace, SixThousandPerSecond) {
  std::vector<IoRequest> reqs(7000);
  pace(reqs, 6000, 0);
  const auto in_first_second =
      std::count_if(reqs.begin(), reqs.end(), [](const auto& r) { return r.issue_time < kSecond; });
  EXPECT_EQ(in_first_second, 6000);
}

TEST(Pace, RejectsNonPositiveRate) {
  std::vector<IoRequest> reqs(1);
  EXPECT_THROW(pace(reqs, 0, 0), SpecError);
}

}  // namespace
}  // namespace ssdrel
