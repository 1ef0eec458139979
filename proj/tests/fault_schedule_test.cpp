#include <gtest/gtest.h>

#include <sstream>

#include "ssdrel/cache_stack.hpp"
#include "ssdrel/fault_schedule.hpp"

namespace ssdrel {
namespace {

ScheduleParams params(std::size_t n) {
  ScheduleParams p;
  p.n_faults = n;
  p.run_duration_us = static_cast<SimTime>(n + 1) * 15 * kSecond;
  return p;
}

CacheStack small_stack() {
  SsdConfig ssd;
  ssd.capacity_bytes = 4 * MiB;
  ssd.dead_hazards = {0, 0, 0};
  return CacheStack({}, {}, BackingConfig{4 * MiB}, ssd, ssd);
}

TEST(Schedule, SixHundredPairs) {
  const auto p = params(600);
  auto s = schedule(1, p);
  EXPECT_EQ(s.power_faults, 600u);
  ASSERT_EQ(s.events.size(), 1200u);
  SimTime last_on = 0;
  for (std::size_t i = 0; i < s.events.size(); i += 2) {
    const auto& cut = s.events[i];
    const auto& on = s.events[i + 1];
    ASSERT_EQ(cut.kind, FaultKind::PowerCut);
    ASSERT_EQ(on.kind, FaultKind::PowerOn);
    EXPECT_EQ(on.time - cut.time, p.t_zero_us);
    EXPECT_GE(cut.time - last_on, p.min_gap_us) << i;
    EXPECT_LE(on.time, p.run_duration_us);
    last_on = on.time;
  }
  EXPECT_NO_THROW(validate(s, p.t_zero_us));
}

TEST(Schedule, SameSeedSameSchedule) {
  EXPECT_EQ(schedule(7, params(50)), schedule(7, params(50)));
  EXPECT_NE(schedule(7, params(50)).events, schedule(8, params(50)).events);
}

TEST(Schedule, ZeroFaultsIsEmpty) {
  auto s = schedule(1, params(0));
  EXPECT_TRUE(s.events.empty());
  EXPECT_EQ(s.power_faults, 0u);
}

TEST(Schedule, InfeasibleDensityRejected) {
  ScheduleParams p;
  p.n_faults = 10;
  p.run_duration_us = 10 * (p.min_gap_us + p.t_zero_us) - 1;
  EXPECT_THROW(schedule(1, p), ScheduleError);
  p.run_duration_us += 1;
  EXPECT_NO_THROW(schedule(1, p));
}

TEST(Schedule, PeriodicIsEvenlySpaced) {
  auto p = params(10);
  p.distribution = FaultDistribution::Periodic;
  auto s = schedule(1, p);
  ASSERT_EQ(s.events.size(), 20u);
  const auto step = s.events[2].time - s.events[0].time;
  for (std::size_t i = 2; i < s.events.size(); i += 2) EXPECT_EQ(s.events[i].time - s.events[i - 2].time, step);
}

TEST(Schedule, ValidateCatchesBrokenOrdering) {
  FaultSchedule s;
  s.events = {{100, FaultKind::PowerCut}, {200, FaultKind::PowerOn}};
  EXPECT_THROW(validate(s, 1'900'000), ScheduleError);
  s.events = {{100, FaultKind::PowerCut}, {2'000'000, FaultKind::PowerCut}};
  EXPECT_THROW(validate(s, 1'900'000), ScheduleError);
  s.events = {{100, FaultKind::PowerOn}};
  EXPECT_THROW(validate(s, 1'900'000), ScheduleError);
}

TEST(Schedule, AmbientKeepsOrder) {
  auto s = schedule(3, params(3));
  add_ambient(s, 0, 64);
  add_ambient(s, s.events.back().time + 1, 25);
  for (std::size_t i = 1; i < s.events.size(); ++i) EXPECT_LT(s.events[i - 1].time, s.events[i].time);
  EXPECT_EQ(s.events.front().kind, FaultKind::SetAmbient);
  EXPECT_EQ(s.power_faults, 3u);
  EXPECT_THROW(add_ambient(s, s.events[2].time, 30), ScheduleError);
}

TEST(Inject, CutReachesBothDevices) {
  auto stack = small_stack();
  FaultSchedule s;
  s.events = {{1'000, FaultKind::PowerCut}, {1'000 + 1'900'000, FaultKind::PowerOn}};
  s.power_faults = 1;
  FaultInjector inj(s);
  stack.tick(1'000);
  auto rows = inj.apply_due(stack, 1'000);
  ASSERT_EQ(rows.size(), 2u);
  for (int d = 0; d < 2; ++d) {
    EXPECT_EQ(stack.device(d).power(), PowerState::FallingVoltage);
    EXPECT_EQ(rows[d].device, d);
    EXPECT_EQ(rows[d].kind, FaultKind::PowerCut);
  }
}

// Every schedule event appears once per device, in schedule order, and both
// devices are On between recovery and the next cut.
TEST(Inject, LogMirrorsSchedule) {
  auto stack = small_stack();
  auto s = schedule(11, params(20));
  auto log = inject(s, stack, 0);
  ASSERT_EQ(log.size(), 2 * s.events.size());
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    for (int d = 0; d < 2; ++d) {
      const auto& row = log[2 * i + d];
      EXPECT_EQ(row.time, s.events[i].time);
      EXPECT_EQ(row.kind, s.events[i].kind);
      EXPECT_EQ(row.device, d);
    }
  }
  EXPECT_EQ(stack.device(0).power_cycles(), 20u);
  for (int d = 0; d < 2; ++d) EXPECT_NE(stack.device(d).power(), PowerState::Off);
}

TEST(Inject, OnBetweenRecoveryAndNextCut) {
  auto stack = small_stack();
  auto s = schedule(12, params(5));
  FaultInjector inj(s);
  SimTime t = 0;
  while (auto next = inj.next_time()) {
    // Probe just before each cut that follows a completed recovery.
    const auto probe = *next - 1;
    if (probe > t) {
      stack.tick(probe);
      const bool due_cut = s.events[inj.log().size() / 2].kind == FaultKind::PowerCut;
      if (due_cut && !inj.log().empty())
        for (int d = 0; d < 2; ++d) EXPECT_EQ(stack.device(d).power(), PowerState::On) << probe;
    }
    stack.tick(*next);
    inj.apply_due(stack, *next);
    t = *next;
  }
  EXPECT_TRUE(inj.done());
}

TEST(Inject, AmbientAloneHeatsWithoutPowerEvents) {
  auto stack = small_stack();
  FaultSchedule s;
  add_ambient(s, 0, 64);
  auto log = inject(s, stack, 0);
  ASSERT_EQ(log.size(), 2u);
  for (const auto& r : log) EXPECT_EQ(r.kind, FaultKind::SetAmbient);
  stack.tick(120 * kSecond);
  for (int d = 0; d < 2; ++d) {
    EXPECT_GT(stack.device(d).temperature(120 * kSecond), 50.0);
    EXPECT_EQ(stack.device(d).power(), PowerState::On);
    EXPECT_EQ(stack.device(d).power_cycles(), 0u);
  }
}

TEST(Inject, EmptyScheduleEmptyLog) {
  auto stack = small_stack();
  EXPECT_TRUE(inject(FaultSchedule{}, stack, 0).empty());
}

TEST(FaultLog, CsvRoundTrip) {
  auto stack = small_stack();
  auto s = schedule(13, params(4));
  add_ambient(s, s.events.back().time + 10, 64.5);
  auto log = inject(s, stack, 0);
  std::stringstream csv;
  write_fault_log(csv, log);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "time_us,event,device,health_after");
  EXPECT_EQ(read_fault_log(csv), log);
}

TEST(FaultLog, MalformedRowRejected) {
  std::istringstream in("time_us,event,device,health_after\n5,power_cut,0\n");
  EXPECT_THROW(read_fault_log(in), ParseError);
  std::istringstream unknown("time_us,event,device,health_after\n5,brownout,0,healthy\n");
  EXPECT_THROW(read_fault_log(unknown), ParseError);
}

}  // namespace
}  // namespace ssdrel
