#include "ssdrel/fault_schedule.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "ssdrel/cache_stack.hpp"
#include "ssdrel/packet.hpp"
#include "ssdrel/rng.hpp"

namespace ssdrel {

const char* to_string(FaultKind k) {
  switch (k) {
    case FaultKind::PowerCut: return "power_cut";
    case FaultKind::PowerOn: return "power_on";
    case FaultKind::SetAmbient: return "set_ambient";
  }
  return "?";
}

const char* to_string(FaultDistribution d) { return d == FaultDistribution::Uniform ? "uniform" : "periodic"; }

bool parse_fault_distribution(std::string_view s, FaultDistribution& out) {
  if (s == "uniform") out = FaultDistribution::Uniform;
  else if (s == "periodic") out = FaultDistribution::Periodic;
  else return false;
  return true;
}

FaultSchedule schedule(std::uint64_t seed, const ScheduleParams& p) {
  if (p.min_gap_us < 0 || p.t_zero_us <= 0 || p.run_duration_us < 0) throw ScheduleError("negative schedule timing");
  const SimTime slot = p.min_gap_us + p.t_zero_us;
  const auto n = static_cast<SimTime>(p.n_faults);
  if (n > 0 && (p.run_duration_us / n < slot))
    throw ScheduleError("cannot fit " + std::to_string(p.n_faults) + " faults into " +
                        std::to_string(p.run_duration_us) + " us");
  FaultSchedule s;
  s.seed = seed;
  s.power_faults = p.n_faults;
  if (n == 0) return s;

  // Each cut is preceded by min_gap of powered time; the leftover time is
  // spread according to the distribution.
  const SimTime free = p.run_duration_us - n * slot;
  std::vector<SimTime> offsets(p.n_faults);
  if (p.distribution == FaultDistribution::Uniform) {
    Rng rng(derive_seed(seed, 0xfa17));
    for (auto& o : offsets) o = static_cast<SimTime>(rng.below(static_cast<std::uint64_t>(free) + 1));
    std::sort(offsets.begin(), offsets.end());
  } else {
    for (SimTime i = 0; i < n; ++i) offsets[i] = free * (2 * i + 1) / (2 * n);
  }
  for (SimTime i = 0; i < n; ++i) {
    const SimTime cut = p.min_gap_us + offsets[i] + i * slot;
    s.events.push_back({cut, FaultKind::PowerCut, 0});
    s.events.push_back({cut + p.t_zero_us, FaultKind::PowerOn, 0});
  }
  return s;
}

void add_ambient(FaultSchedule& s, SimTime time, double temp_c) {
  auto pos = std::lower_bound(s.events.begin(), s.events.end(), time,
                              [](const FaultEvent& e, SimTime t) { return e.time < t; });
  if (pos != s.events.end() && pos->time == time) throw ScheduleError("two fault events at one instant");
  s.events.insert(pos, FaultEvent{time, FaultKind::SetAmbient, temp_c});
}

void validate(const FaultSchedule& s, SimTime t_zero_us) {
  std::optional<SimTime> open_cut;
  std::size_t cuts = 0;
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const auto& e = s.events[i];
    if (i > 0 && e.time <= s.events[i - 1].time) throw ScheduleError("fault times not strictly increasing");
    if (e.kind == FaultKind::PowerCut) {
      if (open_cut) throw ScheduleError("power cut without a preceding power on");
      open_cut = e.time;
      ++cuts;
    } else if (e.kind == FaultKind::PowerOn) {
      if (!open_cut) throw ScheduleError("power on without a power cut");
      if (e.time - *open_cut < t_zero_us) throw ScheduleError("power restored before full discharge");
      open_cut.reset();
    }
  }
  if (open_cut) throw ScheduleError("schedule ends with power off");
  if (cuts != s.power_faults) throw ScheduleError("power fault count mismatch");
}

std::optional<SimTime> FaultInjector::next_time() const {
  if (done()) return std::nullopt;
  return schedule_.events[next_].time;
}

std::vector<AppliedEvent> FaultInjector::apply_due(CacheStack& stack, SimTime now) {
  std::vector<AppliedEvent> rows;
  while (!done() && schedule_.events[next_].time <= now) {
    const auto& e = schedule_.events[next_++];
    for (int d = 0; d < 2; ++d) {
      auto& dev = stack.device(d);
      switch (e.kind) {
        case FaultKind::PowerCut:
          if (dev.power() == PowerState::On) dev.power_cut(e.time);
          break;
        case FaultKind::PowerOn:
          if (dev.power() == PowerState::Off) dev.power_on(e.time);
          break;
        case FaultKind::SetAmbient:
          dev.set_ambient(e.temp_c, e.time);
          break;
      }
      rows.push_back({e.time, e.kind, d, dev.health(), e.temp_c});
    }
  }
  log_.insert(log_.end(), rows.begin(), rows.end());
  return rows;
}

std::vector<AppliedEvent> inject(const FaultSchedule& s, CacheStack& stack, SimTime start) {
  FaultInjector inj(s);
  stack.tick(start);
  while (auto t = inj.next_time()) {
    while (auto n = stack.next_event_time()) {
      if (*n > *t) break;
      stack.tick(*n);
    }
    stack.tick(*t);
    inj.apply_due(stack, *t);
  }
  return inj.log();
}

void write_fault_log(std::ostream& out, const std::vector<AppliedEvent>& log) {
  out << "time_us,event,device,health_after\n";
  for (const auto& r : log) {
    out << r.time << ',' << to_string(r.kind);
    if (r.kind == FaultKind::SetAmbient) out << '(' << r.temp_c << ')';
    out << ',' << r.device << ',' << to_string(r.health_after) << '\n';
  }
}

std::vector<AppliedEvent> read_fault_log(std::istream& in) {
  std::vector<AppliedEvent> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::istringstream ss(line);
    std::string time, event, device, health;
    if (!std::getline(ss, time, ',') || !std::getline(ss, event, ',') || !std::getline(ss, device, ',') ||
        !std::getline(ss, health))
      throw ParseError("malformed fault log row", lineno);
    AppliedEvent r;
    try {
      r.time = std::stoll(time);
      r.device = std::stoi(device);
    } catch (const std::exception&) {
      throw ParseError("malformed fault log row", lineno);
    }
    if (event == "power_cut") r.kind = FaultKind::PowerCut;
    else if (event == "power_on") r.kind = FaultKind::PowerOn;
    else if (event.rfind("set_ambient(", 0) == 0 && event.back() == ')') {
      r.kind = FaultKind::SetAmbient;
      r.temp_c = std::stod(event.substr(12, event.size() - 13));
    } else {
      throw ParseError("unknown fault event '" + event + "'", lineno);
    }
    bool found = false;
    for (auto h : {Health::Healthy, Health::MetadataCorruption, Health::InterfaceCorruption, Health::ChipFailure})
      if (health == to_string(h)) {
        r.health_after = h;
        found = true;
      }
    if (!found) throw ParseError("unknown health '" + health + "'", lineno);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace ssdrel
