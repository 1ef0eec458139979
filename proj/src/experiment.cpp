#include "ssdrel/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ssdrel/cache_stack.hpp"
#include "ssdrel/flying_scan.hpp"
#include "ssdrel/report.hpp"
#include "ssdrel/rng.hpp"

namespace ssdrel {

const char* to_string(TracePhase p) {
  switch (p) {
    case TracePhase::Queued: return "queued";
    case TracePhase::Dispatched: return "dispatched";
    case TracePhase::Completed: return "completed";
    case TracePhase::TimedOut: return "timed_out";
  }
  return "?";
}

namespace {

// Seed streams derived from the experiment seed.
enum Stream : std::uint64_t { kWorkload = 1, kPrimary, kSecondary, kSchedule, kPhase, kPayload, kPrefill };

constexpr SimTime kIdleSampleStep = kSecond;
constexpr SimTime kOutageSampleStep = 100 * kMillisecond;

struct PacketState {
  DataPacket pkt;
  bool waw = false;
  bool acked = false;
  bool done = false;
  std::optional<std::vector<std::uint8_t>> held_snapshot;
};

struct OpRef {
  std::int64_t request = -1;
  std::int64_t packet = -1;
};

// Throughput is measured from the first arrival until the primary stops
// accepting commands after the segment's cut; a segment with no cut is
// measured up to its last completion.
struct Segment {
  std::size_t lo = 0, hi = 0;
  SimTime first_arrival = 0;
  std::optional<SimTime> window_end;
  SimTime last_completion = -1;
  std::uint64_t ok_in_window = 0;
};

class Runner {
 public:
  explicit Runner(const ExperimentConfig& cfg);
  ExperimentResult run();

 private:
  SsdConfig device_config(SsdConfig c, Stream s) const {
    c.seed = derive_seed(cfg_.seed, s);
    return c;
  }
  void build_workload();
  void place_segments();
  void prefill();

  std::optional<SimTime> next_time() const;
  bool finished() const;
  void step(SimTime now);
  void handle(const StackEvent& e, SimTime now);
  void apply_faults(SimTime now);
  void round(SimTime now);
  void arrive(std::size_t req, SimTime now);
  void dispatch(std::size_t req, SimTime now);
  void sample(SimTime now);
  void finish_run();

  bool can_dispatch() const { return stack_.accepting() && !round_at_ && backlog_.empty(); }
  std::uint64_t new_packet(DataPacket pkt, bool waw);
  void settle_overlaps(std::uint64_t address, std::uint64_t size, SimTime now);
  void index_add(const DataPacket& p);
  void index_remove(const DataPacket& p);
  std::vector<std::uint8_t> view(const DataPacket& p) const;
  void finalize(PacketState& ps, std::span<const std::uint8_t> snapshot);
  void record(PacketState& ps, Verdict v, SimTime response);
  bool waw_flag(std::size_t req) const;
  const BlockChecksumIndex& flying_index();

  ExperimentConfig cfg_;
  CacheStack stack_;
  Rng payload_rng_;
  std::vector<IoRequest> requests_;
  std::vector<std::size_t> segment_of_;
  std::vector<Segment> segments_;
  FaultSchedule schedule_;
  std::unique_ptr<FaultInjector> injector_;
  SimTime recovery_us_ = 0;

  std::size_t next_arrival_ = 0;
  std::deque<std::size_t> backlog_;
  std::optional<SimTime> round_at_;
  SimTime next_sample_ = 0;
  SimTime now_ = 0;

  std::unordered_map<OpId, OpRef> ops_;
  std::vector<PacketState> packets_;
  std::unordered_map<std::uint64_t, std::vector<std::uint64_t>> open_by_block_;
  std::set<std::uint64_t> open_;
  std::vector<bool> completed_;
  std::uint64_t completed_ok_ = 0;
  BlockChecksumIndex index_;
  int index_device_ = -1;
  bool index_fresh_ = false;  // valid until the round ends
  bool in_round_ = false;

  ExperimentResult out_;
  std::map<std::uint64_t, VerdictRecord> verdicts_;
};

Runner::Runner(const ExperimentConfig& cfg)
    : cfg_(cfg),
      stack_(cfg.cache, cfg.raid, cfg.backing, device_config(cfg.primary, kPrimary),
             device_config(cfg.secondary, kSecondary)),
      payload_rng_(derive_seed(cfg.seed, kPayload)) {
  recovery_us_ = std::max(cfg_.primary.recovery_us, cfg_.secondary.recovery_us);
  build_workload();
  place_segments();
  prefill();
}

void Runner::build_workload() {
  auto w = cfg_.workload;
  w.seed = derive_seed(cfg_.seed, kWorkload);
  if (w.pattern == AccessPattern::Trace && w.trace_path == "cello") {
    w.validate();
    requests_ = make_cello_like(w.seed, w.request_count, w.wss_bytes, w.read_fraction);
  } else {
    requests_ = generate(w);
  }
  completed_.assign(requests_.size(), false);
}

void Runner::place_segments() {
  const auto& f = cfg_.faults;
  const std::size_t n = f.n_faults;
  ScheduleParams sp;
  sp.n_faults = n;
  sp.min_gap_us = f.min_gap_us;
  sp.t_zero_us = f.off_us;
  sp.distribution = f.distribution;
  sp.run_duration_us = static_cast<SimTime>(n + 1) * (f.min_gap_us + f.off_us + recovery_us_);
  try {
    schedule_ = schedule(derive_seed(cfg_.seed, kSchedule), sp);
    if (!std::isnan(f.ambient_c)) add_ambient(schedule_, f.ambient_at_us, f.ambient_c);
  } catch (const ScheduleError& e) {
    throw ConfigError(e.what());
  }

  std::vector<SimTime> cuts;
  for (const auto& e : schedule_.events)
    if (e.kind == FaultKind::PowerCut) cuts.push_back(e.time);

  // One burst of requests per cut, positioned so the cut lands at a random
  // point of the burst's busy span: its arrival span, or the time the
  // primary needs to program its writes if that is longer. Without the
  // second term a saturated stack would see its cuts squeezed toward the
  // start of each burst as the requested rate grows.
  const auto& dev = cfg_.primary;
  const double program_us_per_sub =
      static_cast<double>(dev.program_latency_us) / static_cast<double>(dev.nand_channels);
  Rng phase(derive_seed(cfg_.seed, kPhase));
  const std::size_t total = requests_.size();
  const std::size_t k = std::max<std::size_t>(n, 1);
  const double iops = cfg_.workload.target_iops;
  segment_of_.resize(total);
  SimTime floor_time = 0;
  for (std::size_t i = 0; i < k; ++i) {
    Segment s;
    s.lo = i * total / k;
    s.hi = (i + 1) * total / k;
    SimTime start = cfg_.workload_start_us;
    if (n > 0) {
      double span = iops == kUnlimitedIops ? 0.0 : static_cast<double>(s.hi - s.lo) * 1e6 / iops;
      double busy = 0;
      for (std::size_t j = s.lo; j < s.hi; ++j)
        if (requests_[j].op == OpKind::Write)
          busy += static_cast<double>((requests_[j].size_bytes + kDefaultMaxSubBytes - 1) / kDefaultMaxSubBytes) *
                  program_us_per_sub;
      span = std::max(span, busy);
      start = std::max(floor_time, cuts[i] - static_cast<SimTime>(phase.unit() * span));
      floor_time = cuts[i] + f.off_us + recovery_us_ + 1;
    }
    std::vector<IoRequest> part(requests_.begin() + s.lo, requests_.begin() + s.hi);
    pace(part, iops, start);
    for (std::size_t j = s.lo; j < s.hi; ++j) {
      requests_[j].issue_time = part[j - s.lo].issue_time;
      segment_of_[j] = i;
    }
    s.first_arrival = s.lo < s.hi ? requests_[s.lo].issue_time : start;
    if (n > 0) s.window_end = cuts[i] + cfg_.primary.power.t_unavail_us;
    segments_.push_back(s);
  }
  injector_ = std::make_unique<FaultInjector>(schedule_);
  out_.schedule = schedule_;
}

void Runner::prefill() {
  // Old contents only need to differ from anything written later, so a
  // cheap counter-based stream is enough. The SSDs hold unrelated stale data
  // over the working set, as a cache that served other blocks before; both
  // mirrors start identical.
  std::vector<std::uint64_t> chunk(MiB / 8);
  const auto span = std::min(cfg_.workload.wss_bytes, stack_.backing().capacity_bytes());
  const auto base = derive_seed(cfg_.seed, kPrefill);
  const auto stale = derive_seed(base, ~std::uint64_t{0});
  std::uint64_t counter = 0;
  for (std::uint64_t a = 0; a < span; a += MiB) {
    const auto len = std::min<std::uint64_t>(MiB, span - a);
    const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(chunk.data()), len);
    for (auto& w : chunk) w = derive_seed(base, counter++);
    stack_.backing().write(a, bytes);
    for (std::size_t k = 0; k < chunk.size(); ++k) chunk[k] = derive_seed(stale, counter - chunk.size() + k);
    for (int d = 0; d < 2; ++d)
      if (a + len <= stack_.device(d).nand().capacity_bytes()) stack_.device(d).admin_write(a, bytes);
  }
}

bool Runner::finished() const {
  if (next_arrival_ < requests_.size() || !injector_->done() || round_at_) return false;
  if (!backlog_.empty() && stack_.accepting()) return false;
  return stack_.idle() || !stack_.next_event_time();
}

std::optional<SimTime> Runner::next_time() const {
  std::optional<SimTime> best;
  auto consider = [&](std::optional<SimTime> t) {
    if (t && (!best || *t < *best)) best = t;
  };
  if (next_arrival_ < requests_.size()) consider(requests_[next_arrival_].issue_time);
  consider(stack_.next_event_time());
  consider(injector_->next_time());
  consider(round_at_);
  if (best) consider(std::max(next_sample_, now_));
  return best;
}

void Runner::step(SimTime now) {
  now_ = now;
  for (const auto& e : stack_.tick(now)) handle(e, now);
  if (injector_->next_time() && *injector_->next_time() <= now) apply_faults(now);
  if (round_at_ && *round_at_ <= now) round(now);
  while (next_arrival_ < requests_.size() && requests_[next_arrival_].issue_time <= now) arrive(next_arrival_++, now);
  if (now >= next_sample_) sample(now);
}

void Runner::handle(const StackEvent& e, SimTime now) {
  if (e.kind == StackEventKind::PromotionIssued) {
    settle_overlaps(e.address, e.data->size(), now);
    PacketOptions opts;
    opts.keep_payload = cfg_.store_payloads;
    // Before the promotion the cache returned the backing copy, which is
    // exactly what is being promoted.
    auto pkt = build_packet(OpKind::Write, e.address, *e.data, e.time, *e.data, opts);
    pkt.origin = Origin::Promotion;
    ops_[e.op] = OpRef{-1, static_cast<std::int64_t>(new_packet(std::move(pkt), false))};
    return;
  }
  auto it = ops_.find(e.op);
  if (it == ops_.end()) return;
  const OpRef ref = it->second;
  ops_.erase(it);
  if (ref.request >= 0) {
    const auto r = static_cast<std::size_t>(ref.request);
    completed_[r] = true;
    out_.trace.push_back({r, requests_[r].op, TracePhase::Completed, e.time, -1});
    auto& seg = segments_[segment_of_[r]];
    seg.last_completion = std::max(seg.last_completion, e.time);
    if (!e.error) {
      ++completed_ok_;
      if (!seg.window_end || e.time < *seg.window_end) ++seg.ok_in_window;
    }
  }
  if (ref.packet >= 0) {
    auto& ps = packets_[static_cast<std::size_t>(ref.packet)];
    if (e.error) {
      // The application saw the write fail.
      ps.pkt.complete_time = e.time;
      record(ps, Verdict{FailureKind::IOError}, e.time - ps.pkt.queue_time);
      return;
    }
    ps.acked = true;
    ps.pkt.complete_time = e.time;
    if (ps.held_snapshot) finalize(ps, *ps.held_snapshot);
  }
}

void Runner::apply_faults(SimTime now) {
  for (const auto& row : injector_->apply_due(stack_, now)) {
    out_.fault_log.push_back(row);
    if (row.device != 0) continue;
    if (row.kind == FaultKind::PowerOn) {
      std::optional<SimTime> ready;
      for (int d = 0; d < 2; ++d) {
        const auto& dev = stack_.device(d);
        if (dev.permanently_failed()) continue;
        if (auto r = dev.ready_at(); r && (!ready || *r > *ready)) ready = r;
      }
      round_at_ = ready;
    }
  }
  next_sample_ = std::min(next_sample_, now + cfg_.telemetry_period_us);
}

void Runner::round(SimTime now) {
  round_at_.reset();
  if (auto repaired = stack_.scrub(now)) out_.scrub_repairs += repaired->size();
  // Every acknowledged write not yet judged is read back through the cache.
  in_round_ = true;
  for (auto id : std::vector<std::uint64_t>(open_.begin(), open_.end())) {
    auto& ps = packets_[id];
    if (ps.acked && !ps.done) finalize(ps, view(ps.pkt));
  }
  in_round_ = false;
  index_fresh_ = false;
  stack_.resume(now);
  while (!backlog_.empty() && stack_.accepting()) {
    const auto r = backlog_.front();
    backlog_.pop_front();
    dispatch(r, now);
  }
}

void Runner::arrive(std::size_t r, SimTime now) {
  out_.trace.push_back({r, requests_[r].op, TracePhase::Queued, now, -1});
  if (can_dispatch()) dispatch(r, now);
  else backlog_.push_back(r);
  next_sample_ = std::min(next_sample_, now + cfg_.telemetry_period_us);
}

void Runner::dispatch(std::size_t r, SimTime now) {
  const auto& req = requests_[r];
  if (req.op == OpKind::Read) {
    const auto dev = stack_.route_read();
    out_.trace.push_back({r, req.op, TracePhase::Dispatched, now, dev ? *dev : -1});
    const OpId op = stack_.read(req.address, req.size_bytes, now);
    ops_[op] = OpRef{static_cast<std::int64_t>(r), -1};
    return;
  }
  out_.trace.push_back({r, req.op, TracePhase::Dispatched, now, -1});
  settle_overlaps(req.address, req.size_bytes, now);
  auto payload = std::make_shared<std::vector<std::uint8_t>>(req.size_bytes);
  payload_rng_.fill(payload->data(), payload->size());
  std::vector<std::uint8_t> initial(req.size_bytes);
  stack_.read_view(req.address, initial);
  PacketOptions opts;
  opts.keep_payload = cfg_.store_payloads;
  auto pkt = build_packet(OpKind::Write, req.address, *payload, req.issue_time, initial, opts);
  pkt.sequence_tag = req.tag;
  pkt.issuer_id = req.issuer_id;
  const auto id = new_packet(std::move(pkt), waw_flag(r));
  const OpId op = stack_.write(req.address, std::move(payload), now);
  ops_[op] = OpRef{static_cast<std::int64_t>(r), static_cast<std::int64_t>(id)};
}

bool Runner::waw_flag(std::size_t r) const {
  const auto& req = requests_[r];
  if (req.tag != SequenceTag::WAW) return false;
  const std::size_t lo = r >= kSequenceWindow ? r - kSequenceWindow : 0;
  for (std::size_t j = lo; j < r; ++j) {
    const auto& o = requests_[j];
    if (o.op == OpKind::Write && o.issuer_id != req.issuer_id && o.address < req.address + req.size_bytes &&
        req.address < o.address + o.size_bytes)
      return true;
  }
  return false;
}

std::uint64_t Runner::new_packet(DataPacket pkt, bool waw) {
  const std::uint64_t id = packets_.size();
  pkt.id = id;
  PacketState ps;
  ps.pkt = std::move(pkt);
  ps.waw = waw;
  packets_.push_back(std::move(ps));
  index_add(packets_.back().pkt);
  open_.insert(id);
  return id;
}

void Runner::index_add(const DataPacket& p) {
  for (auto b = p.address / kBlockBytes; b < (p.address + p.size_bytes) / kBlockBytes; ++b)
    open_by_block_[b].push_back(p.id);
}

void Runner::index_remove(const DataPacket& p) {
  for (auto b = p.address / kBlockBytes; b < (p.address + p.size_bytes) / kBlockBytes; ++b) {
    auto it = open_by_block_.find(b);
    if (it == open_by_block_.end()) continue;
    std::erase(it->second, p.id);
    if (it->second.empty()) open_by_block_.erase(it);
  }
}

void Runner::settle_overlaps(std::uint64_t address, std::uint64_t size, SimTime /*now*/) {
  // An overwrite hides the older packet's outcome; judge it on what is
  // visible right before the new data goes out.
  std::set<std::uint64_t> hit;
  for (auto b = address / kBlockBytes; b < (address + size) / kBlockBytes; ++b)
    if (auto it = open_by_block_.find(b); it != open_by_block_.end()) hit.insert(it->second.begin(), it->second.end());
  for (auto id : hit) {
    auto& ps = packets_[id];
    if (ps.done || ps.held_snapshot) continue;
    auto snap = view(ps.pkt);
    if (ps.acked) finalize(ps, snap);
    else ps.held_snapshot = std::move(snap);
  }
}

std::vector<std::uint8_t> Runner::view(const DataPacket& p) const {
  std::vector<std::uint8_t> buf(p.size_bytes);
  stack_.read_view(p.address, buf);
  return buf;
}

const BlockChecksumIndex& Runner::flying_index() {
  const int d = stack_.device(0).permanently_failed() ? 1 : 0;
  if (!index_fresh_ || index_device_ != d) {
    if (index_device_ != d) index_ = BlockChecksumIndex();
    index_.refresh(stack_.device(d).nand());
    index_device_ = d;
    index_fresh_ = in_round_;
  }
  return index_;
}

void Runner::finalize(PacketState& ps, std::span<const std::uint8_t> snapshot) {
  const SimTime ack = *ps.pkt.complete_time;
  ps.pkt.complete_time.reset();
  finalize_packet(ps.pkt, snapshot, ack);
  ps.held_snapshot.reset();
  const SimTime response = ack - ps.pkt.queue_time;
  Verdict v = classify(ps.pkt, ps.waw, response, cfg_.detector);
  if (cfg_.detector.flying_scan && (v.kind == FailureKind::FWA || v.kind == FailureKind::InconsistentRecord)) {
    // Device images are stable for the whole verification round, so the
    // index is refreshed once per round and before every other scan.
    if (auto at = scan_flying(flying_index(), ps.pkt)) v = Verdict{FailureKind::FlyingWrite, 0, *at};
  }
  record(ps, v, response);
}

void Runner::record(PacketState& ps, Verdict v, SimTime response) {
  ps.done = true;
  ps.held_snapshot.reset();
  index_remove(ps.pkt);
  open_.erase(ps.pkt.id);
  verdicts_[ps.pkt.id] = VerdictRecord{ps.pkt.id, v, response, ps.pkt.origin};
}

void Runner::sample(SimTime now) {
  for (int d = 0; d < 2; ++d) out_.telemetry.push_back({now, d, stack_.device(d).telemetry(now)});
  bool powered = false, off = false;
  for (int d = 0; d < 2; ++d) {
    const auto p = stack_.device(d).power();
    powered = powered || p == PowerState::On || p == PowerState::FallingVoltage;
    off = off || p == PowerState::Off || p == PowerState::Recovering;
  }
  SimTime step = kIdleSampleStep;
  if (powered && !stack_.idle()) step = cfg_.telemetry_period_us;
  else if (off) step = kOutageSampleStep;
  next_sample_ = now + step;
}

void Runner::finish_run() {
  SimTime end = now_;
  for (std::size_t r = 0; r < requests_.size(); ++r)
    if (!completed_[r]) end = std::max(end, requests_[r].issue_time + cfg_.detector.timeout_us + 1);
  in_round_ = true;
  for (auto id : std::vector<std::uint64_t>(open_.begin(), open_.end())) {
    auto& ps = packets_[id];
    if (ps.acked) finalize(ps, view(ps.pkt));
    else record(ps, Verdict{FailureKind::IOError}, end - ps.pkt.queue_time);
  }
  for (std::size_t r = 0; r < requests_.size(); ++r)
    if (!completed_[r]) out_.trace.push_back({r, requests_[r].op, TracePhase::TimedOut, end, -1});
  out_.end_time = end;
}

ExperimentResult Runner::run() {
  while (!finished()) {
    auto t = next_time();
    if (!t) break;
    step(std::max(*t, now_));
  }
  finish_run();

  for (auto& [id, v] : verdicts_) out_.verdicts.push_back(v);
  out_.packets.reserve(packets_.size());
  for (auto& ps : packets_) out_.packets.push_back(std::move(ps.pkt));
  for (int d = 0; d < 2; ++d) out_.relocations += stack_.device(d).relocations().size();

  auto& rep = out_.report;
  rep = aggregate(out_.verdicts, out_.fault_log);
  rep.sweep_key = cfg_.sweep_key;
  rep.sweep_value = cfg_.sweep_value;
  rep.requests = requests_.size();

  SimTime busy = 0;
  std::uint64_t served = 0;
  for (const auto& s : segments_) {
    const SimTime end = s.window_end ? *s.window_end : s.last_completion;
    if (end <= s.first_arrival) continue;
    busy += end - s.first_arrival;
    served += s.ok_in_window;
  }
  rep.responded_iops = busy > 0 ? round6(static_cast<double>(served) * 1e6 / static_cast<double>(busy)) : 0.0;

  auto& tel = rep.telemetry;
  double sum_i = 0, sum_t = 0;
  for (const auto& s : out_.telemetry) {
    sum_i += s.value.current_ma;
    sum_t += s.value.temperature_c;
    tel.max_current_ma = std::max(tel.max_current_ma, s.value.current_ma);
    tel.max_temperature_c = std::max(tel.max_temperature_c, s.value.temperature_c);
  }
  tel.samples = out_.telemetry.size();
  if (tel.samples > 0) {
    tel.mean_current_ma = round6(sum_i / static_cast<double>(tel.samples));
    tel.mean_temperature_c = round6(sum_t / static_cast<double>(tel.samples));
  }
  tel.max_current_ma = round6(tel.max_current_ma);
  tel.max_temperature_c = round6(tel.max_temperature_c);
  return std::move(out_);
}

}  // namespace

ExperimentResult simulate(const ExperimentConfig& cfg) {
  cfg.validate();
  Runner runner(cfg);
  return runner.run();
}

void write_trace_log(std::ostream& out, const std::vector<TraceEvent>& trace) {
  out << "request,op,phase,time_us,device\n";
  for (const auto& e : trace)
    out << e.request << ',' << to_string(e.op) << ',' << to_string(e.phase) << ',' << e.time << ',' << e.device
        << '\n';
}

void write_telemetry_log(std::ostream& out, const std::vector<TelemetrySample>& samples) {
  out << "time_us,device,power,current_ma,temperature_c\n";
  char buf[64];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", s.value.current_ma, s.value.temperature_c);
    out << s.time << ',' << s.device << ',' << to_string(s.value.power) << ',' << buf << '\n';
  }
}

void write_outputs(const ExperimentResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  ensure_writable_dir(dir);
  auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
  std::ostringstream v, t, tel, f, db;
  write_verdict_log(v, r.verdicts);
  write_trace_log(t, r.trace);
  write_telemetry_log(tel, r.telemetry);
  write_fault_log(f, r.fault_log);
  for (const auto& p : r.packets) db << encode_record(p) << '\n';
  write_file(path("verdicts.csv"), v.str());
  write_file(path("trace.csv"), t.str());
  write_file(path("telemetry.csv"), tel.str());
  write_file(path("faults.csv"), f.str());
  write_file(path("packets.db"), db.str());
  emit_report({r.report}, dir, ReportFormat::Csv);
  emit_report({r.report}, dir, ReportFormat::Json);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (!cfg.output_dir.empty()) ensure_writable_dir(cfg.output_dir);
  auto result = simulate(cfg);
  if (!cfg.output_dir.empty()) write_outputs(result, cfg.output_dir);
  return result.report;
}

}  // namespace ssdrel
