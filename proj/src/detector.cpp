#include "ssdrel/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace ssdrel {

namespace {

constexpr const char* kKindNames[kFailureKindCount] = {
    "NoFailure", "IOError", "FWA", "Unserializable", "ShornWrite", "FDC", "FlyingWrite", "DeadDevice",
    "InconsistentRecord"};

constexpr const char* kDeadNames[3] = {"Metadata", "Interface", "Chip"};

std::size_t idx(FailureKind k) { return static_cast<std::size_t>(k); }

Verdict from_checksums(const DataPacket& p, Checksum64 final_sum, std::span<const Checksum64> sub_final, bool waw,
                       SimTime response, const DetectorConfig& cfg) {
  Verdict v;
  if (response > cfg.timeout_us) {
    v.kind = FailureKind::IOError;
    return v;
  }
  if (final_sum == p.data_checksum) return v;
  if (final_sum == p.initial_checksum) {
    v.kind = waw ? FailureKind::Unserializable : FailureKind::FWA;
    return v;
  }
  std::uint32_t failed = 0;
  for (std::size_t i = 0; i < p.sub_requests.size(); ++i)
    if (sub_final[i] != p.sub_requests[i].data_checksum) ++failed;
  if (failed == p.sub_requests.size()) {
    v.kind = FailureKind::FDC;
  } else if (failed > 0) {
    v.kind = FailureKind::ShornWrite;
    v.failed_subs = failed;
  } else {
    v.kind = FailureKind::InconsistentRecord;
  }
  return v;
}

}  // namespace

const char* to_string(FailureKind k) { return kKindNames[idx(k)]; }

bool parse_failure_kind(std::string_view s, FailureKind& out) {
  for (std::size_t i = 0; i < kFailureKindCount; ++i) {
    if (s == kKindNames[i]) {
      out = static_cast<FailureKind>(i);
      return true;
    }
  }
  return false;
}

const char* to_string(DeadKind k) { return kDeadNames[static_cast<std::size_t>(k)]; }

bool is_data_failure(FailureKind k) {
  switch (k) {
    case FailureKind::FWA:
    case FailureKind::Unserializable:
    case FailureKind::ShornWrite:
    case FailureKind::FDC:
    case FailureKind::FlyingWrite:
      return true;
    default:
      return false;
  }
}

std::string Verdict::detail() const {
  switch (kind) {
    case FailureKind::ShornWrite:
      return std::to_string(failed_subs);
    case FailureKind::FlyingWrite:
      return std::to_string(found_at);
    case FailureKind::DeadDevice:
      return kDeadNames[static_cast<std::size_t>(dead)];
    default:
      return "";
  }
}

void DetectorConfig::validate() const {
  if (timeout_us <= 0) throw std::invalid_argument("detector timeout must be positive");
}

Verdict classify(const DataPacket& p, bool waw_flag, SimTime response_time_us, const DetectorConfig& cfg) {
  if (response_time_us > cfg.timeout_us) return from_checksums(p, {}, {}, waw_flag, response_time_us, cfg);
  if (!p.finalized()) throw ClassificationError("packet " + std::to_string(p.id) + " has no final checksum");
  std::vector<Checksum64> subs;
  subs.reserve(p.sub_requests.size());
  for (const auto& s : p.sub_requests) {
    if (!s.final_checksum) throw ClassificationError("packet " + std::to_string(p.id) + " has an unfinalized sub");
    subs.push_back(*s.final_checksum);
  }
  return from_checksums(p, *p.final_checksum, subs, waw_flag, response_time_us, cfg);
}

Verdict classify(const DataPacket& p, std::span<const std::uint8_t> final_snapshot, bool waw_flag,
                 SimTime response_time_us, const DetectorConfig& cfg) {
  if (response_time_us > cfg.timeout_us) return from_checksums(p, {}, {}, waw_flag, response_time_us, cfg);
  if (final_snapshot.size() != p.size_bytes) {
    if (final_snapshot.empty() && p.finalized()) return classify(p, waw_flag, response_time_us, cfg);
    throw ClassificationError("packet " + std::to_string(p.id) + " has no snapshot covering its range");
  }
  auto subs = sub_checksums(p, final_snapshot);
  return from_checksums(p, checksum(final_snapshot), subs, waw_flag, response_time_us, cfg);
}

void write_verdict_log(std::ostream& out, const std::vector<VerdictRecord>& records) {
  out << "packet_id,kind,detail,response_time_us\n";
  for (const auto& r : records)
    out << r.packet_id << ',' << to_string(r.verdict.kind) << ',' << r.verdict.detail() << ','
        << r.response_time_us << '\n';
}

std::vector<VerdictRecord> read_verdict_log(std::istream& in) {
  std::vector<VerdictRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 4) throw ParseError("verdict row needs 4 fields", lineno);
    VerdictRecord r;
    try {
      r.packet_id = std::stoull(f[0]);
      r.response_time_us = std::stoll(f[3]);
    } catch (const std::exception&) {
      throw ParseError("bad number in verdict row", lineno);
    }
    if (!parse_failure_kind(f[1], r.verdict.kind)) throw ParseError("unknown kind '" + f[1] + "'", lineno);
    try {
      if (r.verdict.kind == FailureKind::ShornWrite) r.verdict.failed_subs = static_cast<std::uint32_t>(std::stoul(f[2]));
      if (r.verdict.kind == FailureKind::FlyingWrite) r.verdict.found_at = std::stoull(f[2]);
    } catch (const std::exception&) {
      throw ParseError("bad detail in verdict row", lineno);
    }
    if (r.verdict.kind == FailureKind::DeadDevice) {
      auto it = std::find(std::begin(kDeadNames), std::end(kDeadNames), f[2]);
      if (it == std::end(kDeadNames)) throw ParseError("unknown dead state '" + f[2] + "'", lineno);
      r.verdict.dead = static_cast<DeadKind>(it - std::begin(kDeadNames));
    }
    out.push_back(r);
  }
  return out;
}

std::uint64_t ExperimentReport::data_failures() const {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < kFailureKindCount; ++i)
    if (is_data_failure(static_cast<FailureKind>(i))) n += counts[i];
  return n;
}

std::optional<double> ExperimentReport::failures_per_power_fault() const {
  if (power_faults == 0) return std::nullopt;
  return static_cast<double>(data_failures()) / static_cast<double>(power_faults);
}

double ExperimentReport::rate(FailureKind k) const {
  double c = static_cast<double>(count(k));
  return power_faults == 0 ? c : c / static_cast<double>(power_faults);
}

ExperimentReport& ExperimentReport::operator+=(const ExperimentReport& o) {
  for (std::size_t i = 0; i < kFailureKindCount; ++i) counts[i] += o.counts[i];
  for (std::size_t i = 0; i < dead_incidents.size(); ++i) dead_incidents[i] += o.dead_incidents[i];
  power_faults += o.power_faults;
  return *this;
}

ExperimentReport aggregate(const std::vector<VerdictRecord>& verdicts, const std::vector<AppliedEvent>& fault_log) {
  ExperimentReport r;
  for (const auto& v : verdicts) ++r.counts[idx(v.verdict.kind)];
  // Each applied cut logs one row per device; count device 0 rows. Logs of
  // several runs may be concatenated: a clock going backwards starts a new
  // run with healthy devices.
  std::map<int, std::pair<Health, SimTime>> last;
  for (const auto& e : fault_log) {
    if (e.kind == FaultKind::PowerCut && e.device == 0) ++r.power_faults;
    auto& [health, when] = last.try_emplace(e.device, Health::Healthy, e.time).first->second;
    if (e.time < when) health = Health::Healthy;
    when = e.time;
    if (e.health_after != health && health == Health::Healthy) {
      switch (e.health_after) {
        case Health::MetadataCorruption: ++r.dead_incidents[0]; break;
        case Health::InterfaceCorruption: ++r.dead_incidents[1]; break;
        case Health::ChipFailure: ++r.dead_incidents[2]; break;
        default: break;
      }
    }
    health = e.health_after;
  }
  r.counts[idx(FailureKind::DeadDevice)] = r.dead_incidents[0] + r.dead_incidents[1] + r.dead_incidents[2];
  return r;
}

double DependencyMatrix::cell(const std::string& sweep, FailureKind k) const {
  auto row = std::find(sweeps.begin(), sweeps.end(), sweep);
  auto col = std::find(kMatrixKinds.begin(), kMatrixKinds.end(), k);
  if (row == sweeps.end() || col == kMatrixKinds.end()) throw std::out_of_range("no such matrix cell");
  return variation[row - sweeps.begin()][col - kMatrixKinds.begin()];
}

std::size_t DependencyMatrix::rank_of(FailureKind k) const {
  for (std::size_t i = 0; i < ranking.size(); ++i)
    if (ranking[i].first == k) return i;
  throw std::out_of_range("kind not ranked");
}

DependencyMatrix dependency_matrix(const std::vector<SweepGroup>& groups) {
  DependencyMatrix m;
  std::array<double, kMatrixKinds.size()> totals{};
  for (const auto& g : groups) {
    if (g.reports.size() < 2) throw std::invalid_argument("sweep '" + g.sweep + "' needs at least two points");
    std::array<double, kMatrixKinds.size()> row{};
    for (std::size_t c = 0; c < kMatrixKinds.size(); ++c) {
      double lo = INFINITY, hi = -INFINITY, sum = 0;
      for (const auto& r : g.reports) {
        double x = r.rate(kMatrixKinds[c]);
        lo = std::min(lo, x);
        hi = std::max(hi, x);
        sum += x;
      }
      double mean = sum / static_cast<double>(g.reports.size());
      row[c] = mean > 0 ? (hi - lo) / mean * 100.0 : 0.0;
      totals[c] += row[c];
    }
    m.sweeps.push_back(g.sweep);
    m.variation.push_back(row);
  }
  for (std::size_t c = 0; c < kMatrixKinds.size(); ++c) m.ranking.emplace_back(kMatrixKinds[c], totals[c]);
  std::stable_sort(m.ranking.begin(), m.ranking.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return m;
}

void write_dependency_matrix(std::ostream& out, const DependencyMatrix& m) {
  auto fmt = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return std::string(buf);
  };
  out << "sweep";
  for (auto k : kMatrixKinds) out << ',' << to_string(k);
  out << '\n';
  for (std::size_t r = 0; r < m.sweeps.size(); ++r) {
    out << m.sweeps[r];
    for (double v : m.variation[r]) out << ',' << fmt(v);
    out << '\n';
  }
  out << "total";
  for (auto k : kMatrixKinds) {
    auto it = std::find_if(m.ranking.begin(), m.ranking.end(), [&](const auto& p) { return p.first == k; });
    out << ',' << fmt(it == m.ranking.end() ? 0.0 : it->second);
  }
  out << '\n';
}

}  // namespace ssdrel
