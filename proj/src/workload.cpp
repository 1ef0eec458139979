#include "ssdrel/workload.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ssdrel/rng.hpp"

namespace ssdrel {

const char* to_string(AccessPattern p) {
  switch (p) {
    case AccessPattern::Sequential: return "sequential";
    case AccessPattern::Trace: return "trace";
    case AccessPattern::UniformRandom: break;
  }
  return "uniform_random";
}

const char* to_string(SequenceMode m) {
  switch (m) {
    case SequenceMode::RAR: return "RAR";
    case SequenceMode::RAW: return "RAW";
    case SequenceMode::WAR: return "WAR";
    case SequenceMode::WAW: return "WAW";
    case SequenceMode::Mixed: break;
  }
  return "mixed";
}

bool parse_access_pattern(std::string_view s, AccessPattern& out) {
  for (auto p : {AccessPattern::UniformRandom, AccessPattern::Sequential, AccessPattern::Trace}) {
    if (s == to_string(p)) {
      out = p;
      return true;
    }
  }
  return false;
}

bool parse_sequence_mode(std::string_view s, SequenceMode& out) {
  for (auto m : {SequenceMode::Mixed, SequenceMode::RAR, SequenceMode::RAW, SequenceMode::WAR,
                 SequenceMode::WAW}) {
    if (s == to_string(m)) {
      out = m;
      return true;
    }
  }
  return false;
}

void WorkloadSpec::validate() const {
  if (request_count == 0) throw SpecError("request_count must be positive");
  if (!(read_fraction >= 0.0 && read_fraction <= 1.0)) throw SpecError("read_fraction outside [0,1]");
  if (size.min_bytes == 0 || size.min_bytes > size.max_bytes) throw SpecError("bad size distribution");
  if (!block_aligned(size.min_bytes) || !block_aligned(size.max_bytes))
    throw SpecError("request sizes must be multiples of 4 KiB");
  if (!block_aligned(wss_bytes)) throw SpecError("wss must be a multiple of 4 KiB");
  if (wss_bytes < size.max_bytes) throw SpecError("wss smaller than the largest request");
  if (!(target_iops > 0)) throw SpecError("target_iops must be positive or unlimited");
  if (pattern == AccessPattern::Trace && trace_path.empty()) throw SpecError("trace pattern needs a trace path");
}

namespace {

std::uint64_t draw_size(const SizeDist& d, Rng& rng) {
  if (d.kind == SizeDist::Kind::Fixed) return d.min_bytes;
  return rng.between(d.min_bytes / kBlockBytes, d.max_bytes / kBlockBytes) * kBlockBytes;
}

class AddressSource {
 public:
  AddressSource(const WorkloadSpec& spec, Rng& rng) : spec_(spec), rng_(rng) {}

  std::uint64_t next(std::uint64_t size) {
    if (spec_.pattern == AccessPattern::Sequential) {
      if (cursor_ + size > spec_.wss_bytes) cursor_ = 0;
      const auto a = cursor_;
      cursor_ += size;
      return a;
    }
    const auto slots = (spec_.wss_bytes - size) / kBlockBytes + 1;
    return rng_.below(slots) * kBlockBytes;
  }

 private:
  const WorkloadSpec& spec_;
  Rng& rng_;
  std::uint64_t cursor_ = 0;
};

std::pair<OpKind, OpKind> pair_ops(SequenceMode m) {
  switch (m) {
    case SequenceMode::RAR: return {OpKind::Read, OpKind::Read};
    case SequenceMode::RAW: return {OpKind::Write, OpKind::Read};
    case SequenceMode::WAR: return {OpKind::Read, OpKind::Write};
    default: return {OpKind::Write, OpKind::Write};
  }
}

SequenceTag tag_of(SequenceMode m) {
  switch (m) {
    case SequenceMode::RAR: return SequenceTag::RAR;
    case SequenceMode::RAW: return SequenceTag::RAW;
    case SequenceMode::WAR: return SequenceTag::WAR;
    case SequenceMode::WAW: return SequenceTag::WAW;
    default: return SequenceTag::Untagged;
  }
}

std::vector<IoRequest> generate_mixed(const WorkloadSpec& spec, Rng& rng) {
  const auto n = spec.request_count;
  const auto reads = static_cast<std::uint64_t>(std::llround(spec.read_fraction * static_cast<double>(n)));
  std::vector<bool> is_read(n, false);
  for (std::uint64_t i = 0; i < reads; ++i) is_read[i] = true;
  rng.shuffle(is_read);

  AddressSource addrs(spec, rng);
  std::vector<IoRequest> out(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto& r = out[i];
    r.index = i;
    r.op = is_read[i] ? OpKind::Read : OpKind::Write;
    r.size_bytes = draw_size(spec.size, rng);
    r.address = addrs.next(r.size_bytes);
  }
  return out;
}

// Groups of kSequenceWindow: the first halves of each pair, then the second
// halves in a shuffled order, so each pair sits at most window-1 apart.
std::vector<IoRequest> generate_sequenced(const WorkloadSpec& spec, Rng& rng) {
  const auto [first_op, second_op] = pair_ops(spec.sequence_mode);
  const auto tag = tag_of(spec.sequence_mode);
  AddressSource addrs(spec, rng);
  std::vector<IoRequest> out;
  out.reserve(spec.request_count);
  while (out.size() < spec.request_count) {
    const auto room = spec.request_count - out.size();
    const auto pairs = std::min<std::size_t>(kSequenceWindow / 2, room / 2);
    if (pairs == 0) {
      IoRequest r;
      r.op = first_op;
      r.size_bytes = draw_size(spec.size, rng);
      r.address = addrs.next(r.size_bytes);
      out.push_back(r);
      continue;
    }
    std::vector<IoRequest> firsts(pairs);
    for (auto& f : firsts) {
      f.op = first_op;
      f.size_bytes = draw_size(spec.size, rng);
      f.address = addrs.next(f.size_bytes);
      f.issuer_id = 0;
    }
    std::vector<std::size_t> order(pairs);
    for (std::size_t i = 0; i < pairs; ++i) order[i] = i;
    rng.shuffle(order);
    for (const auto& f : firsts) out.push_back(f);
    for (auto i : order) {
      IoRequest s = firsts[i];
      s.op = second_op;
      s.issuer_id = 1;
      s.tag = tag;
      out.push_back(s);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].index = i;
  return out;
}

}  // namespace

std::vector<IoRequest> generate(const WorkloadSpec& spec) {
  spec.validate();
  if (spec.pattern == AccessPattern::Trace) {
    auto reqs = replay_trace(spec.trace_path, spec.wss_bytes);
    if (reqs.size() > spec.request_count) reqs.resize(spec.request_count);
    return reqs;
  }
  Rng rng(derive_seed(spec.seed, 0x301c));
  if (spec.sequence_mode == SequenceMode::Mixed) return generate_mixed(spec, rng);
  return generate_sequenced(spec, rng);
}

std::vector<IoRequest> read_trace(std::istream& in, std::uint64_t wss_bytes) {
  std::vector<IoRequest> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    std::int64_t ts;
    std::string op;
    std::uint64_t addr, size;
    std::string extra;
    if (!(row >> ts >> op >> addr >> size) || (row >> extra) || ts < 0 || size == 0)
      throw ParseError("malformed trace row " + std::to_string(lineno), lineno);
    IoRequest r;
    if (op == "R" || op == "r" || op == "read") r.op = OpKind::Read;
    else if (op == "W" || op == "w" || op == "write") r.op = OpKind::Write;
    else throw ParseError("unknown op '" + op + "' on trace row " + std::to_string(lineno), lineno);
    r.size_bytes = (size + kBlockBytes - 1) / kBlockBytes * kBlockBytes;
    if (r.size_bytes > wss_bytes) throw ParseError("request larger than wss on trace row " + std::to_string(lineno), lineno);
    r.address = (addr % wss_bytes) / kBlockBytes * kBlockBytes;
    if (r.address + r.size_bytes > wss_bytes) r.address = wss_bytes - r.size_bytes;
    r.trace_time = ts;
    r.index = out.size();
    out.push_back(r);
  }
  return out;
}

std::vector<IoRequest> replay_trace(const std::string& path, std::uint64_t wss_bytes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace " + path);
  return read_trace(in, wss_bytes);
}

void write_trace(std::ostream& out, const std::vector<IoRequest>& requests) {
  out << "# timestamp_us op address_bytes size_bytes\n";
  for (const auto& r : requests)
    out << r.trace_time << ' ' << (r.op == OpKind::Read ? 'R' : 'W') << ' ' << r.address << ' '
        << r.size_bytes << '\n';
}

std::vector<IoRequest> make_cello_like(std::uint64_t seed, std::size_t count, std::uint64_t span_bytes,
                                       double read_fraction) {
  constexpr std::uint64_t kSize = 8 * KiB;
  constexpr double kContinueRun = 0.6;
  Rng rng(derive_seed(seed, 0xce11));
  std::vector<IoRequest> out(count);
  std::uint64_t next_addr = 0;
  SimTime t = 0;
  for (std::size_t i = 0; i < count; ++i) {
    auto& r = out[i];
    r.index = i;
    r.size_bytes = kSize;
    if (i == 0 || !rng.chance(kContinueRun) || next_addr + kSize > span_bytes)
      next_addr = rng.below(span_bytes / kSize) * kSize;
    r.address = next_addr;
    next_addr += kSize;
    r.op = rng.chance(read_fraction) ? OpKind::Read : OpKind::Write;
    t += 100 + static_cast<SimTime>(rng.below(900));
    r.trace_time = t;
  }
  return out;
}

void pace(std::vector<IoRequest>& requests, double target_iops, SimTime start) {
  if (!(target_iops > 0)) throw SpecError("target_iops must be positive");
  if (std::isinf(target_iops)) {
    for (auto& r : requests) r.issue_time = start;
    return;
  }
  for (std::size_t i = 0; i < requests.size(); ++i)
    requests[i].issue_time = start + static_cast<SimTime>(std::floor(static_cast<double>(i) * 1e6 / target_iops));
}

}  // namespace ssdrel
