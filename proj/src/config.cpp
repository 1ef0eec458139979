#include "ssdrel/config.hpp"

#include <boost/program_options.hpp>
#include <cmath>
#include <fstream>
#include <sstream>

namespace po = boost::program_options;

namespace ssdrel {

namespace {

const char* kSsdKeys[] = {
    "preset",         "capacity",          "ncq_depth",      "buffer",         "program_latency_us",
    "ack_on_buffer",  "plp",               "map_checkpoint_every",             "p_fly",         "p_torn_program",
    "hazard_metadata", "hazard_interface", "hazard_chip",    "throttle_temp_c", "nand_channels",
    "read_latency_us", "flush_delay_us",   "flush_watermark", "recovery_us",   "initial_temp_c",
    "thermal_tau_us", "metadata_fraction", "t_unavail_us",   "t_zero_us",      "idle_ma",
    "read_ma",        "write_ma",          "recovery_ma"};

const char* kPlainKeys[] = {
    "seed", "output_dir", "store_payloads",
    "workload.wss", "workload.read_fraction", "workload.size", "workload.pattern", "workload.trace",
    "workload.iops", "workload.sequence", "workload.requests", "workload.start_us",
    "cache.policy", "cache.size",
    "raid.scrub_interval_us", "raid.busy_threshold",
    "backing.capacity", "backing.seek_us", "backing.mb_per_s",
    "faults.count", "faults.min_gap_us", "faults.off_us", "faults.distribution", "faults.ambient_c",
    "faults.ambient_at_us",
    "detector.timeout_us", "detector.flying_scan",
    "telemetry.period_us",
    "campaign.matrix", "campaign.parallel"};

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a number: '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(key + ": not a number: '" + v + "'");
  return x;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long x;
  try {
    x = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": not an integer: '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(key + ": not an integer: '" + v + "'");
  return x;
}

std::uint64_t to_count(const std::string& key, const std::string& v) {
  auto x = to_int(key, v);
  if (x < 0) throw ConfigError(key + ": must not be negative");
  return static_cast<std::uint64_t>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw ConfigError(key + ": not a boolean: '" + v + "'");
}

std::uint64_t to_size(const std::string& key, const std::string& v) {
  try {
    return parse_size(v);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

class Values {
 public:
  explicit Values(const po::variables_map& vm) : vm_(vm) {}
  const std::string* get(const std::string& key) const {
    auto it = vm_.find(key);
    if (it == vm_.end() || it->second.empty()) return nullptr;
    return &it->second.as<std::string>();
  }

 private:
  const po::variables_map& vm_;
};

void apply_ssd(SsdConfig& c, const Values& v, const std::string& section) {
  auto key = [&](const char* k) { return section + "." + k; };
  if (auto s = v.get(key("preset"))) {
    ReliabilityPreset p;
    if (!parse_preset(*s, p)) throw ConfigError(key("preset") + ": unknown preset '" + *s + "'");
    c = preset_config(p);
  }
  auto with = [&](const char* k, auto&& f) {
    if (auto s = v.get(key(k))) f(key(k), *s);
  };
  with("capacity", [&](const auto& k, const auto& s) { c.capacity_bytes = to_size(k, s); });
  with("ncq_depth", [&](const auto& k, const auto& s) { c.ncq_depth = static_cast<std::uint32_t>(to_count(k, s)); });
  with("buffer", [&](const auto& k, const auto& s) { c.dram_buffer_bytes = to_size(k, s); });
  with("program_latency_us", [&](const auto& k, const auto& s) { c.program_latency_us = to_int(k, s); });
  with("ack_on_buffer", [&](const auto& k, const auto& s) { c.ack_on_buffer = to_bool(k, s); });
  with("plp", [&](const auto& k, const auto& s) { c.plp = to_bool(k, s); });
  with("map_checkpoint_every", [&](const auto& k, const auto& s) { c.map_checkpoint_every = static_cast<std::uint32_t>(to_count(k, s)); });
  with("p_fly", [&](const auto& k, const auto& s) { c.p_fly = to_double(k, s); });
  with("p_torn_program", [&](const auto& k, const auto& s) { c.p_torn_program = to_double(k, s); });
  with("hazard_metadata", [&](const auto& k, const auto& s) { c.dead_hazards.metadata = to_double(k, s); });
  with("hazard_interface", [&](const auto& k, const auto& s) { c.dead_hazards.interface = to_double(k, s); });
  with("hazard_chip", [&](const auto& k, const auto& s) { c.dead_hazards.chip = to_double(k, s); });
  with("throttle_temp_c", [&](const auto& k, const auto& s) { c.throttle_temp_c = to_double(k, s); });
  with("nand_channels", [&](const auto& k, const auto& s) { c.nand_channels = static_cast<std::uint32_t>(to_count(k, s)); });
  with("read_latency_us", [&](const auto& k, const auto& s) { c.read_latency_us = to_int(k, s); });
  with("flush_delay_us", [&](const auto& k, const auto& s) { c.flush_delay_us = to_int(k, s); });
  with("flush_watermark", [&](const auto& k, const auto& s) { c.flush_watermark = to_double(k, s); });
  with("recovery_us", [&](const auto& k, const auto& s) { c.recovery_us = to_int(k, s); });
  with("initial_temp_c", [&](const auto& k, const auto& s) { c.initial_temp_c = to_double(k, s); });
  with("thermal_tau_us", [&](const auto& k, const auto& s) { c.thermal_tau_us = to_int(k, s); });
  with("metadata_fraction", [&](const auto& k, const auto& s) { c.metadata_region_fraction = to_double(k, s); });
  with("t_unavail_us", [&](const auto& k, const auto& s) { c.power.t_unavail_us = to_int(k, s); });
  with("t_zero_us", [&](const auto& k, const auto& s) { c.power.t_zero_us = to_int(k, s); });
  with("idle_ma", [&](const auto& k, const auto& s) { c.current.idle_ma = to_double(k, s); });
  with("read_ma", [&](const auto& k, const auto& s) { c.current.read_ma = to_double(k, s); });
  with("write_ma", [&](const auto& k, const auto& s) { c.current.write_ma = to_double(k, s); });
  with("recovery_ma", [&](const auto& k, const auto& s) { c.current.recovery_ma = to_double(k, s); });
}

SizeDist parse_size_dist(const std::string& key, const std::string& s) {
  const auto dash = s.find('-');
  if (dash == std::string::npos) return SizeDist::fixed(to_size(key, s));
  return SizeDist::uniform(to_size(key, trim(s.substr(0, dash))), to_size(key, trim(s.substr(dash + 1))));
}

double parse_iops(const std::string& key, const std::string& s) {
  if (s == "unlimited") return kUnlimitedIops;
  auto last = s.empty() ? '\0' : s.back();
  if (last == 'K' || last == 'k') return to_double(key, s.substr(0, s.size() - 1)) * 1000;
  return to_double(key, s);
}

po::options_description describe() {
  po::options_description d;
  for (const char* k : kPlainKeys) d.add_options()(k, po::value<std::string>());
  for (const char* section : {"primary", "secondary"})
    for (const char* k : kSsdKeys) d.add_options()((std::string(section) + "." + k).c_str(), po::value<std::string>());
  d.add_options()("campaign.sweep", po::value<std::vector<std::string>>()->composing());
  return d;
}

po::variables_map parse_ini(std::istream& in) {
  po::variables_map vm;
  try {
    po::store(po::parse_config_file(in, describe(), false), vm);
  } catch (const po::error& e) {
    throw ConfigError(e.what());
  }
  return vm;
}

ExperimentConfig from_values(const po::variables_map& vm) {
  Values v(vm);
  ExperimentConfig c;
  auto with = [&](const char* k, auto&& f) {
    if (auto s = v.get(k)) f(std::string(k), *s);
  };
  with("seed", [&](const auto& k, const auto& s) { c.seed = to_count(k, s); });
  with("output_dir", [&](const auto&, const auto& s) { c.output_dir = s; });
  with("store_payloads", [&](const auto& k, const auto& s) { c.store_payloads = to_bool(k, s); });

  auto& w = c.workload;
  with("workload.wss", [&](const auto& k, const auto& s) { w.wss_bytes = to_size(k, s); });
  with("workload.read_fraction", [&](const auto& k, const auto& s) { w.read_fraction = to_double(k, s); });
  with("workload.size", [&](const auto& k, const auto& s) { w.size = parse_size_dist(k, s); });
  with("workload.pattern", [&](const auto& k, const auto& s) {
    if (!parse_access_pattern(s, w.pattern)) throw ConfigError(k + ": unknown pattern '" + s + "'");
  });
  with("workload.trace", [&](const auto&, const auto& s) { w.trace_path = s; });
  with("workload.iops", [&](const auto& k, const auto& s) { w.target_iops = parse_iops(k, s); });
  with("workload.sequence", [&](const auto& k, const auto& s) {
    if (!parse_sequence_mode(s, w.sequence_mode)) throw ConfigError(k + ": unknown sequence mode '" + s + "'");
  });
  with("workload.requests", [&](const auto& k, const auto& s) { w.request_count = to_count(k, s); });
  with("workload.start_us", [&](const auto& k, const auto& s) { c.workload_start_us = to_int(k, s); });

  apply_ssd(c.primary, v, "primary");
  apply_ssd(c.secondary, v, "secondary");

  with("cache.policy", [&](const auto& k, const auto& s) {
    if (!parse_cache_policy(s, c.cache.policy)) throw ConfigError(k + ": unknown policy '" + s + "'");
  });
  with("cache.size", [&](const auto& k, const auto& s) { c.cache.cache_bytes = to_size(k, s); });
  with("raid.scrub_interval_us", [&](const auto& k, const auto& s) { c.raid.scrub_interval_us = to_int(k, s); });
  with("raid.busy_threshold", [&](const auto& k, const auto& s) { c.raid.busy_threshold = static_cast<std::uint32_t>(to_count(k, s)); });
  with("backing.capacity", [&](const auto& k, const auto& s) { c.backing.capacity_bytes = to_size(k, s); });
  with("backing.seek_us", [&](const auto& k, const auto& s) { c.backing.seek_us = to_int(k, s); });
  with("backing.mb_per_s", [&](const auto& k, const auto& s) { c.backing.bytes_per_us = to_double(k, s); });

  with("faults.count", [&](const auto& k, const auto& s) { c.faults.n_faults = to_count(k, s); });
  with("faults.min_gap_us", [&](const auto& k, const auto& s) { c.faults.min_gap_us = to_int(k, s); });
  with("faults.off_us", [&](const auto& k, const auto& s) { c.faults.off_us = to_int(k, s); });
  with("faults.distribution", [&](const auto& k, const auto& s) {
    if (!parse_fault_distribution(s, c.faults.distribution)) throw ConfigError(k + ": unknown distribution '" + s + "'");
  });
  with("faults.ambient_c", [&](const auto& k, const auto& s) { c.faults.ambient_c = to_double(k, s); });
  with("faults.ambient_at_us", [&](const auto& k, const auto& s) { c.faults.ambient_at_us = to_int(k, s); });
  with("detector.timeout_us", [&](const auto& k, const auto& s) { c.detector.timeout_us = to_int(k, s); });
  with("detector.flying_scan", [&](const auto& k, const auto& s) { c.detector.flying_scan = to_bool(k, s); });
  with("telemetry.period_us", [&](const auto& k, const auto& s) { c.telemetry_period_us = to_int(k, s); });
  return c;
}

std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return in;
}

}  // namespace

std::uint64_t parse_size(const std::string& text) {
  const auto s = trim(text);
  if (s.empty()) throw std::invalid_argument("empty size");
  std::uint64_t mult = 1;
  std::string digits = s;
  switch (s.back()) {
    case 'K': case 'k': mult = KiB; break;
    case 'M': case 'm': mult = MiB; break;
    case 'G': case 'g': mult = GiB; break;
    default: break;
  }
  if (mult != 1) digits.pop_back();
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
    throw std::invalid_argument("bad size '" + text + "'");
  return std::stoull(digits) * mult;
}

std::string format_size(std::uint64_t bytes) {
  if (bytes != 0 && bytes % GiB == 0) return std::to_string(bytes / GiB) + "G";
  if (bytes != 0 && bytes % MiB == 0) return std::to_string(bytes / MiB) + "M";
  if (bytes != 0 && bytes % KiB == 0) return std::to_string(bytes / KiB) + "K";
  return std::to_string(bytes);
}

void ExperimentConfig::validate() const {
  try {
    workload.validate();
    primary.validate();
    secondary.validate();
    detector.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (workload.wss_bytes > backing.capacity_bytes) throw ConfigError("wss larger than the backing store");
  if (primary.capacity_bytes < backing.capacity_bytes || secondary.capacity_bytes < backing.capacity_bytes)
    throw ConfigError("cache devices smaller than the backing store");
  if (cache.cache_bytes > backing.capacity_bytes) throw ConfigError("cache larger than the backing store");
  if (!block_aligned(cache.cache_bytes)) throw ConfigError("cache size must be a multiple of 4 KiB");
  if (!(backing.bytes_per_us > 0) || backing.seek_us < 0) throw ConfigError("bad backing store timing");
  if (faults.off_us < primary.power.t_zero_us || faults.off_us < secondary.power.t_zero_us)
    throw ConfigError("faults.off_us shorter than the voltage decay");
  if (faults.min_gap_us <= std::max(primary.recovery_us, secondary.recovery_us))
    throw ConfigError("faults.min_gap_us must exceed device recovery time");
  if (telemetry_period_us <= 0) throw ConfigError("telemetry period must be positive");
  if (workload_start_us < 0) throw ConfigError("workload start must not be negative");
}

ExperimentConfig parse_experiment_config(std::istream& in) {
  auto vm = parse_ini(in);
  if (vm.count("campaign.sweep")) throw ConfigError("[campaign] section in an experiment config");
  auto c = from_values(vm);
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  auto in = open(path);
  return parse_experiment_config(in);
}

CampaignConfig parse_campaign_config(std::istream& in) {
  auto vm = parse_ini(in);
  CampaignConfig c;
  c.base = from_values(vm);
  c.base.validate();
  Values v(vm);
  if (auto s = v.get("campaign.matrix")) c.matrix = to_bool("campaign.matrix", *s);
  if (auto s = v.get("campaign.parallel")) c.parallel = to_bool("campaign.parallel", *s);
  if (!vm.count("campaign.sweep")) throw ConfigError("campaign config has no sweep");
  for (const auto& line : vm["campaign.sweep"].as<std::vector<std::string>>()) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw ConfigError("sweep line needs 'key: values': '" + line + "'");
    SweepSpec s;
    s.key = trim(line.substr(0, colon));
    std::stringstream rest(line.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
      item = trim(item);
      if (!item.empty()) s.values.push_back(item);
    }
    if (s.values.empty()) throw ConfigError("sweep '" + s.key + "' has no values");
    // Reject bad keys and values before anything runs.
    for (const auto& val : s.values) {
      auto probe = c.base;
      apply_sweep(probe, s.key, val);
      probe.validate();
    }
    c.sweeps.push_back(std::move(s));
  }
  return c;
}

CampaignConfig load_campaign_config(const std::string& path) {
  auto in = open(path);
  return parse_campaign_config(in);
}

const std::vector<std::string>& sweep_keys() {
  static const std::vector<std::string> keys = {"wss",           "read_fraction", "request_size",
                                                "pattern",       "iops",          "sequence_mode",
                                                "disk_order",    "cache_policy",  "temperature"};
  return keys;
}

void apply_sweep(ExperimentConfig& c, const std::string& key, const std::string& value) {
  auto& w = c.workload;
  if (key == "wss") {
    w.wss_bytes = to_size(key, value);
  } else if (key == "read_fraction") {
    w.read_fraction = to_double(key, value);
  } else if (key == "request_size") {
    w.size = SizeDist::fixed(to_size(key, value));
  } else if (key == "pattern") {
    // "cello" selects the synthetic trace; a path selects a trace file.
    AccessPattern p;
    if (value == "random") {
      w.pattern = AccessPattern::UniformRandom;
    } else if (parse_access_pattern(value, p) && p != AccessPattern::Trace) {
      w.pattern = p;
    } else {
      w.pattern = AccessPattern::Trace;
      w.trace_path = value;
    }
  } else if (key == "iops") {
    w.target_iops = parse_iops(key, value);
  } else if (key == "sequence_mode") {
    if (!parse_sequence_mode(value, w.sequence_mode)) throw ConfigError(key + ": unknown mode '" + value + "'");
  } else if (key == "disk_order") {
    const auto slash = value.find('/');
    ReliabilityPreset a, b;
    if (slash == std::string::npos || !parse_preset(value.substr(0, slash), a) || !parse_preset(value.substr(slash + 1), b))
      throw ConfigError(key + ": expected 'P/S' presets, got '" + value + "'");
    auto keep = [](SsdConfig& dst, ReliabilityPreset p) {
      auto fresh = preset_config(p);
      fresh.capacity_bytes = dst.capacity_bytes;
      dst = fresh;
    };
    keep(c.primary, a);
    keep(c.secondary, b);
  } else if (key == "cache_policy") {
    // "RO@0.5" also sets the read fraction.
    const auto at = value.find('@');
    const auto name = value.substr(0, at);
    if (!parse_cache_policy(name, c.cache.policy)) throw ConfigError(key + ": unknown policy '" + value + "'");
    if (at != std::string::npos) w.read_fraction = to_double(key, value.substr(at + 1));
  } else if (key == "temperature") {
    c.faults.ambient_c = to_double(key, value);
  } else {
    throw ConfigError("unknown sweep key '" + key + "'");
  }
  c.sweep_key = key;
  c.sweep_value = value;
}

}  // namespace ssdrel
