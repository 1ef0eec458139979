#include "ssdrel/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace ssdrel {

namespace fs = std::filesystem;

namespace {

const char* kDeadColumns[3] = {"dead_metadata", "dead_interface", "dead_chip"};

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::vector<std::string> header() {
  std::vector<std::string> h = {"sweep_key", "sweep_value", "requests", "power_faults"};
  for (std::size_t i = 0; i < kFailureKindCount; ++i) h.emplace_back(to_string(static_cast<FailureKind>(i)));
  h.insert(h.end(), {"data_failures", "failures_per_power_fault", "responded_iops"});
  h.insert(h.end(), std::begin(kDeadColumns), std::end(kDeadColumns));
  h.insert(h.end(), {"telemetry_samples", "mean_current_ma", "max_current_ma", "mean_temperature_c",
                     "max_temperature_c"});
  return h;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> f;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  return f;
}

}  // namespace

double round6(double x) {
  if (!std::isfinite(x)) return x;
  return std::strtod(fixed6(x).c_str(), nullptr);
}

std::string report_csv(const std::vector<ExperimentReport>& reports) {
  std::ostringstream out;
  const auto h = header();
  for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
  out << '\n';
  for (const auto& r : reports) {
    out << r.sweep_key << ',' << r.sweep_value << ',' << r.requests << ',' << r.power_faults;
    for (auto c : r.counts) out << ',' << c;
    out << ',' << r.data_failures() << ',';
    if (auto f = r.failures_per_power_fault()) out << fixed6(*f);
    out << ',' << fixed6(r.responded_iops);
    for (auto d : r.dead_incidents) out << ',' << d;
    const auto& t = r.telemetry;
    out << ',' << t.samples << ',' << fixed6(t.mean_current_ma) << ',' << fixed6(t.max_current_ma) << ','
        << fixed6(t.mean_temperature_c) << ',' << fixed6(t.max_temperature_c) << '\n';
  }
  return out.str();
}

std::string report_json(const std::vector<ExperimentReport>& reports) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["sweep_key"] = r.sweep_key;
    j["sweep_value"] = r.sweep_value;
    j["requests"] = r.requests;
    j["power_faults"] = r.power_faults;
    nlohmann::ordered_json counts;
    for (std::size_t i = 0; i < kFailureKindCount; ++i) counts[to_string(static_cast<FailureKind>(i))] = r.counts[i];
    j["counts"] = counts;
    j["data_failures"] = r.data_failures();
    if (auto f = r.failures_per_power_fault()) j["failures_per_power_fault"] = fixed6(*f);
    else j["failures_per_power_fault"] = nullptr;
    j["responded_iops"] = fixed6(r.responded_iops);
    nlohmann::ordered_json dead;
    for (int i = 0; i < 3; ++i) dead[kDeadColumns[i]] = r.dead_incidents[i];
    j["dead_incidents"] = dead;
    const auto& t = r.telemetry;
    j["telemetry"] = {{"samples", t.samples},
                      {"mean_current_ma", fixed6(t.mean_current_ma)},
                      {"max_current_ma", fixed6(t.max_current_ma)},
                      {"mean_temperature_c", fixed6(t.mean_temperature_c)},
                      {"max_temperature_c", fixed6(t.max_temperature_c)}};
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::vector<ExperimentReport> parse_report_csv(std::istream& in) {
  std::vector<ExperimentReport> out;
  std::string line;
  std::size_t lineno = 0;
  const auto h = header();
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (split(line) != h) throw ParseError("unexpected report header", lineno);
      continue;
    }
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != h.size()) throw ParseError("report row has " + std::to_string(f.size()) + " fields", lineno);
    ExperimentReport r;
    try {
      std::size_t c = 0;
      r.sweep_key = f[c++];
      r.sweep_value = f[c++];
      r.requests = std::stoull(f[c++]);
      r.power_faults = std::stoull(f[c++]);
      for (auto& n : r.counts) n = std::stoull(f[c++]);
      c += 2;  // data_failures and the ratio are derived
      r.responded_iops = std::stod(f[c++]);
      for (auto& d : r.dead_incidents) d = std::stoull(f[c++]);
      r.telemetry.samples = std::stoull(f[c++]);
      r.telemetry.mean_current_ma = std::stod(f[c++]);
      r.telemetry.max_current_ma = std::stod(f[c++]);
      r.telemetry.mean_temperature_c = std::stod(f[c++]);
      r.telemetry.max_temperature_c = std::stod(f[c++]);
    } catch (const std::logic_error&) {
      throw ParseError("bad number in report row", lineno);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void ensure_writable_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw OutputError("cannot create output directory '" + dir + "': " + ec.message());
  const auto probe = fs::path(dir) / ".ssdrel_probe";
  {
    std::ofstream f(probe);
    if (!f) throw OutputError("output directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw OutputError("cannot write '" + path + "'");
  f << content;
  if (!f) throw OutputError("short write to '" + path + "'");
}

void emit_report(const std::vector<ExperimentReport>& reports, const std::string& dir, ReportFormat format,
                 const std::string& stem) {
  ensure_writable_dir(dir);
  if (format == ReportFormat::Csv) write_file((fs::path(dir) / (stem + ".csv")).string(), report_csv(reports));
  else write_file((fs::path(dir) / (stem + ".json")).string(), report_json(reports));
}

}  // namespace ssdrel
