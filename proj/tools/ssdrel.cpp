// Command-line front end: run, campaign, classify, report.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ssdrel/campaign.hpp"
#include "ssdrel/experiment.hpp"
#include "ssdrel/offline_classify.hpp"
#include "ssdrel/report.hpp"

namespace fs = std::filesystem;
using namespace ssdrel;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;

std::string default_output_dir() {
  if (const char* env = std::getenv("SSDREL_OUTPUT_DIR"); env && *env) return env;
  return "ssdrel-out";
}

std::string pick_dir(const std::string& flag, const std::string& from_config) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  return default_output_dir();
}

void print_report(const ExperimentReport& r) {
  std::cout << (r.sweep_key.empty() ? std::string("run") : r.sweep_key + "=" + r.sweep_value) << ": "
            << r.requests << " requests, " << r.power_faults << " power faults, " << r.data_failures()
            << " data failures";
  if (auto f = r.failures_per_power_fault()) std::cout << " (" << *f << " per fault)";
  std::cout << ", " << r.responded_iops << " IOPS\n";
  for (std::size_t i = 1; i < kFailureKindCount; ++i)
    if (r.counts[i]) std::cout << "  " << to_string(static_cast<FailureKind>(i)) << ": " << r.counts[i] << '\n';
}

std::vector<std::uint8_t> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw OutputError("cannot read '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cmd_classify(const std::string& db_path, const std::string& image_path, const DetectorConfig& det,
                 const std::string& out_path) {
  auto bytes = read_all(image_path);
  const auto cap = (bytes.size() + kBlockBytes - 1) / kBlockBytes * kBlockBytes;
  bytes.resize(cap, 0);
  BlockStore image(cap);
  if (cap) image.write(0, bytes);

  std::ifstream db(db_path);
  if (!db) throw OutputError("cannot read '" + db_path + "'");
  std::vector<DataPacket> packets;
  std::string line;
  while (std::getline(db, line))
    if (!line.empty()) packets.push_back(decode_record(line));

  const auto out = classify_image(packets, image, det);
  if (out_path.empty()) {
    write_verdict_log(std::cout, out);
  } else {
    std::ostringstream s;
    write_verdict_log(s, out);
    write_file(out_path, s.str());
  }
  return 0;
}

int cmd_report(const std::string& dir) {
  const fs::path d(dir);
  std::ifstream rin(d / "report.csv");
  if (!rin) throw OutputError("no report.csv in '" + dir + "'");
  auto reports = parse_report_csv(rin);
  if (reports.size() == 1 && fs::exists(d / "verdicts.csv") && fs::exists(d / "faults.csv")) {
    // Counts are rebuilt from the logs; the rest comes from the old report.
    std::ifstream vin(d / "verdicts.csv"), fin(d / "faults.csv");
    auto fresh = aggregate(read_verdict_log(vin), read_fault_log(fin));
    auto& r = reports.front();
    fresh.sweep_key = r.sweep_key;
    fresh.sweep_value = r.sweep_value;
    fresh.requests = r.requests;
    fresh.responded_iops = r.responded_iops;
    fresh.telemetry = r.telemetry;
    if (fresh.counts != r.counts) std::cerr << "note: report counts differ from verdicts.csv; using the log\n";
    r = fresh;
  }
  emit_report(reports, dir, ReportFormat::Csv);
  emit_report(reports, dir, ReportFormat::Json);
  for (const auto& r : reports) print_report(r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SSD reliability simulator and failure classifier"};
  app.require_subcommand(1);

  std::string config_path, output_dir;
  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("config", config_path, "Experiment config (INI)")->required();
  run->add_option("-o,--output-dir", output_dir, "Output directory (default: $SSDREL_OUTPUT_DIR)");

  std::string campaign_path;
  bool serial = false;
  auto* camp = app.add_subcommand("campaign", "Run a parameter sweep");
  camp->add_option("campaign-config", campaign_path, "Campaign config (INI)")->required();
  camp->add_option("-o,--output-dir", output_dir, "Output directory (default: $SSDREL_OUTPUT_DIR)");
  camp->add_flag("--serial", serial, "Run sweep points one at a time");

  std::string db_path, image_path, verdict_out;
  DetectorConfig det;
  bool no_scan = false;
  auto* cls = app.add_subcommand("classify", "Classify a packet database against a disk image");
  cls->add_option("packet-db", db_path, "Packet database (one JSON record per line)")->required();
  cls->add_option("snapshot", image_path, "Raw disk image; byte offset = address")->required();
  cls->add_option("--timeout-us", det.timeout_us, "I/O timeout");
  cls->add_flag("--no-flying-scan", no_scan, "Skip the relocated-copy scan");
  cls->add_option("-o,--out", verdict_out, "Verdict CSV (default: stdout)");

  std::string report_dir;
  auto* rep = app.add_subcommand("report", "Re-emit report files of a run directory");
  rep->add_option("dir", report_dir, "Run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = load_experiment_config(config_path);
      cfg.output_dir = pick_dir(output_dir, cfg.output_dir);
      auto r = run_experiment(cfg);
      print_report(r);
      std::cout << "outputs in " << cfg.output_dir << '\n';
    } else if (*camp) {
      auto cfg = load_campaign_config(campaign_path);
      cfg.base.output_dir = pick_dir(output_dir, cfg.base.output_dir);
      if (serial) cfg.parallel = false;
      auto result = run_campaign(cfg);
      for (const auto& r : result.reports) print_report(r);
      if (result.matrix) write_dependency_matrix(std::cout, *result.matrix);
      std::cout << "outputs in " << cfg.base.output_dir << '\n';
    } else if (*cls) {
      det.flying_scan = !no_scan;
      det.validate();
      return cmd_classify(db_path, image_path, det, verdict_out);
    } else if (*rep) {
      return cmd_report(report_dir);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const OutputError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitIo;
  }
  return 0;
}
