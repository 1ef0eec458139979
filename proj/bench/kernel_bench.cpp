// Serial reference against OpenMP kernel for each parallel hot path.

#include <benchmark/benchmark.h>

#include <cstring>
#include <random>

#include "ssdrel/campaign.hpp"
#include "ssdrel/flying_scan.hpp"
#include "ssdrel/offline_classify.hpp"

namespace ssdrel {
namespace {

std::vector<std::uint8_t> random_bytes(std::mt19937_64& g, std::size_t n) {
  std::vector<std::uint8_t> v(n);
  for (std::size_t i = 0; i + 8 <= n; i += 8) {
    const auto x = g();
    std::memcpy(v.data() + i, &x, 8);
  }
  return v;
}

BlockStore random_image(std::uint64_t bytes, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  BlockStore s(bytes);
  for (std::uint64_t a = 0; a < bytes; a += MiB) s.write(a, random_bytes(g, MiB));
  return s;
}

// 600 packets over a 32 MiB image: a third landed, a third lost, the rest
// relocated into the top quarter of the image.
struct Population {
  BlockStore image = random_image(32 * MiB, 1);
  std::vector<DataPacket> packets;

  Population() {
    std::mt19937_64 g(2);
    std::uint64_t next = 0;
    for (std::uint64_t id = 0; id < 600; ++id) {
      const std::size_t blocks = 1 + g() % 2;
      auto payload = random_bytes(g, blocks * kBlockBytes);
      std::vector<std::uint8_t> initial(payload.size());
      image.read(next, initial);
      auto p = build_packet(OpKind::Write, next, payload, 0, initial);
      p.id = id;
      p.complete_time = 10;
      if (id % 3 == 0) image.write(next, payload);
      if (id % 3 == 2) image.write(24 * MiB + (g() % 1000) * kBlockBytes, payload);
      packets.push_back(std::move(p));
      next += blocks * kBlockBytes;
    }
  }
};

const Population& population() {
  static const Population p;
  return p;
}

void BM_BatchClassifySerial(benchmark::State& st) {
  const auto& pop = population();
  for (auto _ : st) benchmark::DoNotOptimize(classify_image_serial(pop.packets, pop.image, DetectorConfig{}));
}
BENCHMARK(BM_BatchClassifySerial)->Unit(benchmark::kMillisecond);

void BM_BatchClassifyParallel(benchmark::State& st) {
  const auto& pop = population();
  for (auto _ : st) benchmark::DoNotOptimize(classify_image(pop.packets, pop.image, DetectorConfig{}));
}
BENCHMARK(BM_BatchClassifyParallel)->Unit(benchmark::kMillisecond);

// Worst case for the scan: the payload is nowhere on the disk.
struct Absent {
  BlockStore image;
  DataPacket packet;
  explicit Absent(std::uint64_t bytes) : image(random_image(bytes, 3)) {
    std::mt19937_64 g(4);
    auto payload = random_bytes(g, 64 * KiB);
    packet = build_packet(OpKind::Write, 0, payload, 0, payload);
  }
};

void BM_FlyingScanReference(benchmark::State& st) {
  const Absent a(static_cast<std::uint64_t>(st.range(0)) * MiB);
  for (auto _ : st) benchmark::DoNotOptimize(scan_flying_reference(a.image, a.packet));
  st.SetBytesProcessed(static_cast<std::int64_t>(st.iterations()) * st.range(0) * static_cast<std::int64_t>(MiB));
}
BENCHMARK(BM_FlyingScanReference)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_FlyingScanIndexed(benchmark::State& st) {
  const Absent a(static_cast<std::uint64_t>(st.range(0)) * MiB);
  const BlockChecksumIndex index(a.image);
  for (auto _ : st) benchmark::DoNotOptimize(scan_flying(index, a.packet));
  st.SetBytesProcessed(static_cast<std::int64_t>(st.iterations()) * st.range(0) * static_cast<std::int64_t>(MiB));
}
BENCHMARK(BM_FlyingScanIndexed)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_BlockIndexSerial(benchmark::State& st) {
  const auto image = random_image(64 * MiB, 5);
  for (auto _ : st) benchmark::DoNotOptimize(BlockChecksumIndex::build_serial(image));
  st.SetBytesProcessed(static_cast<std::int64_t>(st.iterations()) * 64 * static_cast<std::int64_t>(MiB));
}
BENCHMARK(BM_BlockIndexSerial)->Unit(benchmark::kMillisecond);

void BM_BlockIndexParallel(benchmark::State& st) {
  const auto image = random_image(64 * MiB, 5);
  for (auto _ : st) benchmark::DoNotOptimize(BlockChecksumIndex(image));
  st.SetBytesProcessed(static_cast<std::int64_t>(st.iterations()) * 64 * static_cast<std::int64_t>(MiB));
}
BENCHMARK(BM_BlockIndexParallel)->Unit(benchmark::kMillisecond);

ExperimentConfig small_run() {
  ExperimentConfig c;
  c.workload.wss_bytes = 8 * MiB;
  c.workload.request_count = 300;
  c.backing.capacity_bytes = 16 * MiB;
  c.primary.capacity_bytes = c.secondary.capacity_bytes = 16 * MiB;
  c.faults.n_faults = 5;
  return c;
}

void campaign(benchmark::State& st, bool parallel) {
  const auto base = small_run();
  const std::vector<std::string> values = {"4K", "16K", "64K", "256K"};
  for (auto _ : st) benchmark::DoNotOptimize(run_sweep(base, "request_size", values, parallel));
}

void BM_CampaignSerial(benchmark::State& st) { campaign(st, false); }
BENCHMARK(BM_CampaignSerial)->Unit(benchmark::kMillisecond)->Iterations(2);

void BM_CampaignParallel(benchmark::State& st) { campaign(st, true); }
BENCHMARK(BM_CampaignParallel)->Unit(benchmark::kMillisecond)->Iterations(2);

}  // namespace
}  // namespace ssdrel

BENCHMARK_MAIN();
