// Serial reference vs OpenMP replica kernel on the tail and speed workloads.

#include <benchmark/benchmark.h>

#include "rrw/estimators.hpp"
#include "rrw/replicate.hpp"

namespace {

rrw::WalkConfig config(std::uint32_t b, rrw::Scheme s, std::uint64_t horizon) {
  rrw::WalkConfig c;
  c.b = b;
  c.scheme = s;
  c.horizon = horizon;
  c.seed = 42;
  c.record_heights = false;
  return c;
}

void endpoints(benchmark::State& state, bool parallel) {
  const auto cfg = config(2, rrw::Scheme::linear(2), 160);
  const std::size_t replicas = 20000;
  const int workers = parallel ? rrw::default_workers() : 1;
  for (auto _ : state) {
    auto fn = [&](std::size_t r) {
      auto c = cfg;
      c.replica = r;
      return rrw::run_endpoint(c).final_height;
    };
    auto out = parallel ? rrw::map_replicas(replicas, workers, fn)
                        : rrw::map_replicas_serial(replicas, fn);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * replicas * cfg.horizon);
}

void BM_EndpointsSerial(benchmark::State& s) { endpoints(s, false); }
void BM_EndpointsParallel(benchmark::State& s) { endpoints(s, true); }
BENCHMARK(BM_EndpointsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EndpointsParallel)->Unit(benchmark::kMillisecond);

void BM_TiltedLowerTail(benchmark::State& state) {
  const auto cfg = config(2, rrw::Scheme::once(2), 160);
  for (auto _ : state) {
    auto est = rrw::tail_lower_tilted(cfg, 1.0, 160, 5000, static_cast<int>(state.range(0)), -0.5);
    benchmark::DoNotOptimize(est.p_hat);
  }
}
BENCHMARK(BM_TiltedLowerTail)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_LongWalk(benchmark::State& state) {
  const auto cfg = config(static_cast<std::uint32_t>(state.range(0)), rrw::Scheme::linear(2), 100000);
  for (auto _ : state) {
    auto t = rrw::run(cfg);
    benchmark::DoNotOptimize(t.final_height);
  }
  state.SetItemsProcessed(state.iterations() * cfg.horizon);
}
BENCHMARK(BM_LongWalk)->Arg(2)->Arg(70)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
