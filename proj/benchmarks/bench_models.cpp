#include <benchmark/benchmark.h>

#include <random>

#include "connear/surrogate.hpp"
#include "connear/tl_model.hpp"

using namespace connear;

namespace {

Stimulus noise_window(std::size_t n) {
  Stimulus s;
  s.rate = 20000.0;
  std::mt19937_64 rng(n);
  std::normal_distribution<double> nd;
  for (std::size_t i = 0; i < n; ++i) s.samples.push_back(nd(rng));
  normalize_to_spl(s, 70.0);
  return s;
}

void BM_TLWindow(benchmark::State& state) {
  const TLModel tl;
  const Stimulus s = noise_window(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(tl.simulate(s).data.data());
}
BENCHMARK(BM_TLWindow)->Arg(1048)->Arg(2560)->Unit(benchmark::kMillisecond);

// One context window through a surrogate with `filters` per layer.
void BM_SurrogateWindow(benchmark::State& state) {
  ArchitectureSpec spec;
  spec.filters = static_cast<std::size_t>(state.range(0));
  const SurrogateModel m = build_model(spec, 1);
  const Stimulus s = noise_window(spec.input_length());
  for (auto _ : state) benchmark::DoNotOptimize(forward(m, s.samples).data.data());
}
BENCHMARK(BM_SurrogateWindow)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_SurrogateStream(benchmark::State& state) {
  ArchitectureSpec spec;
  spec.filters = 32;
  const SurrogateModel m = build_model(spec, 1);
  const Stimulus s = noise_window(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(process_stream(m, s).data.data());
}
BENCHMARK(BM_SurrogateStream)->Arg(10048)->Arg(16384)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
