#include "connear/latency.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "connear/error.hpp"

namespace connear {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

nlohmann::json stats_json(const LatencyStats& s) {
  return {{"windows", s.windows}, {"warmup", s.warmup},     {"first_ms", s.first_ms},
          {"median_ms", s.median_ms}, {"p95_ms", s.p95_ms}, {"mean_ms", s.mean_ms}};
}

}  // namespace

LatencyStats time_windows(const std::function<void(std::size_t)>& run, std::size_t windows, std::size_t warmup) {
  if (windows == 0) throw UsageError("benchmark needs at least one timed window");
  LatencyStats s;
  s.windows = windows;
  s.warmup = warmup;
  std::vector<double> times;
  times.reserve(windows);
  for (std::size_t i = 0; i < warmup + windows; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    run(i);
    const double ms = elapsed_ms(t0);
    if (i == 0) s.first_ms = ms;
    if (i >= warmup) times.push_back(ms);
  }
  double sum = 0.0;
  for (double t : times) sum += t;
  s.mean_ms = sum / static_cast<double>(times.size());
  std::sort(times.begin(), times.end());
  s.median_ms = quantile(times, 0.5);
  s.p95_ms = quantile(times, 0.95);
  return s;
}

BenchReport bench_models(const TLModel& tl, const SurrogateModel& surrogate, std::size_t window_length,
                         std::size_t windows, std::size_t warmup, std::uint64_t seed) {
  if (window_length == 0) throw UsageError("bench: window length must be positive");
  BenchReport report;
  report.window_length = window_length;
  if (warmup == 0)
    report.warnings.push_back("no warmup windows: the cold first window is part of the timed set");

  // A handful of distinct inputs, reused cyclically.
  constexpr std::size_t kInputs = 4;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Stimulus> inputs(kInputs);
  for (auto& s : inputs) {
    s.rate = 20000.0;
    s.samples.resize(window_length);
    for (double& v : s.samples) v = noise(rng);
    normalize_to_spl(s, 70.0);
  }

  volatile float sink = 0.0f;
  report.tl = time_windows([&](std::size_t i) { sink = tl.simulate(inputs[i % kInputs]).data.back(); }, windows, warmup);
  // A length equal to the surrogate input is one context-bearing window;
  // anything else is streamed.
  const bool one_window = window_length == surrogate.spec().input_length();
  report.surrogate = time_windows(
      [&](std::size_t i) {
        const Stimulus& s = inputs[i % kInputs];
        sink = one_window ? forward(surrogate, s.samples).data.back() : process_stream(surrogate, s).data.back();
      },
      windows, warmup);
  (void)sink;
  report.speedup = report.tl.median_ms / report.surrogate.median_ms;
  return report;
}

std::string to_json(const BenchReport& r) {
  nlohmann::json j = {{"schema", "connear.bench"},
                      {"version", 1},
                      {"window_length", r.window_length},
                      {"tl", stats_json(r.tl)},
                      {"surrogate", stats_json(r.surrogate)},
                      {"speedup", r.speedup},
                      {"realtime_budget_ms", r.budget_ms},
                      {"surrogate_within_budget", r.surrogate.median_ms <= r.budget_ms},
                      {"warnings", r.warnings}};
  return j.dump(2);
}

}  // namespace connear
