#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "connear/surrogate.hpp"
#include "connear/tl_model.hpp"

namespace connear {

struct LatencyStats {
  std::size_t windows = 0;
  std::size_t warmup = 0;
  double first_ms = 0.0;  // very first call, cold caches included
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double mean_ms = 0.0;
};

// Calls run(i) `warmup` times untimed, then `windows` times timed. With zero
// warmup the first (cold) call is part of the timed set.
LatencyStats time_windows(const std::function<void(std::size_t)>& run, std::size_t windows, std::size_t warmup);

struct BenchReport {
  std::size_t window_length = 2560;
  LatencyStats tl;
  LatencyStats surrogate;
  double speedup = 0.0;  // tl median / surrogate median
  double budget_ms = 10.0;
  std::vector<std::string> warnings;
};

// Per-window wall time of the TL oracle and the surrogate on seeded noise
// windows at 70 dB SPL. The TL simulates `window_length` samples. The
// surrogate runs one forward pass when `window_length` is its input length
// and streams the samples through its own windows otherwise.
BenchReport bench_models(const TLModel& tl, const SurrogateModel& surrogate, std::size_t window_length,
                         std::size_t windows, std::size_t warmup, std::uint64_t seed = 1);

std::string to_json(const BenchReport& report);

}  // namespace connear
