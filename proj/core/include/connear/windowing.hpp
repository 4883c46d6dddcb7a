#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "connear/stimulus.hpp"

namespace connear {

// Left-context / core / right-context geometry of one surrogate input window.
struct WindowGeometry {
  std::size_t core = 2048;
  std::size_t left = 256;
  std::size_t right = 256;

  std::size_t total() const { return left + core + right; }
  bool operator==(const WindowGeometry&) const = default;
};

// Audio cut into ceil(T / core) windows, each flanked by the true neighbouring
// samples; context or core samples beyond the signal are zero.
struct WindowedAudio {
  std::vector<std::vector<double>> windows;
  WindowGeometry geometry;
  std::size_t source_length = 0;
  double rate = 0.0;

  // Number of valid (non-padding) core samples in window `w`.
  std::size_t core_extent(std::size_t w) const;
};

WindowedAudio window_with_context(const Stimulus& audio, WindowGeometry geometry);

// Concatenated core regions trimmed to the source length.
std::vector<double> unwindow(const WindowedAudio& windowed);

// Number of windows needed for `length` samples.
std::size_t window_count(std::size_t length, std::size_t core);

}  // namespace connear
