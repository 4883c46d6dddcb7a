#include "connear/windowing.hpp"

#include <algorithm>

#include "connear/error.hpp"

namespace connear {

std::size_t window_count(std::size_t length, std::size_t core) {
  return (length + core - 1) / core;
}

std::size_t WindowedAudio::core_extent(std::size_t w) const {
  const std::size_t start = w * geometry.core;
  return std::min(geometry.core, source_length - start);
}

WindowedAudio window_with_context(const Stimulus& audio, WindowGeometry geometry) {
  if (geometry.core == 0) throw UsageError("window_with_context: core length must be positive");
  if (audio.samples.empty()) throw DataError("window_with_context: empty audio");

  const auto n = static_cast<std::ptrdiff_t>(audio.samples.size());
  WindowedAudio out;
  out.geometry = geometry;
  out.source_length = audio.samples.size();
  out.rate = audio.rate;

  const std::size_t count = window_count(audio.samples.size(), geometry.core);
  out.windows.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    std::vector<double> win(geometry.total(), 0.0);
    const auto first = static_cast<std::ptrdiff_t>(w * geometry.core) -
                       static_cast<std::ptrdiff_t>(geometry.left);
    const auto lo = std::max<std::ptrdiff_t>(first, 0);
    const auto hi = std::min<std::ptrdiff_t>(first + static_cast<std::ptrdiff_t>(win.size()), n);
    for (auto i = lo; i < hi; ++i) win[static_cast<std::size_t>(i - first)] = audio.samples[i];
    out.windows.push_back(std::move(win));
  }
  return out;
}

std::vector<double> unwindow(const WindowedAudio& windowed) {
  std::vector<double> out;
  out.reserve(windowed.source_length);
  for (std::size_t w = 0; w < windowed.windows.size(); ++w) {
    const auto& win = windowed.windows[w];
    const auto begin = win.begin() + static_cast<std::ptrdiff_t>(windowed.geometry.left);
    out.insert(out.end(), begin, begin + static_cast<std::ptrdiff_t>(windowed.core_extent(w)));
  }
  return out;
}

}  // namespace connear
