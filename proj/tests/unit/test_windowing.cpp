#include <doctest.h>

#include <numeric>

#include "connear/error.hpp"
#include "connear/windowing.hpp"

using namespace connear;

namespace {

Stimulus ramp_signal(std::size_t n) {
  Stimulus s;
  s.rate = 20000.0;
  s.samples.resize(n);
  std::iota(s.samples.begin(), s.samples.end(), 1.0);
  return s;
}

}  // namespace

TEST_SUITE("windowing") {

TEST_CASE("one second at 20 kHz with a 2048 core gives 10 windows") {
  CHECK(window_count(20000, 2048) == 10);
  const WindowedAudio w = window_with_context(ramp_signal(20000), {2048, 256, 256});
  CHECK(w.windows.size() == 10);
  CHECK(w.core_extent(9) == 20000 - 9 * 2048);
}

TEST_CASE("context holds the true neighbouring samples, zero beyond the signal") {
  const WindowedAudio w = window_with_context(ramp_signal(5000), {2048, 256, 256});
  // Window 1 starts its left context at sample 2048 - 256.
  CHECK(w.windows[1][0] == 2048.0 - 256.0 + 1.0);
  CHECK(w.windows[1][256] == 2049.0);
  CHECK(w.windows[1][256 + 2048] == 2048.0 * 2 + 1.0);
  // First window's left context is padding.
  for (std::size_t i = 0; i < 256; ++i) CHECK(w.windows[0][i] == 0.0);
  // Last window: core beyond sample 5000 is padding.
  CHECK(w.windows[2][256 + (5000 - 4096) - 1] == 5000.0);
  CHECK(w.windows[2][256 + (5000 - 4096)] == 0.0);
}

TEST_CASE("unwindow inverts windowing") {
  const Stimulus s = ramp_signal(10048);
  CHECK(unwindow(window_with_context(s, {2048, 256, 256})) == s.samples);
  CHECK(unwindow(window_with_context(s, {2048, 0, 0})) == s.samples);
}

TEST_CASE("empty audio is rejected") {
  Stimulus s;
  s.rate = 20000.0;
  CHECK_THROWS_AS(window_with_context(s, {2048, 256, 256}), DataError);
}

}
