#include <doctest.h>

#include <cmath>
#include <numbers>

#include "connear/error.hpp"
#include "connear/resample.hpp"

using namespace connear;

namespace {

std::vector<double> sine(double f, double rate, std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / rate);
  return x;
}

}  // namespace

TEST_SUITE("resample") {

TEST_CASE("rational factors reduce to lowest terms") {
  const Resampler r(16000.0, 20000.0);
  CHECK(r.up() == 5);
  CHECK(r.down() == 4);
  CHECK(Resampler(20000.0, 100000.0).up() == 5);
  CHECK(Resampler(20000.0, 100000.0).down() == 1);
  CHECK(Resampler(44100.0, 20000.0).up() == 200);
  CHECK(Resampler(44100.0, 20000.0).down() == 441);
}

TEST_CASE("output length is ceil(n * up / down)") {
  CHECK(Resampler(16000.0, 20000.0).output_length(16000) == 20000);
  CHECK(Resampler(16000.0, 20000.0).output_length(3) == 4);
  CHECK(Resampler(100000.0, 20000.0).output_length(12801) == 2561);
}

TEST_CASE("in-band sinusoid is reproduced at the new sample times") {
  for (auto [in, out] : {std::pair{16000.0, 20000.0}, {20000.0, 100000.0}, {100000.0, 20000.0}, {44100.0, 20000.0}}) {
    const double f = 1000.0;
    const std::vector<double> y = resample(sine(f, in, static_cast<std::size_t>(in / 10)), in, out);
    const std::vector<double> want = sine(f, out, y.size());
    double worst = 0.0;
    // Skip the filter edges.
    for (std::size_t i = y.size() / 4; i < 3 * y.size() / 4; ++i) worst = std::max(worst, std::abs(y[i] - want[i]));
    INFO(in << " -> " << out);
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("passband is flat, stopband attenuated") {
  const Resampler r(20000.0, 100000.0);
  CHECK(r.frequency_response(1000.0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(r.frequency_response(8000.0) == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(r.frequency_response(11000.0) < 1e-3);
}

TEST_CASE("equal rates pass through unchanged") {
  const std::vector<double> x = sine(440.0, 20000.0, 100);
  CHECK(resample(x, 20000.0, 20000.0) == x);
}

TEST_CASE("non-integral or non-positive rates are rejected") {
  CHECK_THROWS_AS(Resampler(20000.5, 100000.0), UsageError);
  CHECK_THROWS_AS(Resampler(0.0, 100000.0), UsageError);
}

}
