#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "connear/spectral.hpp"

using namespace connear;

TEST_SUITE("spectral") {

TEST_CASE("fft agrees with a direct DFT") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  std::vector<double> x(37);
  for (double& v : x) v = nd(rng);
  const std::size_t n = 64;
  const auto X = fft(x, n);
  REQUIRE(X.size() == n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> direct = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      direct += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(n));
    CHECK(std::abs(X[k] - direct) < 1e-10);
  }
  const auto back = ifft(X);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i].real() == doctest::Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("power spectrum holds |X|^2 of the positive bins") {
  std::vector<double> x{1.0, 2.0, -1.0, 0.5};
  const auto ps = power_spectrum(x, 8);
  const auto X = fft(x, 8);
  REQUIRE(ps.size() == 5);
  for (std::size_t k = 0; k < ps.size(); ++k) CHECK(ps[k] == doctest::Approx(std::norm(X[k])));
}

TEST_CASE("analytic envelope recovers a slow AM envelope") {
  const double rate = 20000.0;
  std::vector<double> x(4000), env(4000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / rate;
    env[i] = 1.0 + 0.5 * std::cos(2.0 * std::numbers::pi * 10.0 * t);
    x[i] = env[i] * std::sin(2.0 * std::numbers::pi * 1000.0 * t);
  }
  const auto e = analytic_envelope(x);
  for (std::size_t i = 500; i < 3500; ++i) CHECK(e[i] == doctest::Approx(env[i]).epsilon(0.01));
}

TEST_CASE("envelope does not wrap a late burst onto the start") {
  std::vector<double> x(2048, 0.0);
  for (std::size_t i = 1900; i < 2048; ++i) x[i] = std::sin(0.5 * static_cast<double>(i));
  const auto e = analytic_envelope(x);
  for (std::size_t i = 0; i < 100; ++i) CHECK(e[i] < 0.05);
}

TEST_CASE("dtft of a sinusoid over whole periods") {
  const double rate = 20000.0;
  std::vector<double> x(2000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 3.0 * std::cos(2.0 * std::numbers::pi * 500.0 * static_cast<double>(i) / rate);
  CHECK(2.0 * std::abs(dtft(x, 500.0, rate)) / 2000.0 == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(std::abs(dtft(x, 1500.0, rate)) < 1e-8);
}

TEST_CASE("hann window and next_pow2") {
  const auto w = hann_window(5);
  CHECK(w[0] == doctest::Approx(0.0));
  CHECK(w[2] == doctest::Approx(1.0));
  CHECK(next_pow2(1) == 1);
  CHECK(next_pow2(2049) == 4096);
  CHECK(next_pow2(4096) == 4096);
}

}
