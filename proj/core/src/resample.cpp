#include "connear/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "connear/error.hpp"

namespace connear {

namespace {

long long integral_rate(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw UsageError("resample: rates must be positive");
  const long long r = std::llround(rate);
  if (std::abs(rate - static_cast<double>(r)) > 1e-6 * rate)
    throw UsageError("resample: rates must be whole numbers of Hz");
  return r;
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
}

long long positive_mod(long long a, long long m) {
  const long long r = a % m;
  return r < 0 ? r + m : r;
}

}  // namespace

Resampler::Resampler(double rate_in, double rate_out, double stopband_db)
    : rate_in_(integral_rate(rate_in)), rate_out_(integral_rate(rate_out)) {
  if (rate_in_ == rate_out_) return;
  const long long g = std::gcd(rate_in_, rate_out_);
  up_ = rate_out_ / g;
  down_ = rate_in_ / g;

  const double high_rate = static_cast<double>(rate_in_ * up_);
  const double band = static_cast<double>(std::min(rate_in_, rate_out_));
  const double cutoff = 0.475 * band;
  const double transition = 2.0 * std::numbers::pi * (0.05 * band) / high_rate;
  const double beta = 0.1102 * (stopband_db - 8.7);
  const auto taps = static_cast<long long>(
      std::ceil((stopband_db - 7.95) / (2.285 * transition)));
  half_ = taps / 2 + 1;

  filter_.resize(static_cast<std::size_t>(2 * half_ + 1));
  const double norm = std::cyl_bessel_i(0.0, beta);
  for (long long n = -half_; n <= half_; ++n) {
    const double r = static_cast<double>(n) / static_cast<double>(half_);
    const double window = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / norm;
    filter_[static_cast<std::size_t>(n + half_)] =
        static_cast<double>(up_) * (2.0 * cutoff / high_rate) *
        sinc(2.0 * cutoff * static_cast<double>(n) / high_rate) * window;
  }

  phases_.resize(static_cast<std::size_t>(up_));
  phase_first_tap_.resize(static_cast<std::size_t>(up_));
  for (long long r = 0; r < up_; ++r) {
    const long long n0 = half_ - positive_mod(half_ - r, up_);
    phase_first_tap_[static_cast<std::size_t>(r)] = n0;
    auto& taps_r = phases_[static_cast<std::size_t>(r)];
    for (long long n = n0; n >= -half_; n -= up_)
      taps_r.push_back(filter_[static_cast<std::size_t>(n + half_)]);
  }
}

std::size_t Resampler::output_length(std::size_t input_length) const {
  if (rate_in_ == rate_out_) return input_length;
  const auto n = static_cast<long long>(input_length);
  return static_cast<std::size_t>((n * up_ + down_ - 1) / down_);
}

std::vector<double> Resampler::apply(std::span<const double> input) const {
  if (rate_in_ == rate_out_) return {input.begin(), input.end()};

  const auto n_in = static_cast<long long>(input.size());
  const std::size_t n_out = output_length(input.size());
  std::vector<double> out(n_out, 0.0);
  for (std::size_t m = 0; m < n_out; ++m) {
    const long long j = static_cast<long long>(m) * down_;
    const long long r = j % up_;
    const auto& taps = phases_[static_cast<std::size_t>(r)];
    const long long i0 = (j - phase_first_tap_[static_cast<std::size_t>(r)]) / up_;
    const auto q_lo = static_cast<std::size_t>(std::max<long long>(0, -i0));
    const auto q_hi = static_cast<std::size_t>(
        std::clamp<long long>(n_in - i0, 0, static_cast<long long>(taps.size())));
    double acc = 0.0;
    for (std::size_t q = q_lo; q < q_hi; ++q)
      acc += taps[q] * input[static_cast<std::size_t>(i0 + static_cast<long long>(q))];
    out[m] = acc;
  }
  return out;
}

double Resampler::frequency_response(double frequency_hz) const {
  if (rate_in_ == rate_out_) return 1.0;
  const double high_rate = static_cast<double>(rate_in_ * up_);
  double acc = 0.0;
  for (long long n = -half_; n <= half_; ++n)
    acc += filter_[static_cast<std::size_t>(n + half_)] *
           std::cos(2.0 * std::numbers::pi * frequency_hz * static_cast<double>(n) / high_rate);
  return acc / static_cast<double>(up_);
}

std::vector<double> resample(std::span<const double> input, double rate_in, double rate_out) {
  return Resampler(rate_in, rate_out).apply(input);
}

Stimulus resample(const Stimulus& audio, double rate_out) {
  Stimulus out;
  out.samples = resample(audio.samples, audio.rate, rate_out);
  out.rate = rate_out;
  out.label = audio.label;
  return out;
}

}  // namespace connear
