#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "connear/stimulus.hpp"

namespace connear {

// Rational polyphase resampler with a zero-phase Kaiser-windowed sinc
// low-pass. Output sample m sits at time m / rate_out, aligned with input
// sample times. Passband edge 0.45*min(rates), stopband from 0.5*min(rates).
class Resampler {
 public:
  Resampler(double rate_in, double rate_out, double stopband_db = 80.0);

  std::vector<double> apply(std::span<const double> input) const;
  std::size_t output_length(std::size_t input_length) const;

  long long up() const { return up_; }
  long long down() const { return down_; }
  std::size_t filter_length() const { return filter_.size(); }

  // Response of the prototype low-pass at `frequency_hz`, normalized so the
  // passband is 1.
  double frequency_response(double frequency_hz) const;

 private:
  long long rate_in_;
  long long rate_out_;
  long long up_ = 1;
  long long down_ = 1;
  long long half_ = 0;
  std::vector<double> filter_;               // centered, length 2*half+1
  std::vector<std::vector<double>> phases_;  // per residue of j mod up
  std::vector<long long> phase_first_tap_;   // largest n <= half per residue
};

std::vector<double> resample(std::span<const double> input, double rate_in, double rate_out);
Stimulus resample(const Stimulus& audio, double rate_out);

}  // namespace connear
