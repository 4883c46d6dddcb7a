#include "connear/spectral.hpp"

#include <cmath>
#include <numbers>
#include <unsupported/Eigen/FFT>

#include "connear/error.hpp"

namespace connear {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<std::complex<double>> fft(std::span<const double> x, std::size_t n_fft) {
  if (n_fft < x.size()) throw UsageError("fft: n_fft shorter than the signal");
  std::vector<std::complex<double>> in(n_fft, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) in[i] = x[i];
  std::vector<std::complex<double>> out(n_fft);
  Eigen::FFT<double> engine;
  engine.fwd(out, in);
  return out;
}

std::vector<std::complex<double>> ifft(std::span<const std::complex<double>> x) {
  std::vector<std::complex<double>> in(x.begin(), x.end());
  std::vector<std::complex<double>> out(x.size());
  Eigen::FFT<double> engine;
  engine.inv(out, in);
  return out;
}

std::vector<double> power_spectrum(std::span<const double> x, std::size_t n_fft) {
  const auto spec = fft(x, n_fft);
  std::vector<double> out(n_fft / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::norm(spec[k]);
  return out;
}

std::vector<double> analytic_envelope(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  // Zero-padded so a response still ringing at the end does not wrap onto the
  // start of the envelope.
  const std::size_t n_fft = next_pow2(2 * n);
  auto spec = fft(x, n_fft);
  for (std::size_t k = 1; k < n_fft; ++k) {
    if (2 * k < n_fft) spec[k] *= 2.0;
    else if (2 * k > n_fft) spec[k] = 0.0;
  }
  const auto analytic = ifft(spec);
  std::vector<double> env(n);
  for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(analytic[i]);
  return env;
}

std::complex<double> dtft(std::span<const double> x, double frequency_hz, double rate) {
  const double w = -2.0 * std::numbers::pi * frequency_hz / rate;
  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    acc += x[i] * std::polar(1.0, w * static_cast<double>(i));
  return acc;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                 static_cast<double>(n - 1)));
  return w;
}

}  // namespace connear
