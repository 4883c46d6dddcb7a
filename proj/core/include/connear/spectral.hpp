#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace connear {

std::vector<std::complex<double>> fft(std::span<const double> x, std::size_t n_fft);
std::vector<std::complex<double>> ifft(std::span<const std::complex<double>> x);

// One-sided power spectrum |X(f)|^2 for bins 0..n_fft/2 of the zero-padded
// signal. Bin spacing is rate / n_fft.
std::vector<double> power_spectrum(std::span<const double> x, std::size_t n_fft);

// Magnitude of the analytic signal (FFT-based Hilbert transform, zero-padded
// to avoid circular wrap).
std::vector<double> analytic_envelope(std::span<const double> x);

// Discrete-time Fourier transform of `x` at an arbitrary frequency.
std::complex<double> dtft(std::span<const double> x, double frequency_hz, double rate);

std::vector<double> hann_window(std::size_t n);

std::size_t next_pow2(std::size_t n);

}  // namespace connear
