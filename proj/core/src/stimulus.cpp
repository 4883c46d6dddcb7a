#include "connear/stimulus.hpp"

#include <cmath>
#include <numbers>

#include "connear/error.hpp"

namespace connear {

namespace {

constexpr double kClickDuration = 100e-6;

double pressure_amplitude(double level_db) {
  if (std::isinf(level_db) && level_db < 0) return 0.0;
  return kReferencePressure * std::pow(10.0, level_db / 20.0);
}

void apply_ramps(std::vector<double>& x, std::size_t ramp_n) {
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < ramp_n; ++i) {
    const double w =
        0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(i) /
                              static_cast<double>(ramp_n)));
    x[i] *= w;
    x[n - 1 - i] *= w;
  }
}

}  // namespace

std::string to_string(StimulusKind kind) {
  switch (kind) {
    case StimulusKind::kAudio: return "audio";
    case StimulusKind::kClick: return "click";
    case StimulusKind::kTone: return "tone";
    case StimulusKind::kTonePair: return "tone_pair";
  }
  return "unknown";
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double spl_db(std::span<const double> x) {
  return 20.0 * std::log10(rms(x) / kReferencePressure);
}

void normalize_to_spl(Stimulus& stimulus, double level_db) {
  const double current = rms(stimulus.samples);
  if (!(current > 0.0) || !std::isfinite(current))
    throw DataError("cannot level-normalize a silent or non-finite signal");
  const double gain = pressure_amplitude(level_db) / current;
  for (double& v : stimulus.samples) v *= gain;
  stimulus.label.level_db = level_db;
}

Stimulus make_click(double level_pespl, double rate, double duration_s,
                    double onset_s) {
  if (!(rate > 0.0)) throw UsageError("make_click: rate must be positive");
  if (duration_s < 0.0) throw UsageError("make_click: negative duration");
  if (duration_s < kClickDuration)
    throw UsageError("make_click: duration shorter than the 100 us click");
  if (onset_s < 0.0) throw UsageError("make_click: negative onset");

  const auto n = static_cast<std::size_t>(std::llround(duration_s * rate));
  const auto start = static_cast<std::size_t>(std::llround(onset_s * rate));
  const auto width = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(kClickDuration * rate)));
  if (start + width > n) throw UsageError("make_click: click does not fit");

  Stimulus s;
  s.rate = rate;
  s.samples.assign(n, 0.0);
  const double peak = 2.0 * std::numbers::sqrt2 * pressure_amplitude(level_pespl);
  for (std::size_t i = start; i < start + width; ++i) s.samples[i] = peak;
  s.label.kind = StimulusKind::kClick;
  s.label.level_db = level_pespl;
  return s;
}

Stimulus make_tone(double frequency_hz, double level_spl, double rate,
                   std::size_t n_samples, double ramp_s) {
  if (!(rate > 0.0)) throw UsageError("make_tone: rate must be positive");
  if (!(frequency_hz > 0.0) || frequency_hz >= rate / 2.0)
    throw UsageError("make_tone: frequency must lie in (0, Nyquist)");
  const auto ramp_n = static_cast<std::size_t>(std::llround(ramp_s * rate));
  if (ramp_s < 0.0 || 2 * ramp_n > n_samples)
    throw UsageError("make_tone: ramps longer than the tone");

  Stimulus s;
  s.rate = rate;
  s.samples.resize(n_samples);
  const double amp = std::numbers::sqrt2 * pressure_amplitude(level_spl);
  const double w = 2.0 * std::numbers::pi * frequency_hz / rate;
  for (std::size_t i = 0; i < n_samples; ++i)
    s.samples[i] = amp * std::sin(w * static_cast<double>(i));
  apply_ramps(s.samples, ramp_n);
  s.label.kind = StimulusKind::kTone;
  s.label.level_db = level_spl;
  s.label.frequency_hz = frequency_hz;
  return s;
}

double scissors_level(double level2_db) { return 0.4 * level2_db + 39.0; }

Stimulus make_dp_pair(double f1_hz, double ratio, double level2_db, double rate,
                      std::size_t n_samples, double ramp_s) {
  if (level2_db < 0.0 || level2_db > 110.0)
    throw UsageError("make_dp_pair: L2 must lie in [0, 110] dB");
  if (!(ratio > 1.0)) throw UsageError("make_dp_pair: ratio must exceed 1");
  const double f2 = ratio * f1_hz;
  const double level1 = scissors_level(level2_db);
  Stimulus s = make_tone(f1_hz, level1, rate, n_samples, ramp_s);
  const Stimulus t2 = make_tone(f2, level2_db, rate, n_samples, ramp_s);
  for (std::size_t i = 0; i < n_samples; ++i) s.samples[i] += t2.samples[i];
  s.label.kind = StimulusKind::kTonePair;
  s.label.level_db = level1;
  s.label.frequency_hz = f1_hz;
  s.label.frequency2_hz = f2;
  s.label.level2_db = level2_db;
  return s;
}

}  // namespace connear
