#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace connear {

inline constexpr double kReferencePressure = 2e-5;  // Pa, 0 dB SPL

enum class StimulusKind { kAudio, kClick, kTone, kTonePair };

std::string to_string(StimulusKind kind);

struct StimulusLabel {
  StimulusKind kind = StimulusKind::kAudio;
  // dB SPL for tones/audio, dB peSPL for clicks; -inf means silence.
  double level_db = std::numeric_limits<double>::quiet_NaN();
  double frequency_hz = std::numeric_limits<double>::quiet_NaN();
  // Second primary of a tone pair.
  double frequency2_hz = std::numeric_limits<double>::quiet_NaN();
  double level2_db = std::numeric_limits<double>::quiet_NaN();
};

// Sound pressure waveform in Pa.
struct Stimulus {
  std::vector<double> samples;
  double rate = 0.0;
  StimulusLabel label;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / rate; }
};

double rms(std::span<const double> x);
double spl_db(std::span<const double> x);  // RMS level re 20 uPa

// Scale `stimulus` so that its RMS equals `level_db` dB SPL. Throws on
// silent input, which has no defined level.
void normalize_to_spl(Stimulus& stimulus, double level_db);

// Rectangular 100-us condensation click scaled to dB peSPL, starting at
// `onset_s`. Peak = 2*sqrt(2)*p0*10^(L/20).
Stimulus make_click(double level_pespl, double rate, double duration_s,
                    double onset_s = 0.0);

// Pure tone with RMS level `level_spl` over its unramped part and raised-cosine
// on/off ramps of `ramp_s` seconds each.
Stimulus make_tone(double frequency_hz, double level_spl, double rate,
                   std::size_t n_samples, double ramp_s = 0.01);

// Level of the first primary under the scissors rule L1 = 0.4*L2 + 39.
double scissors_level(double level2_db);

// Two simultaneous ramped tones f1 and f2 = ratio*f1 with levels from the
// scissors rule.
Stimulus make_dp_pair(double f1_hz, double ratio, double level2_db, double rate,
                      std::size_t n_samples, double ramp_s = 0.01);

}  // namespace connear
