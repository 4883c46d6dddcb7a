#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "connear/bm_response.hpp"
#include "connear/stimulus.hpp"
#include "connear/surrogate.hpp"
#include "connear/tl_model.hpp"
#include "connear/windowing.hpp"

namespace connear {

// Anything that maps sound pressure to BM displacement at 20 kHz. The
// response covers samples [begin, begin + count) of the stimulus; the rest
// only provides context. Implementations must be safe to call concurrently.
class Responder {
 public:
  virtual ~Responder() = default;
  virtual std::string name() const = 0;
  virtual const CochlearMap& map() const = 0;
  virtual BMResponse respond(const Stimulus& stimulus, std::size_t begin, std::size_t count) const = 0;
};

class TLResponder final : public Responder {
 public:
  explicit TLResponder(const TLModel& model) : model_(model) {}
  std::string name() const override { return "tl"; }
  const CochlearMap& map() const override { return model_.output_map(); }
  BMResponse respond(const Stimulus& stimulus, std::size_t begin, std::size_t count) const override;

 private:
  const TLModel& model_;
};

class SurrogateResponder final : public Responder {
 public:
  explicit SurrogateResponder(const SurrogateModel& model)
      : model_(model), map_(surrogate_output_map(model.spec().n_cf)) {}
  std::string name() const override { return "surrogate"; }
  const CochlearMap& map() const override { return map_; }
  BMResponse respond(const Stimulus& stimulus, std::size_t begin, std::size_t count) const override;

 private:
  const SurrogateModel& model_;
  CochlearMap map_;
};

// Stimulus layout for one analysis window: stimuli span left + core + right
// samples at 20 kHz and only the core is analysed. Tones fill the whole span
// (ramps fall in the context when it is long enough), clicks start at the
// first core sample.
struct EvalProtocol {
  WindowGeometry window{2048, 256, 256};
  double rate = 20000.0;
  double ramp_s = 0.01;
  std::size_t threads = 0;

  static EvalProtocol for_model(const ArchitectureSpec& spec) { return {spec.window}; }
};

// ---- tuning

// ERB = (area under the one-sided power spectrum) / (peak power), in Hz.
// Throws DataError for an all-zero channel.
double erb_hz(std::span<const double> channel, double rate, std::size_t n_fft = 0);
double q_erb(std::span<const double> channel, double cf, double rate, std::size_t n_fft = 0);

struct QerbCurve {
  double level_db = 0.0;  // click level, dB peSPL
  std::vector<double> cf;
  std::vector<double> erb;
  std::vector<double> q;
};

QerbCurve qerb_curve(const Responder& model, double level_pespl, const EvalProtocol& protocol = {});

// ---- excitation patterns

struct ExcitationPattern {
  double frequency_hz = 0.0;
  double level_db = 0.0;
  std::vector<double> cf;
  std::vector<double> rms;  // micrometres

  std::size_t argmax() const;
  double max() const;
};

std::vector<ExcitationPattern> excitation_patterns(const Responder& model, double frequency_hz,
                                                   std::span<const double> levels_db,
                                                   const EvalProtocol& protocol = {});

// 100 * RMSE(tl, nn) / max(tl). Throws UsageError for different CF grids and
// DataError if the reference maximum is zero.
double ep_rmse_percent(const ExcitationPattern& reference, const ExcitationPattern& test);

// ---- dispersion

struct DispersionProfile {
  double level_db = 0.0;
  std::vector<double> cf;
  std::vector<double> delay_ms;  // NaN where the envelope never reaches threshold
  std::vector<bool> defined;
};

// Onset = first sample where the analytic envelope of a channel reaches 10%
// of that channel's own peak, measured from the click onset.
DispersionProfile dispersion_profile(const Responder& model, double level_pespl,
                                     const EvalProtocol& protocol = {});
double onset_delay_ms(std::span<const double> channel, double rate, double threshold = 0.1);

// ---- distortion products

struct DPGram {
  double ratio = 1.2;
  double cf_hz = 0.0;                 // channel the DP is read from
  std::vector<double> f1_hz;
  std::vector<double> l2_db;
  std::vector<std::vector<double>> dp_db;     // [f1][l2], dB re 1 um
  std::vector<std::vector<double>> floor_db;  // median level between spectral lines
};

// Level of a windowed line in dB re 1 um: Hann window, amplitude-corrected.
double line_level_db(std::span<const double> x, double frequency_hz, double rate);

// Scissors-paradigm two-tone stimuli; L_DP at 2 f1 - f2 in the most basal
// channel from the Hann-windowed steady state. Throws UsageError if
// 2 f1 - f2 <= 0.
DPGram dp_gram(const Responder& model, std::span<const double> f1_hz, std::span<const double> l2_db,
               double ratio = 1.2, const EvalProtocol& protocol = {});

// ---- loss distributions

// Box-plot summary; quartiles by linear interpolation, whiskers at the most
// extreme values within 1.5 IQR of the quartiles.
struct BoxSummary {
  std::size_t count = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;
};

BoxSummary box_summary(std::vector<double> values);

// Per-window L1 of `test` against `reference` over a corpus: each item is
// normalized to `level_db`, windowed with `window` and both models respond
// to the same context-bearing window. Throws DataError for an empty corpus.
std::vector<double> window_l1(const Responder& test, const Responder& reference, const std::vector<Stimulus>& corpus,
                              const WindowGeometry& window, double level_db = 70.0, std::size_t threads = 0);
BoxSummary l1_distribution(const Responder& test, const Responder& reference, const std::vector<Stimulus>& corpus,
                           const WindowGeometry& window, double level_db = 70.0, std::size_t threads = 0);

// ---- reports

inline constexpr int kReportSchemaVersion = 1;

void write_csv(const std::filesystem::path& path, const QerbCurve& curve);
void write_csv(const std::filesystem::path& path, std::span<const ExcitationPattern> patterns);
void write_csv(const std::filesystem::path& path, const DispersionProfile& profile);
void write_csv(const std::filesystem::path& path, const DPGram& gram);
void write_csv(const std::filesystem::path& path, std::span<const double> window_losses);

std::string to_json(const QerbCurve& curve);
std::string to_json(std::span<const ExcitationPattern> patterns);
std::string to_json(const DispersionProfile& profile);
std::string to_json(const DPGram& gram);
std::string to_json(const BoxSummary& summary);

}  // namespace connear
