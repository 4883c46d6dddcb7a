#include "connear/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "connear/error.hpp"
#include "connear/wav.hpp"

namespace connear {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

double log_uniform(Rng& rng, double lo, double hi) { return std::exp(uniform(rng, std::log(lo), std::log(hi))); }

double db_gain(double db) { return std::pow(10.0, db / 20.0); }

// Raised-cosine fade in and out over `ramp` samples (clipped to half length).
void fade(std::vector<double>& x, std::size_t ramp) {
  ramp = std::min(ramp, x.size() / 2);
  for (std::size_t i = 0; i < ramp; ++i) {
    const double w = 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(ramp)));
    x[i] *= w;
    x[x.size() - 1 - i] *= w;
  }
}

// RBJ constant-peak band-pass applied in place.
void band_pass(std::vector<double>& x, double centre, double q, double rate) {
  const double w0 = kTwoPi * centre / rate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (double& v : x) {
    const double y = b0 * v + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = v;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

std::vector<double> noise(Rng& rng, std::size_t n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = nd(rng);
  return x;
}

void normalize_rms(std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  const double r = std::sqrt(acc / static_cast<double>(std::max<std::size_t>(1, x.size())));
  if (r > 0.0)
    for (double& v : x) v /= r;
}

// Harmonic complex with F0 gliding linearly from f0a to f0b; harmonic h has
// amplitude shape(h * f0).
template <typename Shape>
std::vector<double> harmonic(std::size_t n, double f0a, double f0b, double f_max, double rate, Shape shape) {
  std::vector<double> x(n, 0.0);
  const auto n_harm = static_cast<std::size_t>(std::floor(f_max / std::max(f0a, f0b)));
  for (std::size_t h = 1; h <= n_harm; ++h) {
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double f0 = f0a + (f0b - f0a) * static_cast<double>(i) / static_cast<double>(n);
      const double f = static_cast<double>(h) * f0;
      x[i] += shape(f) * std::sin(phase);
      phase += kTwoPi * f / rate;
    }
  }
  return x;
}

void add_at(std::vector<double>& dst, std::size_t at, const std::vector<double>& src, double gain) {
  for (std::size_t i = 0; i < src.size() && at + i < dst.size(); ++i) dst[at + i] += gain * src[i];
}

std::vector<double> speech_item(Rng& rng, std::size_t n, double rate) {
  std::vector<double> out(n, 0.0);
  std::size_t pos = 0;
  bool first = true;
  auto ms = [&](double v) { return static_cast<std::size_t>(v * 1e-3 * rate); };
  while (pos < n) {
    const double pick = first ? 0.0 : uniform(rng, 0.0, 1.0);
    first = false;
    const double gain = db_gain(uniform(rng, -15.0, 15.0));
    std::vector<double> seg;
    if (pick < 0.45) {
      // Voiced: three formants over a harmonic source.
      const std::size_t len = ms(uniform(rng, 80.0, 300.0));
      const double f0 = uniform(rng, 90.0, 250.0);
      const double glide = f0 * uniform(rng, 0.8, 1.25);
      const double formants[3] = {uniform(rng, 300.0, 900.0), uniform(rng, 900.0, 2500.0),
                                  uniform(rng, 2500.0, 3500.0)};
      const double widths[3] = {uniform(rng, 60.0, 150.0), uniform(rng, 80.0, 200.0), uniform(rng, 120.0, 300.0)};
      const double levels[3] = {1.0, db_gain(uniform(rng, -12.0, -3.0)), db_gain(uniform(rng, -24.0, -10.0))};
      seg = harmonic(len, f0, glide, std::min(5000.0, 0.45 * rate), rate, [&](double f) {
        double a = 0.0;
        for (int i = 0; i < 3; ++i) {
          const double d = (f - formants[i]) / widths[i];
          a += levels[i] / (1.0 + d * d);
        }
        return a;
      });
      normalize_rms(seg);
      fade(seg, ms(10.0));
    } else if (pick < 0.65) {
      // Fricative-like band of noise.
      seg = noise(rng, ms(uniform(rng, 50.0, 200.0)));
      band_pass(seg, log_uniform(rng, 2000.0, std::min(7000.0, 0.4 * rate)), uniform(rng, 0.7, 2.0), rate);
      normalize_rms(seg);
      fade(seg, ms(8.0));
    } else if (pick < 0.80) {
      // Isolated tone.
      const std::size_t len = ms(uniform(rng, 100.0, 400.0));
      const double f = log_uniform(rng, 125.0, std::min(8000.0, 0.4 * rate));
      seg.resize(len);
      const double phase = uniform(rng, 0.0, kTwoPi);
      for (std::size_t i = 0; i < len; ++i) seg[i] = std::numbers::sqrt2 * std::sin(kTwoPi * f * static_cast<double>(i) / rate + phase);
      fade(seg, ms(10.0));
    } else if (pick < 0.85) {
      // Click followed by its ringing gap.
      seg.assign(ms(uniform(rng, 20.0, 50.0)), 0.0);
      const std::size_t width = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(100e-6 * rate)));
      for (std::size_t i = 0; i < width; ++i) seg[i] = 4.0;
    } else {
      seg.assign(ms(uniform(rng, 30.0, 150.0)), 0.0);
    }
    add_at(out, pos, seg, gain);
    pos += seg.size();
  }
  return out;
}

std::vector<double> music_item(Rng& rng, std::size_t n, double rate) {
  std::vector<double> out(n, 0.0);
  std::size_t pos = 0;
  auto ms = [&](double v) { return static_cast<std::size_t>(v * 1e-3 * rate); };
  static constexpr double kIntervals[] = {1.0, 1.25, 1.5, 2.0, 1.2, 1.3348};
  while (pos < n) {
    const std::size_t len = ms(uniform(rng, 150.0, 600.0));
    const double root = log_uniform(rng, 80.0, 1000.0);
    const int voices = 1 + static_cast<int>(uniform(rng, 0.0, 3.0));
    const double tilt = uniform(rng, 0.7, 1.5);
    const double attack = uniform(rng, 10.0, 40.0) * 1e-3 * rate;
    const double decay = uniform(rng, 0.1, 0.8) * rate;
    std::vector<double> note(len, 0.0);
    for (int v = 0; v < voices; ++v) {
      const double f0 = root * kIntervals[static_cast<std::size_t>(uniform(rng, 0.0, 6.0))];
      const auto tone = harmonic(len, f0, f0, std::min(8000.0, 0.45 * rate), rate,
                                 [&](double f) { return std::pow(f / f0, -tilt); });
      for (std::size_t i = 0; i < len; ++i) note[i] += tone[i];
    }
    for (std::size_t i = 0; i < len; ++i) {
      const double t = static_cast<double>(i);
      note[i] *= std::min(1.0, t / attack) * std::exp(-t / decay);
    }
    normalize_rms(note);
    fade(note, ms(5.0));
    add_at(out, pos, note, db_gain(uniform(rng, -15.0, 15.0)));

    if (uniform(rng, 0.0, 1.0) < 0.4) {
      // Percussive hit somewhere inside the note.
      auto hit = noise(rng, ms(uniform(rng, 30.0, 80.0)));
      band_pass(hit, log_uniform(rng, 200.0, std::min(6000.0, 0.4 * rate)), uniform(rng, 0.5, 1.5), rate);
      const double tau = static_cast<double>(hit.size()) / 4.0;
      for (std::size_t i = 0; i < hit.size(); ++i) hit[i] *= std::exp(-static_cast<double>(i) / tau);
      normalize_rms(hit);
      add_at(out, pos + static_cast<std::size_t>(uniform(rng, 0.0, static_cast<double>(len))), hit,
             db_gain(uniform(rng, -10.0, 10.0)));
    }
    pos += len;
  }
  return out;
}

}  // namespace

CorpusPreset parse_corpus_preset(const std::string& name) {
  if (name == "speech-shaped") return CorpusPreset::kSpeechShaped;
  if (name == "music-shaped") return CorpusPreset::kMusicShaped;
  throw UsageError("unknown corpus preset '" + name + "' (expected speech-shaped or music-shaped)");
}

std::string to_string(CorpusPreset preset) {
  return preset == CorpusPreset::kSpeechShaped ? "speech-shaped" : "music-shaped";
}

std::vector<Stimulus> synthetic_corpus(CorpusPreset preset, std::size_t n_items, double item_duration_s,
                                       std::uint64_t seed, double rate) {
  if (n_items == 0) throw UsageError("synthetic corpus: need at least one item");
  if (!(item_duration_s > 0.0)) throw UsageError("synthetic corpus: item duration must be positive");
  if (!(rate >= 16000.0)) throw UsageError("synthetic corpus: rate must be at least 16 kHz");
  const auto n = static_cast<std::size_t>(std::llround(item_duration_s * rate));
  std::vector<Stimulus> items(n_items);
  for (std::size_t i = 0; i < n_items; ++i) {
    // One stream per item so items do not depend on each other.
    Rng rng(seed * 0x9E3779B97F4A7C15ull + i + (preset == CorpusPreset::kMusicShaped ? 0x5bd1e995ull : 0));
    items[i].rate = rate;
    items[i].samples = preset == CorpusPreset::kSpeechShaped ? speech_item(rng, n, rate) : music_item(rng, n, rate);
    normalize_rms(items[i].samples);
    for (double& v : items[i].samples) v *= kReferencePressure * db_gain(70.0);
    items[i].label.kind = StimulusKind::kAudio;
    items[i].label.level_db = 70.0;
  }
  return items;
}

std::vector<std::filesystem::path> list_corpus_files(const std::filesystem::path& dir_or_list) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(dir_or_list, ec)) {
    for (const auto& entry : fs::directory_iterator(dir_or_list)) {
      auto ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (entry.is_regular_file() && ext == ".wav") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(dir_or_list, ec)) {
    std::ifstream in(dir_or_list);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      fs::path p(line);
      if (p.is_relative()) p = dir_or_list.parent_path() / p;
      files.push_back(p);
    }
  } else {
    throw DataError("corpus path " + dir_or_list.string() + " does not exist");
  }
  if (files.empty()) throw DataError("corpus " + dir_or_list.string() + " holds no .wav files");
  for (const auto& f : files)
    if (!fs::is_regular_file(f, ec)) throw DataError("corpus file " + f.string() + " is missing");
  return files;
}

std::vector<Stimulus> load_corpus(const std::vector<std::filesystem::path>& files) {
  if (files.empty()) throw DataError("empty corpus");
  std::vector<Stimulus> items;
  items.reserve(files.size());
  for (const auto& f : files) {
    items.push_back(read_wav(f));
    if (items.back().samples.empty()) throw DataError("corpus file " + f.string() + " has no samples");
  }
  return items;
}

}  // namespace connear
