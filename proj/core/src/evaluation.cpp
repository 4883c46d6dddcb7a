#include "connear/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "connear/error.hpp"
#include "connear/kv_config.hpp"
#include "connear/parallel.hpp"
#include "connear/resample.hpp"
#include "connear/spectral.hpp"

namespace connear {

namespace {

constexpr double kModelRate = 20000.0;

void check_range(const BMResponse& r, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > r.length)
    throw UsageError("respond: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") exceeds the " + std::to_string(r.length) + "-sample response");
}

std::size_t ramp_samples(const EvalProtocol& p) { return static_cast<std::size_t>(std::llround(p.ramp_s * p.rate)); }

void check_protocol(const EvalProtocol& p) {
  if (p.window.core == 0) throw UsageError("evaluation window core must be positive");
  if (std::abs(p.rate - kModelRate) > 1e-9) throw UsageError("evaluation stimuli are generated at 20 kHz");
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void close_csv(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw DataError("write failed for " + path.string());
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

nlohmann::json header(const char* kind) { return {{"schema", std::string("connear.") + kind}, {"version", kReportSchemaVersion}}; }

// Quantile by linear interpolation between order statistics.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

// ---------------------------------------------------------------- responders

BMResponse TLResponder::respond(const Stimulus& stimulus, std::size_t begin, std::size_t count) const {
  const BMResponse full = model_.simulate(stimulus);
  check_range(full, begin, count);
  return full.slice(begin, count);
}

BMResponse SurrogateResponder::respond(const Stimulus& stimulus, std::size_t begin, std::size_t count) const {
  if (std::abs(stimulus.rate - kModelRate) > 1e-9) return process_range(model_, resample(stimulus, kModelRate), begin, count);
  return process_range(model_, stimulus, begin, count);
}

// ---------------------------------------------------------------- tuning

double erb_hz(std::span<const double> channel, double rate, std::size_t n_fft) {
  if (channel.empty()) throw DataError("erb: empty channel");
  if (n_fft == 0) n_fft = next_pow2(4 * channel.size());
  const std::vector<double> ps = power_spectrum(channel, n_fft);
  double area = 0.0, peak = 0.0;
  for (double v : ps) {
    area += v;
    peak = std::max(peak, v);
  }
  if (!(peak > 0.0) || !std::isfinite(area)) throw DataError("erb: channel is all zero or not finite");
  return area * (rate / static_cast<double>(n_fft)) / peak;
}

double q_erb(std::span<const double> channel, double cf, double rate, std::size_t n_fft) {
  return cf / erb_hz(channel, rate, n_fft);
}

QerbCurve qerb_curve(const Responder& model, double level_pespl, const EvalProtocol& protocol) {
  check_protocol(protocol);
  const WindowGeometry& w = protocol.window;
  const Stimulus click = make_click(level_pespl, protocol.rate, static_cast<double>(w.total()) / protocol.rate,
                                    static_cast<double>(w.left) / protocol.rate);
  const BMResponse r = model.respond(click, w.left, w.core);
  QerbCurve curve;
  curve.level_db = level_pespl;
  const std::size_t n = r.n_cf();
  curve.cf.assign(r.map.cfs().begin(), r.map.cfs().end());
  curve.erb.resize(n);
  curve.q.resize(n);
  WorkerPool pool(protocol.threads);
  pool.parallel_for(n, [&](std::size_t c) {
    const std::vector<double> ch = r.channel(c);
    try {
      curve.erb[c] = erb_hz(ch, r.rate);
    } catch (const DataError&) {
      throw DataError("qerb: channel " + std::to_string(c) + " (CF " + num(curve.cf[c]) + " Hz) is all zero");
    }
    curve.q[c] = curve.cf[c] / curve.erb[c];
  });
  return curve;
}

// ---------------------------------------------------------------- excitation

std::size_t ExcitationPattern::argmax() const {
  return static_cast<std::size_t>(std::max_element(rms.begin(), rms.end()) - rms.begin());
}

double ExcitationPattern::max() const { return rms.empty() ? 0.0 : *std::max_element(rms.begin(), rms.end()); }

std::vector<ExcitationPattern> excitation_patterns(const Responder& model, double frequency_hz,
                                                   std::span<const double> levels_db, const EvalProtocol& protocol) {
  check_protocol(protocol);
  const WindowGeometry& w = protocol.window;
  std::vector<ExcitationPattern> out(levels_db.size());
  WorkerPool pool(protocol.threads);
  pool.parallel_for(levels_db.size(), [&](std::size_t i) {
    const Stimulus tone = make_tone(frequency_hz, levels_db[i], protocol.rate, w.total(), protocol.ramp_s);
    const BMResponse r = model.respond(tone, w.left, w.core);
    ExcitationPattern& ep = out[i];
    ep.frequency_hz = frequency_hz;
    ep.level_db = levels_db[i];
    ep.cf.assign(r.map.cfs().begin(), r.map.cfs().end());
    ep.rms.resize(r.n_cf());
    for (std::size_t c = 0; c < r.n_cf(); ++c) ep.rms[c] = rms(r.channel(c));
  });
  return out;
}

double ep_rmse_percent(const ExcitationPattern& reference, const ExcitationPattern& test) {
  if (reference.cf.size() != test.cf.size() || reference.rms.size() != test.rms.size() ||
      reference.rms.size() != reference.cf.size())
    throw UsageError("ep_rmse_percent: patterns use different CF grids");
  for (std::size_t c = 0; c < reference.cf.size(); ++c)
    if (std::abs(reference.cf[c] - test.cf[c]) > 1e-9 * reference.cf[c])
      throw UsageError("ep_rmse_percent: patterns use different CF grids");
  const double peak = reference.max();
  if (!(peak > 0.0)) throw DataError("ep_rmse_percent: reference pattern maximum is zero");
  double acc = 0.0;
  for (std::size_t c = 0; c < reference.rms.size(); ++c) {
    const double d = test.rms[c] - reference.rms[c];
    acc += d * d;
  }
  return 100.0 * std::sqrt(acc / static_cast<double>(reference.rms.size())) / peak;
}

// ---------------------------------------------------------------- dispersion

double onset_delay_ms(std::span<const double> channel, double rate, double threshold) {
  const std::vector<double> env = analytic_envelope(channel);
  const double peak = env.empty() ? 0.0 : *std::max_element(env.begin(), env.end());
  if (!(peak > 0.0) || !std::isfinite(peak)) return std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < env.size(); ++k)
    if (env[k] >= threshold * peak) return 1000.0 * static_cast<double>(k) / rate;
  return std::numeric_limits<double>::quiet_NaN();
}

DispersionProfile dispersion_profile(const Responder& model, double level_pespl, const EvalProtocol& protocol) {
  check_protocol(protocol);
  const WindowGeometry& w = protocol.window;
  const Stimulus click = make_click(level_pespl, protocol.rate, static_cast<double>(w.total()) / protocol.rate,
                                    static_cast<double>(w.left) / protocol.rate);
  const BMResponse r = model.respond(click, w.left, w.core);
  DispersionProfile p;
  p.level_db = level_pespl;
  p.cf.assign(r.map.cfs().begin(), r.map.cfs().end());
  p.delay_ms.resize(r.n_cf());
  p.defined.resize(r.n_cf());
  for (std::size_t c = 0; c < r.n_cf(); ++c) {
    p.delay_ms[c] = onset_delay_ms(r.channel(c), r.rate);
    p.defined[c] = !std::isnan(p.delay_ms[c]);
  }
  return p;
}

// ---------------------------------------------------------------- distortion products

double line_level_db(std::span<const double> x, double frequency_hz, double rate) {
  if (x.empty()) throw UsageError("line_level_db: empty segment");
  const std::vector<double> w = hann_window(x.size());
  std::vector<double> xw(x.size());
  double sum_w = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xw[i] = x[i] * w[i];
    sum_w += w[i];
  }
  return 20.0 * std::log10(2.0 * std::abs(dtft(xw, frequency_hz, rate)) / sum_w);
}

DPGram dp_gram(const Responder& model, std::span<const double> f1_hz, std::span<const double> l2_db, double ratio,
               const EvalProtocol& protocol) {
  check_protocol(protocol);
  for (double f1 : f1_hz)
    if (!(2.0 * f1 - ratio * f1 > 0.0))
      throw UsageError("dp_gram: 2 f1 - f2 must be positive (f1 " + num(f1) + " Hz, ratio " + num(ratio) + ")");
  const WindowGeometry& w = protocol.window;
  const std::size_t ramp = ramp_samples(protocol);
  // Steady state only: drop core samples that fall inside a ramp.
  const std::size_t skip_front = ramp > w.left ? ramp - w.left : 0;
  const std::size_t skip_back = ramp > w.right ? ramp - w.right : 0;
  if (skip_front + skip_back + 16 > w.core) throw UsageError("dp_gram: window too short for the ramps");

  DPGram g;
  g.ratio = ratio;
  g.cf_hz = model.map().cf(0);
  g.f1_hz.assign(f1_hz.begin(), f1_hz.end());
  g.l2_db.assign(l2_db.begin(), l2_db.end());
  g.dp_db.assign(f1_hz.size(), std::vector<double>(l2_db.size()));
  g.floor_db = g.dp_db;

  WorkerPool pool(protocol.threads);
  pool.parallel_for(f1_hz.size() * l2_db.size(), [&](std::size_t job) {
    const std::size_t i = job / l2_db.size(), j = job % l2_db.size();
    const double f1 = f1_hz[i], f2 = ratio * f1, spacing = f2 - f1;
    const Stimulus pair = make_dp_pair(f1, ratio, l2_db[j], protocol.rate, w.total(), protocol.ramp_s);
    const BMResponse r = model.respond(pair, w.left, w.core);
    const std::vector<double> ch = r.channel(0);
    const std::span<const double> steady(ch.data() + skip_front, ch.size() - skip_front - skip_back);
    g.dp_db[i][j] = line_level_db(steady, 2.0 * f1 - f2, r.rate);

    // Intermodulation lines sit at f1 + k (f2 - f1); the floor is read halfway
    // between them.
    std::vector<double> between;
    for (double f = std::fmod(f1 + 0.5 * spacing, spacing); f < 0.45 * r.rate; f += spacing)
      if (f > 0.0) between.push_back(line_level_db(steady, f, r.rate));
    std::sort(between.begin(), between.end());
    g.floor_db[i][j] = between.empty() ? std::numeric_limits<double>::quiet_NaN() : quantile(between, 0.5);
  });
  return g;
}

// ---------------------------------------------------------------- loss distributions

BoxSummary box_summary(std::vector<double> values) {
  if (values.empty()) throw DataError("box_summary: no values");
  for (double v : values)
    if (!std::isfinite(v)) throw NumericalError("box_summary: non-finite value");
  std::sort(values.begin(), values.end());
  BoxSummary s;
  s.count = values.size();
  s.median = quantile(values, 0.5);
  s.q1 = quantile(values, 0.25);
  s.q3 = quantile(values, 0.75);
  const double iqr = s.q3 - s.q1;
  const double lo = s.q1 - 1.5 * iqr, hi = s.q3 + 1.5 * iqr;
  s.whisker_low = s.q1;
  s.whisker_high = s.q3;
  for (double v : values) {
    if (v < lo || v > hi) {
      s.outliers.push_back(v);
      continue;
    }
    s.whisker_low = std::min(s.whisker_low, v);
    s.whisker_high = std::max(s.whisker_high, v);
  }
  return s;
}

std::vector<double> window_l1(const Responder& test, const Responder& reference, const std::vector<Stimulus>& corpus,
                              const WindowGeometry& window, double level_db, std::size_t threads) {
  if (corpus.empty()) throw DataError("l1_distribution: empty corpus");
  if (test.map().n_cf() != reference.map().n_cf())
    throw UsageError("l1_distribution: models produce different channel counts");
  std::vector<Stimulus> windows;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    Stimulus s = corpus[i];
    try {
      normalize_to_spl(s, level_db);
    } catch (const DataError&) {
      throw DataError("l1_distribution: corpus item " + std::to_string(i) + " is silent");
    }
    if (std::abs(s.rate - kModelRate) > 1e-9) s = resample(s, kModelRate);
    WindowedAudio wa = window_with_context(s, window);
    for (auto& samples : wa.windows) {
      Stimulus win;
      win.rate = kModelRate;
      win.samples = std::move(samples);
      windows.push_back(std::move(win));
    }
  }
  std::vector<double> losses(windows.size());
  WorkerPool pool(threads);
  pool.parallel_for(windows.size(), [&](std::size_t k) {
    const BMResponse a = test.respond(windows[k], window.left, window.core);
    const BMResponse b = reference.respond(windows[k], window.left, window.core);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) acc += std::abs(static_cast<double>(a.data[i]) - b.data[i]);
    losses[k] = acc / static_cast<double>(a.data.size());
  });
  return losses;
}

BoxSummary l1_distribution(const Responder& test, const Responder& reference, const std::vector<Stimulus>& corpus,
                           const WindowGeometry& window, double level_db, std::size_t threads) {
  return box_summary(window_l1(test, reference, corpus, window, level_db, threads));
}

// ---------------------------------------------------------------- reports

void write_csv(const std::filesystem::path& path, const QerbCurve& curve) {
  auto out = open_csv(path);
  out << "channel,cf_hz,erb_hz,q_erb\n";
  for (std::size_t c = 0; c < curve.cf.size(); ++c)
    out << c << ',' << num(curve.cf[c]) << ',' << num(curve.erb[c]) << ',' << num(curve.q[c]) << '\n';
  close_csv(out, path);
}

void write_csv(const std::filesystem::path& path, std::span<const ExcitationPattern> patterns) {
  auto out = open_csv(path);
  out << "frequency_hz,level_db,channel,cf_hz,rms_um\n";
  for (const auto& ep : patterns)
    for (std::size_t c = 0; c < ep.cf.size(); ++c)
      out << num(ep.frequency_hz) << ',' << num(ep.level_db) << ',' << c << ',' << num(ep.cf[c]) << ','
          << num(ep.rms[c]) << '\n';
  close_csv(out, path);
}

void write_csv(const std::filesystem::path& path, const DispersionProfile& profile) {
  auto out = open_csv(path);
  out << "channel,cf_hz,onset_delay_ms\n";
  for (std::size_t c = 0; c < profile.cf.size(); ++c)
    out << c << ',' << num(profile.cf[c]) << ',' << num(profile.delay_ms[c]) << '\n';
  close_csv(out, path);
}

void write_csv(const std::filesystem::path& path, const DPGram& gram) {
  auto out = open_csv(path);
  out << "f1_hz,f2_hz,l1_db,l2_db,dp_hz,dp_db,floor_db\n";
  for (std::size_t i = 0; i < gram.f1_hz.size(); ++i)
    for (std::size_t j = 0; j < gram.l2_db.size(); ++j) {
      const double f1 = gram.f1_hz[i], f2 = gram.ratio * f1;
      out << num(f1) << ',' << num(f2) << ',' << num(scissors_level(gram.l2_db[j])) << ',' << num(gram.l2_db[j])
          << ',' << num(2.0 * f1 - f2) << ',' << num(gram.dp_db[i][j]) << ',' << num(gram.floor_db[i][j]) << '\n';
    }
  close_csv(out, path);
}

void write_csv(const std::filesystem::path& path, std::span<const double> window_losses) {
  auto out = open_csv(path);
  out << "window,l1_um\n";
  for (std::size_t k = 0; k < window_losses.size(); ++k) out << k << ',' << num(window_losses[k]) << '\n';
  close_csv(out, path);
}

std::string to_json(const QerbCurve& curve) {
  nlohmann::json j = header("qerb");
  j["level_db_pespl"] = curve.level_db;
  j["cf_hz"] = curve.cf;
  j["erb_hz"] = curve.erb;
  j["q_erb"] = curve.q;
  return j.dump(2);
}

std::string to_json(std::span<const ExcitationPattern> patterns) {
  nlohmann::json j = header("excitation_patterns");
  j["patterns"] = nlohmann::json::array();
  for (const auto& ep : patterns)
    j["patterns"].push_back({{"frequency_hz", ep.frequency_hz},
                             {"level_db", ep.level_db},
                             {"argmax_channel", ep.argmax()},
                             {"max_um", ep.max()},
                             {"rms_um", ep.rms}});
  if (!patterns.empty()) j["cf_hz"] = patterns.front().cf;
  return j.dump(2);
}

std::string to_json(const DispersionProfile& profile) {
  nlohmann::json j = header("dispersion");
  j["level_db_pespl"] = profile.level_db;
  j["cf_hz"] = profile.cf;
  nlohmann::json delays = nlohmann::json::array();
  for (std::size_t c = 0; c < profile.delay_ms.size(); ++c)
    delays.push_back(profile.defined[c] ? nlohmann::json(profile.delay_ms[c]) : nlohmann::json(nullptr));
  j["onset_delay_ms"] = delays;
  return j.dump(2);
}

std::string to_json(const DPGram& gram) {
  nlohmann::json j = header("dpgram");
  j["ratio"] = gram.ratio;
  j["channel_cf_hz"] = gram.cf_hz;
  j["f1_hz"] = gram.f1_hz;
  j["l2_db"] = gram.l2_db;
  j["dp_db"] = gram.dp_db;
  j["floor_db"] = gram.floor_db;
  return j.dump(2);
}

std::string to_json(const BoxSummary& s) {
  nlohmann::json j = header("l1_distribution");
  j["count"] = s.count;
  j["median"] = s.median;
  j["q1"] = s.q1;
  j["q3"] = s.q3;
  j["whisker_low"] = s.whisker_low;
  j["whisker_high"] = s.whisker_high;
  j["outliers"] = s.outliers;
  return j.dump(2);
}

}  // namespace connear
