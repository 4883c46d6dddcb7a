#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <thread>

#include "connear/error.hpp"
#include "connear/evaluation.hpp"
#include "connear/stimulus.hpp"
#include "connear/tl_model.hpp"
#include "test_util.hpp"

using namespace connear;

namespace {

const TLModel& oracle() {
  static const TLModel model{TLModelParams{}};
  return model;
}

double channel_rms(const BMResponse& r, std::size_t c, std::size_t begin, std::size_t end) {
  double acc = 0.0;
  for (std::size_t t = begin; t < end; ++t) acc += static_cast<double>(r.at(t, c)) * r.at(t, c);
  return std::sqrt(acc / static_cast<double>(end - begin));
}

// Largest |b - a * gain| relative to max |b|.
double scaling_deviation(const BMResponse& a, const BMResponse& b, double gain) {
  double worst = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < b.data.size(); ++i) peak = std::max(peak, static_cast<double>(std::abs(b.data[i])));
  for (std::size_t i = 0; i < b.data.size(); ++i)
    worst = std::max(worst, std::abs(b.data[i] - gain * a.data[i]));
  return worst / peak;
}

}  // namespace

TEST_SUITE("tl_model") {

TEST_CASE("default parameters are valid and round trip through a config file") {
  TLModelParams p;
  p.validate();
  p.x_sat_m = 1.25e-8;
  p.nonlinear = false;
  const auto dir = scratch_dir("tl_params");
  p.save(dir / "tl.cfg");
  const TLModelParams q = TLModelParams::load(dir / "tl.cfg");
  CHECK(q.x_sat_m == p.x_sat_m);
  CHECK(q.nonlinear == false);
  CHECK(q.n_sections == p.n_sections);
  CHECK(q.middle_ear_gain == p.middle_ear_gain);
}

TEST_CASE("invalid parameters are rejected") {
  TLModelParams p;
  p.undamping = 1.0;
  CHECK_THROWS_AS(p.validate(), UsageError);
  p = {};
  p.bm_mass = 0.0;
  CHECK_THROWS_AS(p.validate(), UsageError);
  p = {};
  p.q_pole = -1.0;
  CHECK_THROWS_AS(p.validate(), UsageError);
}

TEST_CASE("section CFs are strictly decreasing base to apex over 25 Hz - 20 kHz") {
  const auto cfs = oracle().section_cfs();
  REQUIRE(cfs.size() == 1000);
  CHECK(cfs.front() == doctest::Approx(20000.0));
  CHECK(cfs.back() == doctest::Approx(25.0));
  for (std::size_t i = 1; i < cfs.size(); ++i) CHECK(cfs[i] < cfs[i - 1]);
}

TEST_CASE("channel selection maps 201 targets to distinct sections in base-to-apex order") {
  const auto cfs = oracle().section_cfs();
  const auto sel = tl_select_sections(cfs, default_output_map());
  REQUIRE(sel.size() == 201);
  for (std::size_t i = 1; i < sel.size(); ++i) CHECK(sel[i] > sel[i - 1]);
  // Endpoints are the log-nearest sections.
  auto log_dist = [&](std::size_t s, double f) { return std::abs(std::log(cfs[s] / f)); };
  for (std::size_t s : {sel.front() - 1, sel.front() + 1}) CHECK(log_dist(sel.front(), 12000.0) <= log_dist(s, 12000.0));
  for (std::size_t s : {sel.back() - 1, sel.back() + 1}) CHECK(log_dist(sel.back(), 100.0) <= log_dist(s, 100.0));

  const std::vector<double> narrow{10000.0, 5000.0, 1000.0};
  CHECK_THROWS_AS(tl_select_sections(narrow, default_output_map()), DataError);
}

TEST_CASE("zero input gives an all-zero response") {
  Stimulus s;
  s.rate = 20000.0;
  s.samples.assign(400, 0.0);
  const BMResponse r = oracle().simulate(s);
  CHECK(r.length == 400);
  CHECK(r.n_cf() == 201);
  CHECK(r.max_abs() == 0.0);
}

TEST_CASE("bad stimuli are data errors") {
  Stimulus s;
  s.rate = 20000.0;
  CHECK_THROWS_AS(oracle().simulate(s), DataError);
  s.samples = {0.0, std::nan(""), 0.0};
  CHECK_THROWS_AS(oracle().simulate(s), DataError);
}

TEST_CASE("divergence names the section and the time") {
  const Stimulus s = make_click(250.0, 20000.0, 0.01);
  try {
    oracle().simulate(s);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("section") != std::string::npos);
    CHECK(msg.find("ms") != std::string::npos);
  }
}

TEST_CASE("output is deterministic and safe to compute concurrently") {
  const Stimulus s = make_tone(2000.0, 60.0, 20000.0, 600, 0.005);
  const BMResponse a = oracle().simulate(s);
  BMResponse b, c;
  std::thread t1([&] { b = oracle().simulate(s); });
  std::thread t2([&] { c = oracle().simulate(s); });
  t1.join();
  t2.join();
  CHECK(a.data == b.data);
  CHECK(a.data == c.data);
}

TEST_CASE("doubling a low-level input doubles the output within 1%") {
  // Holds at -10 dB SPL and below; at 0 dB the saturating damping is already
  // engaged for the frozen constants.
  for (double level : {-20.0, -10.0}) {
    CAPTURE(level);
    const double gain = std::pow(10.0, 6.0 / 20.0);
    const BMResponse a = oracle().simulate(make_tone(1000.0, level - 6.0, 20000.0, 2560));
    const BMResponse b = oracle().simulate(make_tone(1000.0, level, 20000.0, 2560));
    CHECK(scaling_deviation(a, b, gain) < 0.01);
    const BMResponse c = oracle().simulate(make_click(level - 6.0, 20000.0, 0.128));
    const BMResponse d = oracle().simulate(make_click(level, 20000.0, 0.128));
    CHECK(scaling_deviation(c, d, gain) < 0.01);
  }
}

TEST_CASE("on-CF response to a 1 kHz tone grows compressively from 40 to 80 dB") {
  const std::size_t ch = oracle().output_map().nearest_channel(1000.0);
  const BMResponse lo = oracle().simulate(make_tone(1000.0, 40.0, 20000.0, 2560));
  const BMResponse hi = oracle().simulate(make_tone(1000.0, 80.0, 20000.0, 2560));
  const double growth = 20.0 * std::log10(channel_rms(hi, ch, 256, 2304) / channel_rms(lo, ch, 256, 2304)) / 40.0;
  CHECK(growth > 0.0);
  CHECK(growth < 0.5);
  CHECK(hi.max_abs() < 100.0);
}

TEST_CASE("70 dB 1 kHz tone peaks near 1 kHz, at most half an octave basal") {
  const BMResponse r = oracle().simulate(make_tone(1000.0, 70.0, 20000.0, 2560));
  std::size_t best = 0;
  double best_rms = -1.0;
  for (std::size_t c = 0; c < r.n_cf(); ++c) {
    const double v = channel_rms(r, c, 256, 2304);
    if (v > best_rms) best_rms = v, best = c;
  }
  const auto& map = r.map;
  // Channel 0 is the most basal, so higher CFs have smaller indices.
  const std::size_t lo = map.nearest_channel(1000.0 * std::sqrt(2.0)) - 2;
  const std::size_t hi = map.nearest_channel(1000.0) + 2;
  CAPTURE(map.cf(best));
  CHECK(best >= lo);
  CHECK(best <= hi);
}

TEST_CASE("1 kHz tuning is sharper at 40 than at 70 dB peSPL") {
  const std::size_t ch = oracle().output_map().nearest_channel(1000.0);
  const BMResponse a = oracle().simulate(make_click(40.0, 20000.0, 0.1024));
  const BMResponse b = oracle().simulate(make_click(70.0, 20000.0, 0.1024));
  const double cf = oracle().output_map().cf(ch);
  CHECK(q_erb(a.channel(ch), cf, 20000.0) > q_erb(b.channel(ch), cf, 20000.0));
}

TEST_CASE("click onsets are delayed toward the apex") {
  const BMResponse r = oracle().simulate(make_click(70.0, 20000.0, 0.1024));
  double prev = 0.0;
  std::size_t violations = 0;
  for (std::size_t c = 0; c < r.n_cf(); ++c) {
    const double d = onset_delay_ms(r.channel(c), 20000.0);
    REQUIRE(std::isfinite(d));
    if (d + 0.05 < prev) ++violations;  // one output sample of slack
    prev = std::max(prev, d);
  }
  CHECK(violations == 0);
  const double apical = onset_delay_ms(r.channel(r.n_cf() - 1), 20000.0);
  CHECK(apical >= 8.0);
  CHECK(apical <= 16.0);
  CHECK(onset_delay_ms(r.channel(0), 20000.0) < apical);
}

TEST_CASE("two tones generate a distortion line that vanishes when linearized") {
  const double f1 = 2000.0, f2 = 2400.0;
  const std::size_t n = 4096;
  const Stimulus s = make_dp_pair(f1, 1.2, 60.0, 20000.0, n);
  TLModelParams lin_params;
  lin_params.nonlinear = false;
  const TLModel linear(lin_params);

  auto dp_and_floor = [&](const BMResponse& r) {
    std::vector<double> ch = r.channel(0);
    std::vector<double> steady(ch.begin() + 200, ch.end() - 200);
    const double dp = line_level_db(steady, 2.0 * f1 - f2, 20000.0);
    std::vector<double> floor;
    for (int k = -4; k <= 4; ++k) floor.push_back(line_level_db(steady, f1 + (k + 0.5) * (f2 - f1), 20000.0));
    std::nth_element(floor.begin(), floor.begin() + 4, floor.end());
    return std::pair{dp, floor[4]};
  };
  const auto [dp, floor] = dp_and_floor(oracle().simulate(s));
  const auto [dp_lin, floor_lin] = dp_and_floor(linear.simulate(s));
  CAPTURE(dp);
  CAPTURE(floor);
  CAPTURE(dp_lin);
  CHECK(dp - floor >= 20.0);
  CHECK(dp - dp_lin >= 40.0);
}

}
