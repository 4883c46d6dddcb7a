#include "connear/tl_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "connear/error.hpp"
#include "connear/resample.hpp"

namespace connear {

namespace {

constexpr double kMetresToMicrometres = 1e6;

}  // namespace

void TLModelParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw UsageError(std::string("TL parameters: ") + what);
  };
  require(n_sections >= 2, "need at least two sections");
  require(f_apex_hz > 0.0 && f_base_hz > f_apex_hz, "require 0 < f_apex < f_base");
  require(solver_rate > 0.0 && output_rate > 0.0, "rates must be positive");
  require(f_base_hz < solver_rate / 2.0, "f_base must lie below the solver Nyquist");
  require(cochlear_length_m > 0.0 && scala_height_m > 0.0 && fluid_density > 0.0,
          "geometry must be positive");
  require(bm_mass > 0.0, "mass must be positive");
  require(q_pole > 0.0, "q_pole must be positive");
  require(undamping >= 0.0 && undamping < 1.0, "undamping must lie in [0, 1)");
  require(x_sat_m > 0.0, "x_sat must be positive");
  require(middle_ear_low_hz > 0.0 && middle_ear_high_hz > middle_ear_low_hz,
          "middle-ear band must be ordered");
  require(middle_ear_high_hz < solver_rate / 2.0, "middle-ear band above Nyquist");
  require(output_channels >= 2, "need at least two output channels");
  require(output_f_min_hz >= f_apex_hz && output_f_max_hz <= f_base_hz,
          "output CFs must lie inside the section range");
  require(divergence_limit_m > 0.0, "divergence limit must be positive");
}

KeyValueFile TLModelParams::to_config() const {
  KeyValueFile f;
  f.set("tl_params_version", static_cast<long long>(kVersion));
  f.set("n_sections", static_cast<long long>(n_sections));
  f.set("f_base_hz", f_base_hz);
  f.set("f_apex_hz", f_apex_hz);
  f.set("solver_rate", solver_rate);
  f.set("output_rate", output_rate);
  f.set("cochlear_length_m", cochlear_length_m);
  f.set("scala_height_m", scala_height_m);
  f.set("fluid_density", fluid_density);
  f.set("bm_mass", bm_mass);
  f.set("q_pole", q_pole);
  f.set("undamping", undamping);
  f.set("x_sat_m", x_sat_m);
  f.set("nonlinear", nonlinear);
  f.set("middle_ear_low_hz", middle_ear_low_hz);
  f.set("middle_ear_high_hz", middle_ear_high_hz);
  f.set("middle_ear_gain", middle_ear_gain);
  f.set("output_channels", static_cast<long long>(output_channels));
  f.set("output_f_min_hz", output_f_min_hz);
  f.set("output_f_max_hz", output_f_max_hz);
  f.set("divergence_limit_m", divergence_limit_m);
  return f;
}

TLModelParams TLModelParams::from_config(const KeyValueFile& file) {
  KeyValueReader r(file);
  const auto version = r.get_int("tl_params_version", -1);
  if (version != kVersion)
    throw DataError(file.source() + ": unsupported tl_params_version " + std::to_string(version));
  TLModelParams p;
  p.n_sections = static_cast<std::size_t>(r.get_int("n_sections", static_cast<long long>(p.n_sections)));
  p.f_base_hz = r.get_double("f_base_hz", p.f_base_hz);
  p.f_apex_hz = r.get_double("f_apex_hz", p.f_apex_hz);
  p.solver_rate = r.get_double("solver_rate", p.solver_rate);
  p.output_rate = r.get_double("output_rate", p.output_rate);
  p.cochlear_length_m = r.get_double("cochlear_length_m", p.cochlear_length_m);
  p.scala_height_m = r.get_double("scala_height_m", p.scala_height_m);
  p.fluid_density = r.get_double("fluid_density", p.fluid_density);
  p.bm_mass = r.get_double("bm_mass", p.bm_mass);
  p.q_pole = r.get_double("q_pole", p.q_pole);
  p.undamping = r.get_double("undamping", p.undamping);
  p.x_sat_m = r.get_double("x_sat_m", p.x_sat_m);
  p.nonlinear = r.get_bool("nonlinear", p.nonlinear);
  p.middle_ear_low_hz = r.get_double("middle_ear_low_hz", p.middle_ear_low_hz);
  p.middle_ear_high_hz = r.get_double("middle_ear_high_hz", p.middle_ear_high_hz);
  p.middle_ear_gain = r.get_double("middle_ear_gain", p.middle_ear_gain);
  p.output_channels =
      static_cast<std::size_t>(r.get_int("output_channels", static_cast<long long>(p.output_channels)));
  p.output_f_min_hz = r.get_double("output_f_min_hz", p.output_f_min_hz);
  p.output_f_max_hz = r.get_double("output_f_max_hz", p.output_f_max_hz);
  p.divergence_limit_m = r.get_double("divergence_limit_m", p.divergence_limit_m);
  r.finish();
  p.validate();
  return p;
}

TLModelParams TLModelParams::load(const std::filesystem::path& path) {
  return from_config(KeyValueFile::load(path));
}

void TLModelParams::save(const std::filesystem::path& path) const { to_config().save(path); }

std::vector<std::size_t> tl_select_sections(std::span<const double> section_cfs,
                                            const CochlearMap& map) {
  if (section_cfs.empty()) throw DataError("tl_select_sections: no sections");
  const double hi = section_cfs.front();
  const double lo = section_cfs.back();
  if (map.cf(0) > hi || map.cf(map.n_cf() - 1) < lo)
    throw DataError("tl_select_sections: section CFs do not bracket the channel map");

  std::vector<std::size_t> out;
  out.reserve(map.n_cf());
  std::size_t s = 0;
  for (double target : map.cfs()) {
    const double lt = std::log(target);
    // Section CFs decrease, targets decrease: advance monotonically.
    while (s + 1 < section_cfs.size() &&
           std::abs(std::log(section_cfs[s + 1]) - lt) <= std::abs(std::log(section_cfs[s]) - lt))
      ++s;
    if (!out.empty() && out.back() >= s)
      throw DataError("tl_select_sections: two channels map to section " + std::to_string(s));
    out.push_back(s);
  }
  return out;
}

SectionTrace tl_select_channels(const SectionTrace& full, std::span<const double> section_cfs,
                                const CochlearMap& map) {
  if (full.sections.size() != section_cfs.size())
    throw DataError("tl_select_channels: trace does not hold every section");
  const auto picks = tl_select_sections(section_cfs, map);
  SectionTrace out;
  out.length = full.length;
  out.rate = full.rate;
  out.sections = picks;
  out.data.reserve(picks.size() * full.length);
  for (std::size_t s : picks) {
    const auto row = full.section(s);
    out.data.insert(out.data.end(), row.begin(), row.end());
  }
  return out;
}

TLModel::TLModel(TLModelParams params) : params_(std::move(params)) {
  params_.validate();
  const std::size_t n = params_.n_sections;
  const double x_base = greenwood_position(params_.f_base_hz);
  const double x_apex = greenwood_position(params_.f_apex_hz);
  const double step = (x_base - x_apex) / static_cast<double>(n - 1);
  const double dx = params_.cochlear_length_m * step;

  section_cf_.resize(n);
  stiffness_.resize(n);
  damping_pole_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    section_cf_[i] = greenwood_frequency(x_base - step * static_cast<double>(i));
    const double w = 2.0 * std::numbers::pi * section_cf_[i];
    stiffness_[i] = params_.bm_mass * w * w;
    damping_pole_[i] = params_.bm_mass * w / params_.q_pole;
  }
  section_cf_.front() = params_.f_base_hz;
  section_cf_.back() = params_.f_apex_hz;

  // p[i-1] - (2 + coupling) p[i] + p[i+1] = -coupling * g[i], with
  // p[-1] = oval-window pressure and p[n] = 0 at the helicotrema.
  coupling_ = 2.0 * params_.fluid_density * dx * dx / (params_.scala_height_m * params_.bm_mass);
  const double diag = -(2.0 + coupling_);
  thomas_w_.resize(n);
  thomas_c_.resize(n);
  double c_prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    thomas_w_[i] = 1.0 / (diag - c_prev);
    thomas_c_[i] = thomas_w_[i];
    c_prev = thomas_c_[i];
  }

  output_map_ = greenwood_map(params_.output_channels, params_.output_f_min_hz, params_.output_f_max_hz);
  output_sections_ = tl_select_sections(section_cf_, output_map_);

  const double f0 = std::sqrt(params_.middle_ear_low_hz * params_.middle_ear_high_hz);
  const double q = f0 / (params_.middle_ear_high_hz - params_.middle_ear_low_hz);
  const double w0 = 2.0 * std::numbers::pi * f0 / params_.solver_rate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  me_b0_ = alpha / a0;
  me_b2_ = -alpha / a0;
  me_a1_ = -2.0 * std::cos(w0) / a0;
  me_a2_ = (1.0 - alpha) / a0;
}

std::vector<double> TLModel::middle_ear(std::span<const double> pressure_pa) const {
  std::vector<double> out(pressure_pa.size());
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (std::size_t i = 0; i < pressure_pa.size(); ++i) {
    const double x0 = pressure_pa[i];
    const double y0 = me_b0_ * x0 + me_b2_ * x2 - me_a1_ * y1 - me_a2_ * y2;
    x2 = x1;
    x1 = x0;
    y2 = y1;
    y1 = y0;
    out[i] = params_.middle_ear_gain * y0;
  }
  return out;
}

void TLModel::derivative(const double* y, const double* v, double boundary_pa, double* acceleration,
                         double* scratch) const {
  const std::size_t n = params_.n_sections;
  const double g = params_.undamping;
  const double inv_sat2 = 1.0 / (params_.x_sat_m * params_.x_sat_m);
  const double* s = stiffness_.data();
  const double* d = damping_pole_.data();
  double* force = acceleration;  // reused: restoring + damping force per area
  if (params_.nonlinear) {
    for (std::size_t i = 0; i < n; ++i) {
      const double damp = d[i] * (1.0 - g / (1.0 + y[i] * y[i] * inv_sat2));
      force[i] = damp * v[i] + s[i] * y[i];
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) force[i] = d[i] * (1.0 - g) * v[i] + s[i] * y[i];
  }

  // Thomas forward sweep (unit off-diagonals), then back substitution.
  double* p = scratch;
  const double* w = thomas_w_.data();
  const double* c = thomas_c_.data();
  double prev = boundary_pa;
  for (std::size_t i = 0; i < n; ++i) {
    prev = (-coupling_ * force[i] - prev) * w[i];
    p[i] = prev;
  }
  for (std::size_t i = n - 1; i-- > 0;) p[i] -= c[i] * p[i + 1];

  const double inv_m = 1.0 / params_.bm_mass;
  for (std::size_t i = 0; i < n; ++i) acceleration[i] = (p[i] - force[i]) * inv_m;
}

SectionTrace TLModel::simulate_sections(std::span<const double> pressure_pa,
                                        std::span<const std::size_t> sections) const {
  const std::size_t n = params_.n_sections;
  for (std::size_t s : sections)
    if (s >= n) throw UsageError("simulate_sections: section index out of range");

  const std::vector<double> drive = middle_ear(pressure_pa);
  const std::size_t steps = drive.size();
  const double dt = 1.0 / params_.solver_rate;

  SectionTrace trace;
  trace.sections.assign(sections.begin(), sections.end());
  trace.length = steps;
  trace.rate = params_.solver_rate;
  trace.data.assign(sections.size() * steps, 0.0);

  TLState state(n);
  std::vector<double> y2(n), v2(n), y3(n), v3(n), y4(n), v4(n);
  std::vector<double> a1(n), a2(n), a3(n), a4(n), scratch(n);
  double* y = state.displacement.data();
  double* v = state.velocity.data();

  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t j = 0; j < sections.size(); ++j) trace.data[j * steps + k] = y[sections[j]];

    const double p0 = drive[k];
    const double p1 = k + 1 < steps ? drive[k + 1] : 0.0;
    const double pm = 0.5 * (p0 + p1);

    derivative(y, v, p0, a1.data(), scratch.data());
    for (std::size_t i = 0; i < n; ++i) {
      y2[i] = y[i] + 0.5 * dt * v[i];
      v2[i] = v[i] + 0.5 * dt * a1[i];
    }
    derivative(y2.data(), v2.data(), pm, a2.data(), scratch.data());
    for (std::size_t i = 0; i < n; ++i) {
      y3[i] = y[i] + 0.5 * dt * v2[i];
      v3[i] = v[i] + 0.5 * dt * a2[i];
    }
    derivative(y3.data(), v3.data(), pm, a3.data(), scratch.data());
    for (std::size_t i = 0; i < n; ++i) {
      y4[i] = y[i] + dt * v3[i];
      v4[i] = v[i] + dt * a3[i];
    }
    derivative(y4.data(), v4.data(), p1, a4.data(), scratch.data());

    double worst = 0.0;
    std::size_t worst_i = 0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] += dt / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
      v[i] += dt / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
      const double mag = std::abs(y[i]);
      if (!(mag <= worst)) {
        worst = mag;
        worst_i = i;
      }
    }
    ++state.step;
    if (!(worst <= params_.divergence_limit_m)) {
      std::ostringstream msg;
      msg << "TL model diverged at section " << worst_i << " (CF " << section_cf_[worst_i]
          << " Hz) at t = " << static_cast<double>(state.step) * dt * 1e3 << " ms";
      throw NumericalError(msg.str());
    }
  }
  return trace;
}

BMResponse TLModel::simulate(const Stimulus& stimulus) const {
  if (stimulus.samples.empty()) throw DataError("tl_simulate: empty stimulus");
  for (double v : stimulus.samples)
    if (!std::isfinite(v)) throw DataError("tl_simulate: non-finite stimulus sample");

  const std::vector<double> at_solver =
      resample(stimulus.samples, stimulus.rate, params_.solver_rate);
  const SectionTrace trace = simulate_sections(at_solver, output_sections_);

  const Resampler down(params_.solver_rate, params_.output_rate);
  const std::size_t out_len = down.output_length(trace.length);
  BMResponse out(out_len, output_map_, params_.output_rate);
  for (std::size_t c = 0; c < output_sections_.size(); ++c) {
    const auto ch = down.apply(trace.section(c));
    for (std::size_t t = 0; t < out_len; ++t)
      out.at(t, c) = static_cast<float>(ch[t] * kMetresToMicrometres);
  }
  return out;
}

BMResponse tl_simulate(const Stimulus& stimulus, const TLModelParams& params) {
  return TLModel(params).simulate(stimulus);
}

}  // namespace connear
