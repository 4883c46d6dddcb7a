#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "connear/bm_response.hpp"
#include "connear/cochlear_map.hpp"
#include "connear/kv_config.hpp"
#include "connear/stimulus.hpp"

namespace connear {

// Physical constants of the transmission-line cochlea. Each section is a
// mass-spring-damper driven by the trans-partition pressure; sections couple
// through the incompressible fluid (long-wave approximation). Damping of a
// section is d_pole * (1 - undamping / (1 + (y / x_sat)^2)).
struct TLModelParams {
  static constexpr int kVersion = 1;

  std::size_t n_sections = 1000;
  double f_base_hz = 20000.0;
  double f_apex_hz = 25.0;
  double solver_rate = 100000.0;
  double output_rate = 20000.0;

  double cochlear_length_m = 0.035;
  double scala_height_m = 7e-4;
  double fluid_density = 1000.0;   // kg/m^3
  double bm_mass = 0.5;            // kg/m^2, identical for every section
  double q_pole = 4.0;             // passive quality factor of a section
  double undamping = 0.985;        // g in (0, 1)
  double x_sat_m = 7e-9;           // displacement where undamping halves
  bool nonlinear = true;           // false holds damping at its y = 0 value

  // Second-order band-pass middle ear, unity peak gain, followed by a scalar
  // ear-canal to oval-window pressure gain.
  double middle_ear_low_hz = 600.0;
  double middle_ear_high_hz = 4000.0;
  double middle_ear_gain = 100.0;

  std::size_t output_channels = 201;
  double output_f_min_hz = 100.0;
  double output_f_max_hz = 12000.0;

  double divergence_limit_m = 1e-3;

  void validate() const;

  KeyValueFile to_config() const;
  static TLModelParams from_config(const KeyValueFile& file);
  static TLModelParams load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

// Per-section state of the oracle at one solver step.
struct TLState {
  std::vector<double> displacement;  // m
  std::vector<double> velocity;      // m/s
  std::size_t step = 0;

  explicit TLState(std::size_t n_sections = 0)
      : displacement(n_sections, 0.0), velocity(n_sections, 0.0) {}
};

// Displacement of a subset of sections, section-major, at the solver rate.
struct SectionTrace {
  std::vector<std::size_t> sections;
  std::size_t length = 0;
  double rate = 0.0;
  std::vector<double> data;  // sections.size() x length, metres

  std::span<const double> section(std::size_t i) const {
    return std::span<const double>(data).subspan(i * length, length);
  }
};

// Immutable, precomputed transmission-line model. `simulate` is const and
// may run concurrently from many threads on one instance.
class TLModel {
 public:
  explicit TLModel(TLModelParams params = {});

  const TLModelParams& params() const { return params_; }
  std::span<const double> section_cfs() const { return section_cf_; }
  const CochlearMap& output_map() const { return output_map_; }
  std::span<const std::size_t> output_sections() const { return output_sections_; }

  // Full pipeline: resample to the solver rate, integrate, keep the output
  // channels, downsample to the output rate and convert to micrometres.
  BMResponse simulate(const Stimulus& stimulus) const;

  // Integrate a stimulus already at the solver rate and record `sections`.
  SectionTrace simulate_sections(std::span<const double> pressure_pa,
                                 std::span<const std::size_t> sections) const;

  // Middle-ear band-pass output (oval-window pressure, Pa) at solver rate.
  std::vector<double> middle_ear(std::span<const double> pressure_pa) const;

 private:
  void derivative(const double* y, const double* v, double boundary_pa, double* acceleration,
                  double* scratch) const;

  TLModelParams params_;
  std::vector<double> section_cf_;
  std::vector<double> stiffness_;
  std::vector<double> damping_pole_;
  double coupling_ = 0.0;                // 2 rho dx^2 / (h m)
  std::vector<double> thomas_w_;         // 1 / pivot
  std::vector<double> thomas_c_;         // modified super-diagonal
  CochlearMap output_map_;
  std::vector<std::size_t> output_sections_;
  double me_b0_ = 0, me_b2_ = 0, me_a1_ = 0, me_a2_ = 0;
};

// For every target CF, the section with the nearest CF on a log axis. Throws
// if the sections do not bracket the targets or two targets share a section.
std::vector<std::size_t> tl_select_sections(std::span<const double> section_cfs,
                                            const CochlearMap& map);

// Pick the rows of `full` (all sections) belonging to `map`.
SectionTrace tl_select_channels(const SectionTrace& full, std::span<const double> section_cfs,
                                const CochlearMap& map);

BMResponse tl_simulate(const Stimulus& stimulus, const TLModelParams& params = {});

}  // namespace connear
