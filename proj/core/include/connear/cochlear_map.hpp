#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace connear {

// Human Greenwood place-frequency constants: CF = A * (10^(a*x) - k), with x
// the relative distance from the apex (0) to the base (1).
struct GreenwoodConstants {
  double A = 165.4;
  double a = 2.1;
  double k = 0.88;
};

double greenwood_frequency(double position, const GreenwoodConstants& g = {});
double greenwood_position(double frequency_hz, const GreenwoodConstants& g = {});

// Ordered characteristic frequencies, channel 0 = highest CF (most basal).
class CochlearMap {
 public:
  CochlearMap() = default;
  explicit CochlearMap(std::vector<double> cfs);

  std::span<const double> cfs() const { return cfs_; }
  double cf(std::size_t channel) const { return cfs_[channel]; }
  std::size_t n_cf() const { return cfs_.size(); }

  // Channel whose CF is nearest to `frequency_hz` on a log axis.
  std::size_t nearest_channel(double frequency_hz) const;

  bool operator==(const CochlearMap&) const = default;

 private:
  std::vector<double> cfs_;
};

// `n_cf` channels between f_max (channel 0) and f_min (last channel), spaced
// uniformly in Greenwood position so both endpoints are exact.
CochlearMap greenwood_map(std::size_t n_cf, double f_min, double f_max,
                          const GreenwoodConstants& g = {});

// The 201-channel 100 Hz - 12 kHz output map used throughout.
CochlearMap default_output_map();

}  // namespace connear
