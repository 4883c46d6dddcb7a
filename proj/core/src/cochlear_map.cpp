#include "connear/cochlear_map.hpp"

#include <cmath>
#include <string>

#include "connear/error.hpp"

namespace connear {

double greenwood_frequency(double position, const GreenwoodConstants& g) {
  return g.A * (std::pow(10.0, g.a * position) - g.k);
}

double greenwood_position(double frequency_hz, const GreenwoodConstants& g) {
  return std::log10(frequency_hz / g.A + g.k) / g.a;
}

CochlearMap::CochlearMap(std::vector<double> cfs) : cfs_(std::move(cfs)) {
  for (std::size_t i = 0; i < cfs_.size(); ++i) {
    if (!(cfs_[i] > 0.0) || !std::isfinite(cfs_[i]))
      throw DataError("cochlear map: CF " + std::to_string(i) + " is not positive");
    if (i > 0 && !(cfs_[i] < cfs_[i - 1]))
      throw DataError("cochlear map: CFs must be strictly decreasing (channel " +
                      std::to_string(i) + ")");
  }
}

std::size_t CochlearMap::nearest_channel(double frequency_hz) const {
  const double target = std::log(frequency_hz);
  std::size_t best = 0;
  double best_dist = INFINITY;
  for (std::size_t i = 0; i < cfs_.size(); ++i) {
    const double d = std::abs(std::log(cfs_[i]) - target);
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return best;
}

CochlearMap greenwood_map(std::size_t n_cf, double f_min, double f_max,
                          const GreenwoodConstants& g) {
  if (n_cf < 2) throw UsageError("greenwood_map: need at least 2 channels");
  if (!(f_min > 0.0) || !(f_max > f_min))
    throw UsageError("greenwood_map: require 0 < f_min < f_max");

  const double x_hi = greenwood_position(f_max, g);
  const double x_lo = greenwood_position(f_min, g);
  std::vector<double> cfs(n_cf);
  const double step = (x_hi - x_lo) / static_cast<double>(n_cf - 1);
  for (std::size_t i = 0; i < n_cf; ++i)
    cfs[i] = greenwood_frequency(x_hi - step * static_cast<double>(i), g);
  // Pin the endpoints; the round trip through log10/pow is not exact.
  cfs.front() = f_max;
  cfs.back() = f_min;
  return CochlearMap(std::move(cfs));
}

CochlearMap default_output_map() { return greenwood_map(201, 100.0, 12000.0); }

}  // namespace connear
