#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "connear/cochlear_map.hpp"

namespace connear {

// Basilar-membrane displacement in micrometres, time-major (length x n_cf).
struct BMResponse {
  std::size_t length = 0;
  std::vector<float> data;
  double rate = 20000.0;
  CochlearMap map;

  BMResponse() = default;
  BMResponse(std::size_t length, CochlearMap map, double rate = 20000.0);

  std::size_t n_cf() const { return map.n_cf(); }
  float& at(std::size_t t, std::size_t channel) { return data[t * n_cf() + channel]; }
  float at(std::size_t t, std::size_t channel) const { return data[t * n_cf() + channel]; }
  std::span<const float> row(std::size_t t) const {
    return std::span<const float>(data).subspan(t * n_cf(), n_cf());
  }

  std::vector<double> channel(std::size_t c) const;
  // Rows [begin, begin + count) as a new response.
  BMResponse slice(std::size_t begin, std::size_t count) const;
  // Largest absolute value; +inf if any sample is non-finite.
  double max_abs() const;
};

}  // namespace connear
