#include "connear/bm_response.hpp"

#include <cmath>

#include "connear/error.hpp"

namespace connear {

BMResponse::BMResponse(std::size_t length, CochlearMap map, double rate)
    : length(length), data(length * map.n_cf(), 0.0f), rate(rate), map(std::move(map)) {}

std::vector<double> BMResponse::channel(std::size_t c) const {
  std::vector<double> out(length);
  for (std::size_t t = 0; t < length; ++t) out[t] = at(t, c);
  return out;
}

BMResponse BMResponse::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > length) throw UsageError("BMResponse::slice out of range");
  BMResponse out(count, map, rate);
  std::copy(data.begin() + static_cast<std::ptrdiff_t>(begin * n_cf()),
            data.begin() + static_cast<std::ptrdiff_t>((begin + count) * n_cf()), out.data.begin());
  return out;
}

double BMResponse::max_abs() const {
  double m = 0.0;
  for (float v : data) {
    if (!std::isfinite(v)) return INFINITY;
    m = std::max(m, static_cast<double>(std::abs(v)));
  }
  return m;
}

}  // namespace connear
