#include <algorithm>
#include <cmath>
#include <limits>

#include "connear/error.hpp"
#include "connear/surrogate.hpp"

namespace connear {

namespace {

void write_core(const Mat<float>& out, std::size_t rows, std::size_t offset, BMResponse& response) {
  const std::size_t n_cf = response.n_cf();
  for (std::size_t t = 0; t < rows; ++t) {
    float* dst = response.data.data() + (offset + t) * n_cf;
    for (std::size_t c = 0; c < n_cf; ++c)
      dst[c] = out(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t));
  }
}

}  // namespace

BMResponse forward(const SurrogateModel& model, std::span<const double> window) {
  const ArchitectureSpec& spec = model.spec();
  std::vector<float> input(window.begin(), window.end());
  const Mat<float> out = model.forward(input);
  BMResponse response(spec.window.core, surrogate_output_map(spec.n_cf));
  write_core(out, spec.window.core, 0, response);
  return response;
}

BMResponse process_stream(const SurrogateModel& model, const Stimulus& audio) {
  return process_range(model, audio, 0, audio.size());
}

BMResponse process_range(const SurrogateModel& model, const Stimulus& audio, std::size_t begin,
                         std::size_t count) {
  const ArchitectureSpec& spec = model.spec();
  if (std::abs(audio.rate - 20000.0) > 1e-9)
    throw UsageError("process_stream: audio must be sampled at 20 kHz (got " +
                     std::to_string(audio.rate) + " Hz)");
  if (count == 0 || begin + count > audio.size())
    throw UsageError("process_range: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") is empty or exceeds the " + std::to_string(audio.size()) + "-sample input");
  const WindowGeometry& g = spec.window;
  const auto n = static_cast<std::ptrdiff_t>(audio.size());
  BMResponse response(count, surrogate_output_map(spec.n_cf));
  std::vector<float> input(spec.input_length());
  for (std::size_t offset = 0; offset < count; offset += g.core) {
    const auto first = static_cast<std::ptrdiff_t>(begin + offset) - static_cast<std::ptrdiff_t>(g.left);
    for (std::size_t i = 0; i < input.size(); ++i) {
      const auto src = first + static_cast<std::ptrdiff_t>(i);
      input[i] = src >= 0 && src < n ? static_cast<float>(audio.samples[static_cast<std::size_t>(src)]) : 0.0f;
    }
    const Mat<float> out = model.forward(input);
    write_core(out, std::min(g.core, count - offset), offset, response);
  }
  return response;
}

std::vector<double> boundary_discontinuity(const BMResponse& response, std::size_t core_length) {
  if (core_length == 0) throw UsageError("boundary_discontinuity: core length must be positive");
  if (response.length <= core_length)
    throw UsageError("boundary_discontinuity: response is not longer than one window");
  const std::size_t n_cf = response.n_cf();
  auto step = [&](std::size_t t) {
    double acc = 0.0;
    for (std::size_t c = 0; c < n_cf; ++c)
      acc += std::abs(static_cast<double>(response.at(t, c)) - response.at(t - 1, c));
    return acc / static_cast<double>(n_cf);
  };

  double within = 0.0;
  std::size_t n_within = 0;
  for (std::size_t t = 1; t < response.length; ++t) {
    if (t % core_length == 0) continue;
    within += step(t);
    ++n_within;
  }
  within = n_within ? within / static_cast<double>(n_within) : 0.0;

  std::vector<double> scores;
  for (std::size_t b = core_length; b < response.length; b += core_length) {
    const double across = step(b);
    if (within > 0.0) scores.push_back(across / within);
    else scores.push_back(across > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
  }
  return scores;
}

}  // namespace connear
