#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "connear/bm_response.hpp"
#include "connear/cochlear_map.hpp"
#include "connear/stimulus.hpp"
#include "connear/windowing.hpp"

namespace connear {

enum class Activation : std::uint32_t { kTanh = 0, kPReLU = 1 };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

// Hyperparameters of the encoder-decoder. `n_layers` counts encoder and
// decoder layers together.
struct ArchitectureSpec {
  std::size_t n_layers = 8;
  std::size_t filters = 128;
  std::size_t filter_length = 64;
  std::size_t stride = 2;
  Activation activation = Activation::kTanh;
  WindowGeometry window{2048, 256, 256};
  std::size_t n_cf = 201;

  std::size_t depth() const { return n_layers / 2; }
  std::size_t input_length() const { return window.total(); }
  bool has_context() const { return window.left != 0 || window.right != 0; }
  void validate() const;

  bool operator==(const ArchitectureSpec&) const = default;
};

enum class LayerKind { kConv, kTransposedConv };

struct LayerInfo {
  LayerKind kind = LayerKind::kConv;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t in_length = 0;
  std::size_t out_length = 0;
  bool activated = true;
  // Encoder layer whose output is appended (channel-wise) to this decoder
  // layer's input, or -1.
  std::ptrdiff_t skip_from = -1;
  std::size_t weight_offset = 0;  // [out][in][tap]
  std::size_t bias_offset = 0;
  std::size_t slope_offset = 0;   // PReLU only
  std::size_t slope_count = 0;

  std::size_t weight_count(std::size_t taps) const { return out_channels * in_channels * taps; }
  bool operator==(const LayerInfo&) const = default;
};

// Layer table: encoder layers first, then decoder layers.
std::vector<LayerInfo> plan_layers(const ArchitectureSpec& spec);
std::size_t parameter_count(const ArchitectureSpec& spec);

// Output channel map for `n_cf` channels between 100 Hz and 12 kHz.
CochlearMap surrogate_output_map(std::size_t n_cf);

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Activations recorded by a forward pass for the backward pass.
template <typename T>
struct Tape {
  std::vector<Mat<T>> inputs;       // layer inputs after concatenation
  std::vector<Mat<T>> pre;          // pre-activation outputs
  std::vector<Mat<T>> outputs;      // post-activation outputs
};

// Encoder-decoder with U-shaped skip connections. Parameters live in one flat
// buffer in declared layer order: per layer weights, biases, PReLU slopes.
template <typename T>
class Network {
 public:
  Network() = default;
  explicit Network(ArchitectureSpec spec);

  const ArchitectureSpec& spec() const { return spec_; }
  const std::vector<LayerInfo>& layers() const { return layers_; }
  std::span<T> parameters() { return params_; }
  std::span<const T> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  // Maps one input window (Pa, length spec.input_length()) to a channel-major
  // n_cf x core output in micrometres; the context is cropped.
  Mat<T> forward(std::span<const T> window, Tape<T>* tape = nullptr) const;

  // Accumulates d(loss)/d(parameters) into `grad` given d(loss)/d(output)
  // for the pass recorded in `tape`.
  void backward(const Tape<T>& tape, const Mat<T>& d_output, std::span<T> grad) const;

  template <typename U>
  Network<U> cast() const {
    Network<U> out(spec_);
    auto dst = out.parameters();
    for (std::size_t i = 0; i < params_.size(); ++i) dst[i] = static_cast<U>(params_[i]);
    return out;
  }

  bool operator==(const Network&) const = default;

 private:
  ArchitectureSpec spec_;
  std::vector<LayerInfo> layers_;
  std::vector<T> params_;
};

using SurrogateModel = Network<float>;

// Seeded uniform +-sqrt(1/fan_in) weights, zero biases, PReLU slopes 0.25.
SurrogateModel build_model(const ArchitectureSpec& spec, std::uint64_t seed);

// One window (length spec.input_length(), Pa) to an L x n_cf response.
BMResponse forward(const SurrogateModel& model, std::span<const double> window);

// Windowing with context, per-window inference, concatenated cores. Audio
// must already be at the model rate (20 kHz).
BMResponse process_stream(const SurrogateModel& model, const Stimulus& audio);

// Like process_stream but the window cores tile [begin, begin + count) of
// `audio`; samples before `begin` serve as true left context.
BMResponse process_range(const SurrogateModel& model, const Stimulus& audio, std::size_t begin,
                         std::size_t count);

// Mean |first difference| across each window boundary divided by the mean
// |first difference| inside windows; 1 means no discontinuity.
std::vector<double> boundary_discontinuity(const BMResponse& response, std::size_t core_length);

}  // namespace connear
