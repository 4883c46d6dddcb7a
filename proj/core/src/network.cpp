#include <algorithm>
#include <utility>
#include <cmath>
#include <random>

#include "connear/error.hpp"
#include "connear/surrogate.hpp"

namespace connear {

namespace {

std::ptrdiff_t floor_div(std::ptrdiff_t a, std::ptrdiff_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

// Geometry of a "same"-padded strided convolution.
struct StridedGeometry {
  std::size_t taps, stride, out_len;
  std::ptrdiff_t pad_left;
};

StridedGeometry strided_geometry(std::size_t taps, std::size_t stride, std::size_t in_len) {
  const std::size_t out_len = in_len / stride;
  const auto needed = static_cast<std::ptrdiff_t>((out_len - 1) * stride + taps) -
                      static_cast<std::ptrdiff_t>(in_len);
  return {taps, stride, out_len, std::max<std::ptrdiff_t>(needed, 0) / 2};
}

// Transposed convolution as zero insertion followed by a "same" stride-1
// convolution, rewritten polyphase: output sample stride*j + r only sees
// input samples j + o for offsets o in [o_min, o_min + n_off).
struct TransposedGeometry {
  std::size_t taps, stride;
  std::ptrdiff_t pad_left, o_min;
  std::size_t n_off;

  // Tap feeding phase r from offset o, or -1.
  std::ptrdiff_t tap(std::size_t r, std::ptrdiff_t o) const {
    const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(stride) * o + pad_left - static_cast<std::ptrdiff_t>(r);
    return (k >= 0 && k < static_cast<std::ptrdiff_t>(taps)) ? k : -1;
  }
};

TransposedGeometry transposed_geometry(std::size_t taps, std::size_t stride) {
  const auto pl = static_cast<std::ptrdiff_t>((taps - 1) / 2);
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const std::ptrdiff_t o_min = -floor_div(pl, s);
  const std::ptrdiff_t o_max = floor_div(s - 1 + static_cast<std::ptrdiff_t>(taps) - 1 - pl, s);
  return {taps, stride, pl, o_min, static_cast<std::size_t>(o_max - o_min + 1)};
}

// Output positions t with 0 <= stride*t + shift < n, as [first, last).
std::pair<std::size_t, std::size_t> valid_range(std::ptrdiff_t shift, std::size_t stride, std::size_t n,
                                                std::size_t out_len) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  std::ptrdiff_t first = shift >= 0 ? 0 : (-shift + s - 1) / s;
  std::ptrdiff_t last = (static_cast<std::ptrdiff_t>(n) - 1 - shift);
  last = last < 0 ? 0 : last / s + 1;
  first = std::min<std::ptrdiff_t>(first, static_cast<std::ptrdiff_t>(out_len));
  last = std::clamp<std::ptrdiff_t>(last, first, static_cast<std::ptrdiff_t>(out_len));
  return {static_cast<std::size_t>(first), static_cast<std::size_t>(last)};
}

template <typename T>
void im2col_strided(const Mat<T>& x, const StridedGeometry& g, Mat<T>& col) {
  const auto cin = static_cast<std::size_t>(x.rows());
  const auto tin = static_cast<std::size_t>(x.cols());
  col.resize(static_cast<Eigen::Index>(cin * g.taps), static_cast<Eigen::Index>(g.out_len));
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const T* src = x.row(static_cast<Eigen::Index>(ci)).data();
    for (std::size_t k = 0; k < g.taps; ++k) {
      T* dst = col.row(static_cast<Eigen::Index>(ci * g.taps + k)).data();
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - g.pad_left;
      const auto [first, last] = valid_range(shift, g.stride, tin, g.out_len);
      std::fill(dst, dst + first, T(0));
      const T* base = src + shift;
      for (std::size_t t = first; t < last; ++t) dst[t] = base[g.stride * t];
      std::fill(dst + last, dst + g.out_len, T(0));
    }
  }
}

template <typename T>
void col2im_strided(const Mat<T>& dcol, const StridedGeometry& g, Mat<T>& dx) {
  const auto cin = static_cast<std::size_t>(dx.rows());
  const auto tin = static_cast<std::size_t>(dx.cols());
  for (std::size_t ci = 0; ci < cin; ++ci) {
    T* dst = dx.row(static_cast<Eigen::Index>(ci)).data();
    for (std::size_t k = 0; k < g.taps; ++k) {
      const T* src = dcol.row(static_cast<Eigen::Index>(ci * g.taps + k)).data();
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - g.pad_left;
      const auto [first, last] = valid_range(shift, g.stride, tin, g.out_len);
      T* base = dst + shift;
      for (std::size_t t = first; t < last; ++t) base[g.stride * t] += src[t];
    }
  }
}

template <typename T>
void im2col_offsets(const Mat<T>& x, const TransposedGeometry& g, Mat<T>& col) {
  const auto cin = static_cast<std::size_t>(x.rows());
  const auto tin = static_cast<std::size_t>(x.cols());
  col.resize(static_cast<Eigen::Index>(cin * g.n_off), x.cols());
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const T* src = x.row(static_cast<Eigen::Index>(ci)).data();
    for (std::size_t oo = 0; oo < g.n_off; ++oo) {
      T* dst = col.row(static_cast<Eigen::Index>(ci * g.n_off + oo)).data();
      const std::ptrdiff_t o = g.o_min + static_cast<std::ptrdiff_t>(oo);
      const auto [first, last] = valid_range(o, 1, tin, tin);
      std::fill(dst, dst + first, T(0));
      std::copy(src + first + o, src + last + o, dst + first);
      std::fill(dst + last, dst + tin, T(0));
    }
  }
}

template <typename T>
void col2im_offsets(const Mat<T>& dcol, const TransposedGeometry& g, Mat<T>& dx) {
  const auto cin = static_cast<std::size_t>(dx.rows());
  const auto tin = static_cast<std::size_t>(dx.cols());
  for (std::size_t ci = 0; ci < cin; ++ci) {
    T* dst = dx.row(static_cast<Eigen::Index>(ci)).data();
    for (std::size_t oo = 0; oo < g.n_off; ++oo) {
      const T* src = dcol.row(static_cast<Eigen::Index>(ci * g.n_off + oo)).data();
      const std::ptrdiff_t o = g.o_min + static_cast<std::ptrdiff_t>(oo);
      const auto [first, last] = valid_range(o, 1, tin, tin);
      for (std::size_t j = first; j < last; ++j) dst[j + o] += src[j];
    }
  }
}

// Phase-stacked weights: row r*C_out + co, column ci*n_off + (o - o_min).
template <typename T>
Mat<T> stack_phases(const T* w, const LayerInfo& layer, const TransposedGeometry& g) {
  const std::size_t cout = layer.out_channels, cin = layer.in_channels;
  Mat<T> stacked = Mat<T>::Zero(static_cast<Eigen::Index>(g.stride * cout),
                                static_cast<Eigen::Index>(cin * g.n_off));
  for (std::size_t r = 0; r < g.stride; ++r)
    for (std::size_t co = 0; co < cout; ++co) {
      T* row = stacked.row(static_cast<Eigen::Index>(r * cout + co)).data();
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const T* taps = w + (co * cin + ci) * g.taps;
        T* dst = row + ci * g.n_off;
        for (std::size_t oo = 0; oo < g.n_off; ++oo) {
          const std::ptrdiff_t k = g.tap(r, g.o_min + static_cast<std::ptrdiff_t>(oo));
          if (k >= 0) dst[oo] = taps[k];
        }
      }
    }
  return stacked;
}

template <typename T>
void unstack_phase_grads(const Mat<T>& d_stacked, const LayerInfo& layer, const TransposedGeometry& g,
                         T* dw) {
  const std::size_t cout = layer.out_channels, cin = layer.in_channels;
  for (std::size_t r = 0; r < g.stride; ++r)
    for (std::size_t co = 0; co < cout; ++co) {
      const T* row = d_stacked.row(static_cast<Eigen::Index>(r * cout + co)).data();
      for (std::size_t ci = 0; ci < cin; ++ci) {
        T* taps = dw + (co * cin + ci) * g.taps;
        const T* src = row + ci * g.n_off;
        for (std::size_t oo = 0; oo < g.n_off; ++oo) {
          const std::ptrdiff_t k = g.tap(r, g.o_min + static_cast<std::ptrdiff_t>(oo));
          if (k >= 0) taps[k] += src[oo];
        }
      }
    }
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "prelu"; }

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "prelu" || name == "PReLU") return Activation::kPReLU;
  throw UsageError("unknown activation '" + name + "' (expected tanh or prelu)");
}

void ArchitectureSpec::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw UsageError("architecture: " + what);
  };
  require(n_layers >= 2 && n_layers % 2 == 0, "layer count must be even and at least 2");
  require(filters >= 1, "need at least one filter per layer");
  require(filter_length >= 1, "filter length must be positive");
  require(stride >= 1, "stride must be positive");
  require(n_cf >= 1, "need at least one output channel");
  require(window.core >= 1, "core length must be positive");
  std::size_t factor = 1;
  for (std::size_t i = 0; i < depth(); ++i) factor *= stride;
  require(window.core % factor == 0, "core length must be divisible by stride^(layers/2)");
  require(input_length() % factor == 0, "window length must be divisible by stride^(layers/2)");
}

std::vector<LayerInfo> plan_layers(const ArchitectureSpec& spec) {
  spec.validate();
  const std::size_t depth = spec.depth();
  const std::size_t k = spec.filters;
  const std::size_t taps = spec.filter_length;
  std::vector<LayerInfo> layers;
  std::size_t offset = 0;
  auto place = [&](LayerInfo& l) {
    l.weight_offset = offset;
    offset += l.weight_count(taps);
    l.bias_offset = offset;
    offset += l.out_channels;
    if (l.activated && spec.activation == Activation::kPReLU) {
      l.slope_offset = offset;
      l.slope_count = l.out_channels;
      offset += l.out_channels;
    }
  };

  std::size_t len = spec.input_length();
  for (std::size_t j = 0; j < depth; ++j) {
    LayerInfo l;
    l.kind = LayerKind::kConv;
    l.in_channels = j == 0 ? 1 : k;
    l.out_channels = k;
    l.in_length = len;
    l.out_length = len / spec.stride;
    len = l.out_length;
    place(l);
    layers.push_back(l);
  }
  for (std::size_t d = 0; d < depth; ++d) {
    LayerInfo l;
    l.kind = LayerKind::kTransposedConv;
    l.skip_from = d == 0 ? -1 : static_cast<std::ptrdiff_t>(depth - 1 - d);
    l.in_channels = d == 0 ? k : 2 * k;
    l.activated = d + 1 != depth;
    l.out_channels = l.activated ? k : spec.n_cf;
    l.in_length = len;
    l.out_length = len * spec.stride;
    len = l.out_length;
    place(l);
    layers.push_back(l);
  }
  return layers;
}

std::size_t parameter_count(const ArchitectureSpec& spec) {
  const auto layers = plan_layers(spec);
  const auto& last = layers.back();
  return last.slope_count ? last.slope_offset + last.slope_count
                          : last.bias_offset + last.out_channels;
}

CochlearMap surrogate_output_map(std::size_t n_cf) {
  if (n_cf == 201) return default_output_map();
  if (n_cf == 1) return CochlearMap({12000.0});
  return greenwood_map(n_cf, 100.0, 12000.0);
}

template <typename T>
Network<T>::Network(ArchitectureSpec spec)
    : spec_(spec), layers_(plan_layers(spec_)), params_(connear::parameter_count(spec_), T(0)) {}

template <typename T>
Mat<T> Network<T>::forward(std::span<const T> window, Tape<T>* tape) const {
  if (window.size() != spec_.input_length())
    throw UsageError("surrogate forward: window has " + std::to_string(window.size()) +
                     " samples, expected " + std::to_string(spec_.input_length()));
  const std::size_t n = layers_.size();
  const std::size_t depth = spec_.depth();
  const std::size_t taps = spec_.filter_length;
  std::vector<Mat<T>> outs(n);
  Tape<T> local;
  Tape<T>& tp = tape ? *tape : local;
  tp.inputs.assign(n, Mat<T>());
  tp.pre.assign(n, Mat<T>());

  Mat<T> col;
  for (std::size_t l = 0; l < n; ++l) {
    const LayerInfo& layer = layers_[l];
    Mat<T> input;
    if (l == 0) {
      input = Eigen::Map<const Mat<T>>(window.data(), 1, static_cast<Eigen::Index>(window.size()));
    } else if (layer.skip_from < 0) {
      input = outs[l - 1];
    } else {
      const Mat<T>& skip = outs[static_cast<std::size_t>(layer.skip_from)];
      input.resize(outs[l - 1].rows() + skip.rows(), skip.cols());
      input.topRows(outs[l - 1].rows()) = outs[l - 1];
      input.bottomRows(skip.rows()) = skip;
    }

    const T* w = params_.data() + layer.weight_offset;
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(params_.data() + layer.bias_offset,
                                                               static_cast<Eigen::Index>(layer.out_channels));
    Mat<T> z;
    if (layer.kind == LayerKind::kConv) {
      const auto g = strided_geometry(taps, spec_.stride, layer.in_length);
      im2col_strided(input, g, col);
      Eigen::Map<const Mat<T>> wm(w, static_cast<Eigen::Index>(layer.out_channels),
                                  static_cast<Eigen::Index>(layer.in_channels * taps));
      z.noalias() = wm * col;
    } else {
      const auto g = transposed_geometry(taps, spec_.stride);
      im2col_offsets(input, g, col);
      const Mat<T> stacked = stack_phases(w, layer, g);
      const Mat<T> zs = stacked * col;
      z.resize(static_cast<Eigen::Index>(layer.out_channels), static_cast<Eigen::Index>(layer.out_length));
      const auto cout = static_cast<Eigen::Index>(layer.out_channels);
      for (Eigen::Index co = 0; co < cout; ++co) {
        T* dst = z.row(co).data();
        for (std::size_t r = 0; r < spec_.stride; ++r) {
          const T* src = zs.row(static_cast<Eigen::Index>(r) * cout + co).data();
          for (std::size_t j = 0; j < layer.in_length; ++j) dst[j * spec_.stride + r] = src[j];
        }
      }
    }
    z.colwise() += bias;

    Mat<T> y;
    if (!layer.activated) {
      y = z;
    } else if (spec_.activation == Activation::kTanh) {
      y = z.array().tanh();
    } else {
      y = z;
      const T* slopes = params_.data() + layer.slope_offset;
      for (Eigen::Index c = 0; c < y.rows(); ++c) {
        const T a = slopes[c];
        T* row = y.row(c).data();
        for (Eigen::Index t = 0; t < y.cols(); ++t)
          if (row[t] < T(0)) row[t] *= a;
      }
    }
    tp.inputs[l] = std::move(input);
    tp.pre[l] = std::move(z);
    outs[l] = std::move(y);
  }
  (void)depth;

  const Mat<T>& full = outs.back();
  Mat<T> cropped = full.middleCols(static_cast<Eigen::Index>(spec_.window.left),
                                   static_cast<Eigen::Index>(spec_.window.core));
  tp.outputs = std::move(outs);
  return cropped;
}

template <typename T>
void Network<T>::backward(const Tape<T>& tape, const Mat<T>& d_output, std::span<T> grad) const {
  const std::size_t n = layers_.size();
  if (grad.size() != params_.size()) throw UsageError("backward: gradient buffer has the wrong size");
  if (tape.outputs.size() != n) throw UsageError("backward: tape does not match the network");
  if (d_output.rows() != static_cast<Eigen::Index>(spec_.n_cf) ||
      d_output.cols() != static_cast<Eigen::Index>(spec_.window.core))
    throw UsageError("backward: output gradient has the wrong shape");

  const std::size_t taps = spec_.filter_length;
  std::vector<Mat<T>> d_out(n);
  for (std::size_t l = 0; l < n; ++l) d_out[l] = Mat<T>::Zero(tape.outputs[l].rows(), tape.outputs[l].cols());
  d_out.back().middleCols(static_cast<Eigen::Index>(spec_.window.left),
                          static_cast<Eigen::Index>(spec_.window.core)) = d_output;

  Mat<T> col, dcol;
  for (std::size_t l = n; l-- > 0;) {
    const LayerInfo& layer = layers_[l];
    Mat<T> dz;
    if (!layer.activated) {
      dz = d_out[l];
    } else if (spec_.activation == Activation::kTanh) {
      dz = d_out[l].array() * (T(1) - tape.outputs[l].array().square());
    } else {
      dz = d_out[l];
      const T* slopes = params_.data() + layer.slope_offset;
      T* d_slopes = grad.data() + layer.slope_offset;
      const Mat<T>& z = tape.pre[l];
      for (Eigen::Index c = 0; c < dz.rows(); ++c) {
        T* row = dz.row(c).data();
        const T* zr = z.row(c).data();
        T acc = T(0);
        for (Eigen::Index t = 0; t < dz.cols(); ++t)
          if (zr[t] < T(0)) {
            acc += row[t] * zr[t];
            row[t] *= slopes[c];
          }
        d_slopes[c] += acc;
      }
    }

    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> d_bias(grad.data() + layer.bias_offset,
                                                           static_cast<Eigen::Index>(layer.out_channels));
    d_bias += dz.rowwise().sum();

    const T* w = params_.data() + layer.weight_offset;
    T* dw = grad.data() + layer.weight_offset;
    const Mat<T>& input = tape.inputs[l];
    const bool need_input_grad = l > 0;
    Mat<T> dx;
    if (need_input_grad) dx = Mat<T>::Zero(input.rows(), input.cols());

    if (layer.kind == LayerKind::kConv) {
      const auto g = strided_geometry(taps, spec_.stride, layer.in_length);
      im2col_strided(input, g, col);
      const auto rows = static_cast<Eigen::Index>(layer.out_channels);
      const auto cols = static_cast<Eigen::Index>(layer.in_channels * taps);
      Eigen::Map<Mat<T>> dwm(dw, rows, cols);
      dwm.noalias() += dz * col.transpose();
      if (need_input_grad) {
        Eigen::Map<const Mat<T>> wm(w, rows, cols);
        dcol.noalias() = wm.transpose() * dz;
        col2im_strided(dcol, g, dx);
      }
    } else {
      const auto g = transposed_geometry(taps, spec_.stride);
      im2col_offsets(input, g, col);
      const auto cout = static_cast<Eigen::Index>(layer.out_channels);
      Mat<T> dzs(static_cast<Eigen::Index>(spec_.stride) * cout, static_cast<Eigen::Index>(layer.in_length));
      for (Eigen::Index co = 0; co < cout; ++co) {
        const T* src = dz.row(co).data();
        for (std::size_t r = 0; r < spec_.stride; ++r) {
          T* dst = dzs.row(static_cast<Eigen::Index>(r) * cout + co).data();
          for (std::size_t j = 0; j < layer.in_length; ++j) dst[j] = src[j * spec_.stride + r];
        }
      }
      const Mat<T> d_stacked = dzs * col.transpose();
      unstack_phase_grads(d_stacked, layer, g, dw);
      if (need_input_grad) {
        const Mat<T> stacked = stack_phases(w, layer, g);
        dcol.noalias() = stacked.transpose() * dzs;
        col2im_offsets(dcol, g, dx);
      }
    }

    if (!need_input_grad) continue;
    if (layer.skip_from < 0) {
      d_out[l - 1] += dx;
    } else {
      const Eigen::Index prev_rows = d_out[l - 1].rows();
      d_out[l - 1] += dx.topRows(prev_rows);
      d_out[static_cast<std::size_t>(layer.skip_from)] += dx.bottomRows(dx.rows() - prev_rows);
    }
  }
}

template class Network<float>;
template class Network<double>;

SurrogateModel build_model(const ArchitectureSpec& spec, std::uint64_t seed) {
  SurrogateModel model(spec);
  std::mt19937_64 rng(seed);
  auto params = model.parameters();
  for (const LayerInfo& layer : model.layers()) {
    const double fan_in = static_cast<double>(layer.in_channels * spec.filter_length);
    const double bound = std::sqrt(1.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < layer.weight_count(spec.filter_length); ++i)
      params[layer.weight_offset + i] = static_cast<float>(dist(rng));
    for (std::size_t i = 0; i < layer.slope_count; ++i) params[layer.slope_offset + i] = 0.25f;
  }
  return model;
}

}  // namespace connear
