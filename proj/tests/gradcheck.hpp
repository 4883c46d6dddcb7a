#pragma once

// Finite-difference probes for the surrogate backward pass, shared by the
// unit tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "connear/surrogate.hpp"

namespace connear::gradcheck {

struct Probe {
  Network<double> net;
  std::vector<double> input;
  Mat<double> target;

  // 0.5 * |y - target|^2; optionally the sign pattern of every activated
  // pre-activation.
  double loss(std::vector<bool>* signs = nullptr) const {
    Tape<double> tape;
    const Mat<double> y = net.forward(input, &tape);
    if (signs) {
      signs->clear();
      for (std::size_t l = 0; l < tape.pre.size(); ++l)
        if (net.layers()[l].activated)
          for (Eigen::Index i = 0; i < tape.pre[l].size(); ++i) signs->push_back(tape.pre[l].data()[i] > 0.0);
    }
    return 0.5 * (y - target).squaredNorm();
  }

  std::vector<double> gradient() const {
    Tape<double> tape;
    const Mat<double> y = net.forward(input, &tape);
    std::vector<double> g(net.parameter_count(), 0.0);
    net.backward(tape, y - target, g);
    return g;
  }

  // Worst relative disagreement with central differences. A PReLU kink
  // crossed between the two evaluations makes the difference quotient
  // meaningless, so those components are counted in `skipped` instead.
  double worst_relative_error(std::size_t* skipped = nullptr, double h = 1e-3) {
    const std::vector<double> g = gradient();
    const bool kinked = net.spec().activation == Activation::kPReLU;
    double worst = 0.0;
    std::size_t skip = 0;
    auto p = net.parameters();
    std::vector<bool> signs_up, signs_down;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double p0 = p[i];
      p[i] = p0 + h;
      const double up = loss(&signs_up);
      p[i] = p0 - h;
      const double down = loss(&signs_down);
      p[i] = p0;
      if (kinked && signs_up != signs_down) {
        ++skip;
        continue;
      }
      const double fd = (up - down) / (2.0 * h);
      const double scale = std::max({std::abs(fd), std::abs(g[i]), 1e-6});
      worst = std::max(worst, std::abs(fd - g[i]) / scale);
    }
    if (skipped) *skipped += skip;
    return worst;
  }
};

// Weights at initialization scale, small random biases, slopes in (0.1, 1).
inline void randomize(Network<double>& net, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  const std::size_t taps = net.spec().filter_length;
  for (const LayerInfo& l : net.layers()) {
    const double bound = std::sqrt(1.0 / static_cast<double>(l.in_channels * taps));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < l.weight_count(taps); ++i) net.parameters()[l.weight_offset + i] = u(rng);
    for (std::size_t i = 0; i < l.out_channels; ++i) net.parameters()[l.bias_offset + i] = 0.1 * nd(rng);
    for (std::size_t i = 0; i < l.slope_count; ++i) net.parameters()[l.slope_offset + i] = 0.1 + 0.3 * std::abs(nd(rng));
  }
}

inline Probe random_probe(std::mt19937_64& rng, Activation act, bool context) {
  std::uniform_int_distribution<int> pick_depth(1, 3), pick_k(1, 3), pick_w(1, 5), pick_cf(1, 3), pick_mult(1, 2);
  ArchitectureSpec s;
  const std::size_t depth = static_cast<std::size_t>(pick_depth(rng));
  s.n_layers = 2 * depth;
  s.filters = static_cast<std::size_t>(pick_k(rng));
  s.filter_length = static_cast<std::size_t>(pick_w(rng));
  s.activation = act;
  s.n_cf = static_cast<std::size_t>(pick_cf(rng));
  const std::size_t unit = std::size_t{1} << depth;
  s.window.core = unit * static_cast<std::size_t>(pick_mult(rng));
  s.window.left = context ? unit : 0;
  s.window.right = context ? unit * static_cast<std::size_t>(pick_mult(rng)) : 0;

  Probe p{Network<double>(s), {}, {}};
  randomize(p.net, rng);
  std::normal_distribution<double> nd(0.0, 0.6);
  p.input.resize(s.input_length());
  for (double& v : p.input) v = nd(rng);
  p.target.resize(static_cast<Eigen::Index>(s.n_cf), static_cast<Eigen::Index>(s.window.core));
  for (Eigen::Index i = 0; i < p.target.size(); ++i) p.target.data()[i] = nd(rng);
  return p;
}

}  // namespace connear::gradcheck
