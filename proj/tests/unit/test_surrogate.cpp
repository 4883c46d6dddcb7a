#include <doctest.h>

#include <cmath>
#include <random>

#include "connear/error.hpp"
#include "connear/stimulus.hpp"
#include "connear/surrogate.hpp"
#include "connear/tl_model.hpp"

using namespace connear;

namespace {

// Closed-form count from the shape rules: M/2 conv layers (1 -> k, then
// k -> k), a bottleneck transposed conv k -> k, then transposed convs with a
// concatenated skip (2k inputs), the last one producing n_cf channels.
std::size_t expected_count(const ArchitectureSpec& s) {
  const std::size_t k = s.filters, w = s.filter_length, d = s.depth();
  const bool prelu = s.activation == Activation::kPReLU;
  auto layer = [&](std::size_t in, std::size_t out, bool act) { return in * out * w + out + (prelu && act ? out : 0); };
  std::size_t n = layer(1, k, true);
  for (std::size_t j = 1; j < d; ++j) n += layer(k, k, true);
  const bool single = d == 1;
  n += layer(k, single ? s.n_cf : k, !single);
  for (std::size_t j = 1; j < d; ++j) n += layer(2 * k, j + 1 == d ? s.n_cf : k, j + 1 != d);
  return n;
}

ArchitectureSpec tiny_spec(std::size_t layers, Activation act, bool context) {
  ArchitectureSpec s;
  s.n_layers = layers;
  s.filters = 3;
  s.filter_length = 6;
  s.activation = act;
  s.window = {64, context ? 16u : 0u, context ? 16u : 0u};
  s.n_cf = 4;
  return s;
}

std::vector<float> random_input(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> nd(0.0f, 0.1f);
  std::vector<float> x(n);
  for (float& v : x) v = nd(rng);
  return x;
}

}  // namespace

TEST_SUITE("surrogate") {

TEST_CASE("default architecture parameter count") {
  ArchitectureSpec s;
  const std::size_t n = parameter_count(s);
  CHECK(n == expected_count(s));
  CHECK(n == 11691081);
  CHECK(std::abs(static_cast<double>(n) - 11689984.0) / 11689984.0 < 0.01);
  // Convolutions are length-agnostic, so dropping the context changes nothing.
  s.window.left = s.window.right = 0;
  CHECK(parameter_count(s) == n);
}

TEST_CASE("smallest spec has four parameters") {
  ArchitectureSpec s;
  s.n_layers = 2;
  s.filters = 1;
  s.filter_length = 1;
  s.n_cf = 1;
  // conv 1->1 (weight + bias), transposed conv 1->1 (weight + bias)
  CHECK(parameter_count(s) == 4);
  s.activation = Activation::kPReLU;
  CHECK(parameter_count(s) == 5);  // one slope on the hidden layer
}

TEST_CASE("parameter count follows the shape rules across variants") {
  for (std::size_t m : {2u, 4u, 6u, 8u})
    for (std::size_t k : {1u, 4u, 32u})
      for (Activation a : {Activation::kTanh, Activation::kPReLU}) {
        ArchitectureSpec s;
        s.n_layers = m;
        s.filters = k;
        s.activation = a;
        CAPTURE(m);
        CAPTURE(k);
        CHECK(parameter_count(s) == expected_count(s));
      }
}

TEST_CASE("lengths halve through the encoder and double back through the decoder") {
  for (std::size_t m : {4u, 6u, 8u}) {
    ArchitectureSpec s;
    s.n_layers = m;
    const auto layers = plan_layers(s);
    REQUIRE(layers.size() == m);
    const std::size_t d = s.depth();
    for (std::size_t j = 0; j < d; ++j) CHECK(layers[j].out_length == s.input_length() >> (j + 1));
    for (std::size_t j = 0; j < d; ++j) CHECK(layers[d + j].out_length == s.input_length() >> (d - j - 1));
    for (std::size_t j = 1; j < d; ++j) {
      CHECK(layers[d + j].skip_from == static_cast<std::ptrdiff_t>(d - 1 - j));
      CHECK(layers[d + j].in_channels == 2 * s.filters);
    }
    CHECK(layers[d].skip_from == -1);
    CHECK_FALSE(layers.back().activated);
    CHECK(layers.back().out_channels == s.n_cf);
  }
}

TEST_CASE("inconsistent specs are rejected") {
  ArchitectureSpec s;
  s.n_layers = 7;
  CHECK_THROWS_AS(build_model(s, 1), UsageError);
  s = {};
  s.window.core = 2047;
  CHECK_THROWS_AS(build_model(s, 1), UsageError);
  s = {};
  s.filter_length = 0;
  CHECK_THROWS_AS(build_model(s, 1), UsageError);
  s = {};
  s.window.left = 3;
  CHECK_THROWS_AS(build_model(s, 1), UsageError);
}

TEST_CASE("initialization is seeded and bounded by fan-in") {
  const ArchitectureSpec s = tiny_spec(4, Activation::kPReLU, true);
  const SurrogateModel a = build_model(s, 3), b = build_model(s, 3), c = build_model(s, 4);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  for (const LayerInfo& l : a.layers()) {
    const double bound = std::sqrt(1.0 / static_cast<double>(l.in_channels * s.filter_length));
    for (std::size_t i = 0; i < l.weight_count(s.filter_length); ++i)
      CHECK(std::abs(a.parameters()[l.weight_offset + i]) <= bound);
    for (std::size_t i = 0; i < l.out_channels; ++i) CHECK(a.parameters()[l.bias_offset + i] == 0.0f);
    for (std::size_t i = 0; i < l.slope_count; ++i) CHECK(a.parameters()[l.slope_offset + i] == 0.25f);
  }
}

TEST_CASE("output shape is the core length whatever the context") {
  for (bool ctx : {false, true}) {
    const SurrogateModel m = build_model(tiny_spec(6, Activation::kTanh, ctx), 1);
    const Mat<float> y = m.forward(random_input(m.spec().input_length(), 2));
    CHECK(y.rows() == 4);
    CHECK(y.cols() == 64);
    CHECK_THROWS_AS(m.forward(random_input(m.spec().input_length() + 1, 2)), UsageError);
  }
}

TEST_CASE("zero input with zero biases gives zero output") {
  for (Activation a : {Activation::kTanh, Activation::kPReLU}) {
    const SurrogateModel m = build_model(tiny_spec(4, a, true), 9);
    const std::vector<float> zero(m.spec().input_length(), 0.0f);
    CHECK(m.forward(zero).cwiseAbs().maxCoeff() == 0.0f);
  }
}

TEST_CASE("tanh network with zero biases is odd") {
  const SurrogateModel m = build_model(tiny_spec(8, Activation::kTanh, true), 5);
  std::vector<float> x = random_input(m.spec().input_length(), 6);
  const Mat<float> y = m.forward(x);
  for (float& v : x) v = -v;
  const Mat<float> z = m.forward(x);
  CHECK((y + z).cwiseAbs().maxCoeff() == 0.0f);
  CHECK(y.cwiseAbs().maxCoeff() > 0.0f);
}

TEST_CASE("forward is bit-stable") {
  const SurrogateModel m = build_model(tiny_spec(4, Activation::kPReLU, true), 5);
  const auto x = random_input(m.spec().input_length(), 7);
  const Mat<float> y = m.forward(x);
  for (int i = 0; i < 3; ++i) CHECK(m.forward(x) == y);
}

TEST_CASE("streams are cut into windows whose cores match single-window inference") {
  ArchitectureSpec s;
  s.filters = 2;
  s.filter_length = 8;
  s.n_cf = 3;
  const SurrogateModel m = build_model(s, 2);
  for (auto [length, windows] : {std::pair{std::size_t{2048}, 1u}, {std::size_t{10048}, 5u}, {std::size_t{16384}, 8u}}) {
    CAPTURE(length);
    Stimulus audio;
    audio.rate = 20000.0;
    std::mt19937 rng(static_cast<unsigned>(length));
    std::normal_distribution<double> nd(0.0, 0.05);
    for (std::size_t i = 0; i < length; ++i) audio.samples.push_back(nd(rng));
    const BMResponse r = process_stream(m, audio);
    CHECK(r.length == length);
    CHECK(r.n_cf() == 3);
    CHECK(window_count(length, 2048) == windows);
    for (std::size_t w = 0; w < windows; ++w) {
      std::vector<double> window(s.input_length(), 0.0);
      for (std::size_t i = 0; i < window.size(); ++i) {
        const auto src = static_cast<std::ptrdiff_t>(w * 2048 + i) - 256;
        if (src >= 0 && src < static_cast<std::ptrdiff_t>(length)) window[i] = audio.samples[static_cast<std::size_t>(src)];
      }
      const BMResponse one = forward(m, window);
      const std::size_t extent = std::min<std::size_t>(2048, length - w * 2048);
      bool same = true;
      for (std::size_t t = 0; t < extent; ++t)
        for (std::size_t c = 0; c < 3; ++c) same = same && one.at(t, c) == r.at(w * 2048 + t, c);
      CHECK(same);
    }
  }
}

TEST_CASE("stream input must be at 20 kHz") {
  const SurrogateModel m = build_model(tiny_spec(4, Activation::kTanh, true), 1);
  Stimulus audio;
  audio.rate = 16000.0;
  audio.samples.assign(100, 0.0);
  CHECK_THROWS_AS(process_stream(m, audio), UsageError);
}

TEST_CASE("boundary score: zero response and a jump") {
  BMResponse zero(300, CochlearMap({1000.0, 500.0}));
  const auto z = boundary_discontinuity(zero, 100);
  REQUIRE(z.size() == 2);
  CHECK(z[0] == 1.0);
  CHECK(z[1] == 1.0);

  // Unit ramp with a jump of 10 at t = 100: within-window steps are 1.
  BMResponse ramp(200, CochlearMap({1000.0}));
  for (std::size_t t = 0; t < 200; ++t) ramp.at(t, 0) = static_cast<float>(t) + (t >= 100 ? 9.0f : 0.0f);
  const auto j = boundary_discontinuity(ramp, 100);
  REQUIRE(j.size() == 1);
  CHECK(j[0] == doctest::Approx(10.0));

  CHECK_THROWS_AS(boundary_discontinuity(ramp, 200), UsageError);
}

TEST_CASE("oracle output has no window boundaries") {
  Stimulus noise;
  noise.rate = 20000.0;
  std::mt19937 rng(11);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 6144; ++i) noise.samples.push_back(nd(rng));
  normalize_to_spl(noise, 70.0);
  const BMResponse r = TLModel{}.simulate(noise);
  const auto scores = boundary_discontinuity(r, 2048);
  REQUIRE(scores.size() == 2);
  for (double v : scores) CHECK(v == doctest::Approx(1.0).epsilon(0.2));
}

}
