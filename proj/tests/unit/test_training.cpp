#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "connear/error.hpp"
#include "connear/serialization.hpp"
#include "connear/stimulus.hpp"
#include "connear/training.hpp"
#include "test_util.hpp"

using namespace connear;
namespace fs = std::filesystem;

namespace {

const TLModel& oracle() {
  static const TLModel model{TLModelParams{}};
  return model;
}

// Small enough to train in seconds; n_cf must match the oracle.
TrainingConfig tiny_config() {
  TrainingConfig c;
  c.architecture.n_layers = 4;
  c.architecture.filters = 2;
  c.architecture.filter_length = 4;
  c.architecture.window = {256, 32, 32};
  c.batch_size = 4;
  c.epochs = 2;
  c.seed = 7;
  c.adam.learning_rate = 1e-3;
  c.threads = 2;
  c.level_min_db = 50.0;
  c.level_max_db = 80.0;
  return c;
}

std::vector<Stimulus> tiny_corpus() {
  std::vector<Stimulus> items;
  std::mt19937 rng(4);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 5; ++i) {
    Stimulus s = make_tone(300.0 * (i + 1), 60.0, 20000.0, 1000);
    for (double& v : s.samples) v += 0.01 * nd(rng);
    items.push_back(std::move(s));
  }
  return items;
}

// Built once; the TL solves dominate.
const fs::path& tiny_dataset() {
  static const fs::path path = [] {
    const fs::path dir = scratch_dir("training_dataset");
    build_dataset(tiny_corpus(), tiny_config(), oracle(), dir / "tiny.cnds");
    return dir / "tiny.cnds";
  }();
  return path;
}

Mat<float> random_mat(Eigen::Index r, Eigen::Index c, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Mat<float> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("L1 loss examples") {
  const Mat<float> t = random_mat(4, 3, 1);
  CHECK(l1_loss(t, t) == 0.0);
  const Mat<float> shifted = (t.array() + 0.01f).matrix();
  CHECK(l1_loss(shifted, t) == doctest::Approx(0.01).epsilon(1e-4));

  const Mat<float> p = random_mat(4, 3, 2);
  double brute = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) brute += std::abs(static_cast<double>(p(i, j)) - t(i, j));
  CHECK(l1_loss(p, t) == doctest::Approx(brute / 12.0));

  CHECK_THROWS_AS(l1_loss(random_mat(3, 4, 1), t), UsageError);
}

TEST_CASE("L1 gradient is sign over count with sign(0) = 0") {
  Mat<float> p(1, 4), t(1, 4);
  p << 1.0f, -1.0f, 2.0f, 0.5f;
  t << 0.0f, 0.0f, 2.0f, 1.0f;
  const Mat<float> g = l1_gradient(p, t);
  CHECK(g(0, 0) == 0.25f);
  CHECK(g(0, 1) == -0.25f);
  CHECK(g(0, 2) == 0.0f);
  CHECK(g(0, 3) == -0.25f);
}

TEST_CASE("Adam steps match the bias-corrected textbook update") {
  AdamParams hp;
  hp.learning_rate = 0.1;
  std::vector<double> p{1.0};
  AdamState<double> state(1);
  double m = 0.0, v = 0.0, ref = 1.0;
  int step = 0;
  for (double g : {0.5, -1.0, 0.25, 2.0}) {
    const std::vector<double> grad{g};
    adam_step<double>(p, grad, state, hp);
    ++step;
    m = hp.beta1 * m + (1 - hp.beta1) * g;
    v = hp.beta2 * v + (1 - hp.beta2) * g * g;
    const double m_hat = m / (1 - std::pow(hp.beta1, step));
    const double v_hat = v / (1 - std::pow(hp.beta2, step));
    ref -= hp.learning_rate * m_hat / (std::sqrt(v_hat) + hp.epsilon);
    CHECK(p[0] == doctest::Approx(ref).epsilon(1e-12));
  }
  // The first step moves by the learning rate whatever the gradient scale.
  std::vector<double> q{0.0};
  AdamState<double> fresh(1);
  adam_step<double>(q, std::vector<double>{1e-3}, fresh, hp);
  CHECK(q[0] == doctest::Approx(-0.1).epsilon(1e-4));
}

TEST_CASE("a zero learning rate leaves parameters unchanged") {
  AdamParams hp;
  hp.learning_rate = 0.0;
  std::vector<float> p{0.5f, -2.0f, 3.0f};
  const std::vector<float> before = p;
  AdamState<float> state(3);
  for (int i = 0; i < 10; ++i) adam_step<float>(p, std::vector<float>{1.0f, -0.1f, 7.0f}, state, hp);
  CHECK(p == before);
  // Training itself insists on a positive rate.
  TrainingConfig c;
  c.adam.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("shipped desk-scale configs parse") {
  for (const char* name : {"desk-context.cfg", "desk-no-context.cfg"}) {
    CAPTURE(name);
    const KeyValueFile file = KeyValueFile::load(std::filesystem::path(CONNEAR_SOURCE_DIR) / "configs" / name);
    KeyValueReader reader(file);
    const TrainingConfig c = TrainingConfig::read(reader);
    (void)reader.get_string("output_dir", "");
    (void)reader.get_string("dataset", "");
    CHECK_NOTHROW(reader.finish());
    CHECK(c.architecture.filters == 32);
    CHECK(c.epochs >= 20);
    CHECK(c.effective_dataset_window() == WindowGeometry{2048, 256, 256});
  }
}

TEST_CASE("config validation and round trip") {
  TrainingConfig c = tiny_config();
  c.dataset_window = WindowGeometry{256, 64, 64};
  c.corpus = "synthetic:music-shaped";
  const TrainingConfig r = TrainingConfig::from_config(KeyValueFile::parse(c.to_config().render()));
  CHECK(r.to_config().render() == c.to_config().render());
  CHECK(r.level_min_db == 50.0);
  CHECK(r.level_max_db == 80.0);
  CHECK(r.effective_dataset_window() == WindowGeometry{256, 64, 64});

  TrainingConfig bad = tiny_config();
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = tiny_config();
  bad.dataset_window = WindowGeometry{256, 0, 0};  // less context than the model
  CHECK_THROWS_AS(bad.validate(), UsageError);
  CHECK_THROWS_AS(TrainingConfig::from_config(KeyValueFile::parse("learning_rate = 1e-4\nlearnig_rate = 2\n")),
                  UsageError);
  CHECK(TrainingConfig{}.adam.learning_rate == 1e-4);
  CHECK(TrainingConfig{}.level_min_db == 70.0);
}

TEST_CASE("one second at 20 kHz gives ten windows with micrometre-scale targets") {
  TrainingConfig c;
  c.threads = 0;
  const Stimulus tone = make_tone(1000.0, 70.0, 20000.0, 20000);
  const fs::path dir = scratch_dir("training_one_second");
  const Dataset d = build_dataset({tone}, c, oracle(), dir / "one.cnds");
  REQUIRE(d.size() == 10);
  CHECK(d.split(true).empty());  // a single item stays in training
  double peak = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const TrainingPair p = d.read(i);
    CHECK(p.window == i);
    CHECK(p.input.size() == 2560);
    CHECK(p.target.rows() == 201);
    CHECK(p.target.cols() == 2048);
    peak = std::max(peak, static_cast<double>(p.target.cwiseAbs().maxCoeff()));
  }
  // Displacements in micrometres: the 1e6 scaling applied exactly once.
  CHECK(peak > 1e-3);
  CHECK(peak < 1.0);
  // The last window is zero-padded past the end of the audio.
  const TrainingPair last = d.read(9);
  const std::size_t valid = 20000 - 9 * 2048;
  CHECK(last.input[256 + valid + 10] == 0.0f);
}

TEST_CASE("inputs are level-normalized and targets are core-aligned TL output") {
  const Dataset d = Dataset::open(tiny_dataset());
  const TrainingConfig c = tiny_config();
  REQUIRE(d.size() == 5 * 4);  // 1000 samples in 256-sample cores
  // Re-simulate one window directly and compare.
  const TrainingPair p = d.read(5);
  Stimulus w;
  w.rate = 20000.0;
  w.samples.assign(p.input.begin(), p.input.end());
  const BMResponse r = oracle().simulate(w);
  double worst = 0.0;
  for (std::size_t ch = 0; ch < 201; ++ch)
    for (std::size_t t = 0; t < 256; ++t)
      worst = std::max(worst, std::abs(static_cast<double>(p.target(static_cast<Eigen::Index>(ch), static_cast<Eigen::Index>(t))) -
                                       r.at(32 + t, ch)));
  CHECK(worst < 1e-6 * std::max(1.0, r.max_abs()));

  // Item levels drawn from the configured range.
  std::vector<double> item(1000);
  for (std::size_t w2 = 0; w2 < 4; ++w2) {
    const TrainingPair q = d.read(w2);
    REQUIRE(q.item == 0);
    for (std::size_t t = 0; t < 256 && w2 * 256 + t < 1000; ++t) item[w2 * 256 + t] = q.input[32 + t];
  }
  const double level = spl_db(item);
  CHECK(level >= c.level_min_db - 0.01);
  CHECK(level <= c.level_max_db + 0.01);
}

TEST_CASE("held-out split is by item, seeded and deterministic") {
  const Dataset d = Dataset::open(tiny_dataset());
  const auto held = d.split(true);
  CHECK(held.size() == 4);  // one of five items
  std::uint32_t item = d.entries()[held.front()].item;
  for (std::size_t r : held) CHECK(d.entries()[r].item == item);
  CHECK(d.split(false).size() + held.size() == d.size());

  const fs::path dir = scratch_dir("training_split");
  const Dataset again = build_dataset(tiny_corpus(), tiny_config(), oracle(), dir / "again.cnds");
  CHECK(again.split(true) == held);
  std::ifstream a(tiny_dataset(), std::ios::binary), b(dir / "again.cnds", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
}

TEST_CASE("silent, empty and missing corpora are rejected") {
  const fs::path dir = scratch_dir("training_bad");
  Stimulus silent;
  silent.rate = 20000.0;
  silent.samples.assign(500, 0.0);
  CHECK_THROWS_AS(build_dataset({silent}, tiny_config(), oracle(), dir / "x.cnds"), DataError);
  CHECK_THROWS_AS(build_dataset({}, tiny_config(), oracle(), dir / "x.cnds"), DataError);
  CHECK_FALSE(fs::exists(dir / "x.cnds"));

  TrainingConfig c = tiny_config();
  c.corpus = (dir / "no_such_dir").string();
  CHECK_THROWS_AS(load_training_corpus(c), DataError);
}

TEST_CASE("non-20 kHz items are resampled before windowing") {
  const fs::path dir = scratch_dir("training_resample");
  const Stimulus s = make_tone(500.0, 60.0, 16000.0, 800);  // 50 ms
  TrainingConfig c = tiny_config();
  const Dataset d = build_dataset({s}, c, oracle(), dir / "r.cnds");
  CHECK(d.size() == 4);  // 1000 samples at 20 kHz
}

TEST_CASE("truncated dataset files are data errors") {
  const fs::path dir = scratch_dir("training_truncated");
  std::ifstream in(tiny_dataset(), std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  std::ofstream(dir / "cut.cnds", std::ios::binary) << bytes.substr(0, bytes.size() - 7);
  CHECK_THROWS_AS(Dataset::open(dir / "cut.cnds"), DataError);
}

TEST_CASE("training lowers the loss, is reproducible and resumes exactly") {
  const Dataset d = Dataset::open(tiny_dataset());
  TrainingConfig c = tiny_config();
  c.epochs = 4;
  const SurrogateModel init = build_model(c.architecture, 3);

  const TrainingResult a = train(init, d, c);
  REQUIRE(a.history.size() == 4);
  CHECK(a.history.back().train_l1 < a.history.front().train_l1);
  const TrainingResult b = train(init, d, c);
  CHECK(a.model == b.model);

  // Two epochs, stop, then resume to four from the checkpoint.
  const fs::path dir = scratch_dir("training_resume");
  TrainingConfig half = c;
  half.epochs = 2;
  train(init, d, half, dir);
  CHECK(read_loss_history(dir / "loss.csv").size() == 2);
  const TrainingResult resumed = train(init, d, c, dir);
  CHECK(resumed.history.size() == 4);
  CHECK(resumed.model == a.model);
  CHECK(load_model(dir / "last.cnnw") == a.model);
  CHECK(fs::exists(dir / "best.cnnw"));
  CHECK(fs::exists(dir / "config.txt"));
  const auto history = read_loss_history(dir / "loss.csv");
  REQUIRE(history.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(history[i].train_l1 == doctest::Approx(a.history[i].train_l1));

  TrainingConfig other = c;
  other.adam.learning_rate = 5e-4;
  CHECK_THROWS_AS(train(init, d, other, dir), UsageError);
}

TEST_CASE("a non-finite loss aborts training") {
  const Dataset d = Dataset::open(tiny_dataset());
  const TrainingConfig c = tiny_config();
  SurrogateModel bad = build_model(c.architecture, 3);
  bad.parameters()[0] = std::nanf("");
  CHECK_THROWS_AS(train(bad, d, c), NumericalError);
}

}
