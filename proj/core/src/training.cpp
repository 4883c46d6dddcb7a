#include "connear/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "binary_io.hpp"
#include "connear/corpus.hpp"
#include "connear/error.hpp"
#include "connear/parallel.hpp"
#include "connear/resample.hpp"
#include "connear/serialization.hpp"

namespace connear {

namespace {

constexpr std::uint32_t kEndianTag = 0x01020304;
constexpr double kModelRate = 20000.0;
constexpr char kSyntheticPrefix[] = "synthetic:";

std::string with_suffix(const std::filesystem::path& p, const char* suffix) { return p.string() + suffix; }

// Write through a temporary file so an interrupted run never leaves a
// truncated checkpoint behind.
template <typename Fn>
void write_atomic(const std::filesystem::path& path, Fn&& fn) {
  const std::filesystem::path tmp = with_suffix(path, ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    fn(out);
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_adam(std::ostream& out, const AdamState<float>& s) {
  using namespace detail;
  out.write("CNAD", 4);
  put_u32(out, 1);
  put_u32(out, kEndianTag);
  put_u64(out, s.step);
  put_u64(out, s.m.size());
  put_f32_array(out, s.m.data(), s.m.size());
  put_f32_array(out, s.v.data(), s.v.size());
}

AdamState<float> read_adam(const std::filesystem::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  detail::Reader r(in, path.string());
  r.expect_magic("CNAD");
  if (r.u32() != 1) r.fail("unsupported optimizer state version");
  if (r.u32() != kEndianTag) r.fail("bad endian tag");
  const std::uint64_t step = r.u64();
  const std::uint64_t n = r.u64();
  if (n != expected) r.fail("optimizer state holds " + std::to_string(n) + " parameters, model has " +
                            std::to_string(expected));
  AdamState<float> s(n);
  s.step = step;
  r.f32_array(s.m.data(), n);
  r.f32_array(s.v.data(), n);
  if (!r.at_end()) r.fail("trailing bytes");
  return s;
}

// Config text without the keys that may change between resumed runs.
std::string resumable_identity(const TrainingConfig& c) {
  KeyValueFile f = c.to_config();
  KeyValueFile out;
  for (const auto& [k, v] : f.entries())
    if (k != "epochs" && k != "threads") out.set(k, v);
  return out.render();
}

std::vector<std::size_t> held_out_items(std::size_t n_items, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(n_items);
  for (std::size_t i = 0; i < n_items; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_held = 0;
  if (fraction > 0.0 && n_items > 1)
    n_held = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_items))),
                                     1, n_items - 1);
  order.resize(n_held);
  std::sort(order.begin(), order.end());
  return order;
}

void check_narrowable(const WindowGeometry& stored, const WindowGeometry& wanted) {
  if (wanted.core != stored.core || wanted.left > stored.left || wanted.right > stored.right)
    throw UsageError("model window (" + std::to_string(wanted.left) + "+" + std::to_string(wanted.core) + "+" +
                     std::to_string(wanted.right) + ") cannot be cut from dataset windows (" +
                     std::to_string(stored.left) + "+" + std::to_string(stored.core) + "+" +
                     std::to_string(stored.right) + ")");
}

}  // namespace

// ---------------------------------------------------------------- config

void TrainingConfig::validate() const {
  if (!(adam.learning_rate > 0.0) || !std::isfinite(adam.learning_rate))
    throw UsageError("learning_rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw UsageError("Adam betas must lie in [0, 1)");
  if (!(adam.epsilon > 0.0)) throw UsageError("adam_epsilon must be positive");
  if (batch_size < 1) throw UsageError("batch_size must be at least 1");
  if (epochs < 1) throw UsageError("epochs must be at least 1");
  if (!std::isfinite(level_min_db) || !std::isfinite(level_max_db) || level_min_db > level_max_db)
    throw UsageError("presentation_level_db must be finite with min <= max");
  if (!(held_out_fraction >= 0.0 && held_out_fraction < 1.0))
    throw UsageError("held_out_fraction must lie in [0, 1)");
  if (corpus.empty()) throw UsageError("corpus must be set");
  if (corpus_items < 1) throw UsageError("corpus_items must be at least 1");
  if (!(corpus_item_duration_s > 0.0)) throw UsageError("corpus_item_duration_s must be positive");
  architecture.validate();
  check_narrowable(effective_dataset_window(), architecture.window);
}

KeyValueFile TrainingConfig::to_config() const {
  KeyValueFile f;
  f.set("learning_rate", adam.learning_rate);
  f.set("adam_beta1", adam.beta1);
  f.set("adam_beta2", adam.beta2);
  f.set("adam_epsilon", adam.epsilon);
  f.set("batch_size", static_cast<long long>(batch_size));
  f.set("epochs", static_cast<long long>(epochs));
  f.set("seed", static_cast<long long>(seed));
  f.set("presentation_level_db", level_min_db == level_max_db
                                     ? format_double(level_min_db)
                                     : format_double(level_min_db) + "," + format_double(level_max_db));
  f.set("held_out_fraction", held_out_fraction);
  f.set("threads", static_cast<long long>(threads));
  f.set("corpus", corpus);
  f.set("corpus_items", static_cast<long long>(corpus_items));
  f.set("corpus_item_duration_s", corpus_item_duration_s);
  const ArchitectureSpec& a = architecture;
  f.set("layers", static_cast<long long>(a.n_layers));
  f.set("filters", static_cast<long long>(a.filters));
  f.set("filter_length", static_cast<long long>(a.filter_length));
  f.set("stride", static_cast<long long>(a.stride));
  f.set("activation", to_string(a.activation));
  f.set("window_core", static_cast<long long>(a.window.core));
  f.set("context_left", static_cast<long long>(a.window.left));
  f.set("context_right", static_cast<long long>(a.window.right));
  f.set("n_cf", static_cast<long long>(a.n_cf));
  if (dataset_window) {
    f.set("dataset_context_left", static_cast<long long>(dataset_window->left));
    f.set("dataset_context_right", static_cast<long long>(dataset_window->right));
  }
  return f;
}

TrainingConfig TrainingConfig::read(KeyValueReader& r) {
  TrainingConfig c;
  auto size = [&](const std::string& key, std::size_t fallback) {
    const long long v = r.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw UsageError(key + " must not be negative");
    return static_cast<std::size_t>(v);
  };
  c.adam.learning_rate = r.get_double("learning_rate", c.adam.learning_rate);
  c.adam.beta1 = r.get_double("adam_beta1", c.adam.beta1);
  c.adam.beta2 = r.get_double("adam_beta2", c.adam.beta2);
  c.adam.epsilon = r.get_double("adam_epsilon", c.adam.epsilon);
  c.batch_size = size("batch_size", c.batch_size);
  c.epochs = size("epochs", c.epochs);
  c.seed = static_cast<std::uint64_t>(r.get_int("seed", static_cast<long long>(c.seed)));
  const auto levels = r.get_doubles("presentation_level_db", {c.level_min_db});
  if (levels.size() == 1) {
    c.level_min_db = c.level_max_db = levels[0];
  } else if (levels.size() == 2) {
    c.level_min_db = levels[0];
    c.level_max_db = levels[1];
  } else {
    throw UsageError("presentation_level_db takes one level or a min,max pair");
  }
  c.held_out_fraction = r.get_double("held_out_fraction", c.held_out_fraction);
  c.threads = size("threads", c.threads);
  c.corpus = r.get_string("corpus", c.corpus);
  c.corpus_items = size("corpus_items", c.corpus_items);
  c.corpus_item_duration_s = r.get_double("corpus_item_duration_s", c.corpus_item_duration_s);
  ArchitectureSpec& a = c.architecture;
  a.n_layers = size("layers", a.n_layers);
  a.filters = size("filters", a.filters);
  a.filter_length = size("filter_length", a.filter_length);
  a.stride = size("stride", a.stride);
  a.activation = parse_activation(r.get_string("activation", to_string(a.activation)));
  a.window.core = size("window_core", a.window.core);
  a.window.left = size("context_left", a.window.left);
  a.window.right = size("context_right", a.window.right);
  a.n_cf = size("n_cf", a.n_cf);
  if (r.has("dataset_context_left") || r.has("dataset_context_right")) {
    WindowGeometry w = a.window;
    w.left = size("dataset_context_left", w.left);
    w.right = size("dataset_context_right", w.right);
    c.dataset_window = w;
  }
  c.validate();
  return c;
}

TrainingConfig TrainingConfig::from_config(const KeyValueFile& file) {
  KeyValueReader r(file);
  TrainingConfig c = read(r);
  r.finish();
  return c;
}

TrainingConfig TrainingConfig::load(const std::filesystem::path& path) {
  return from_config(KeyValueFile::load(path));
}

std::vector<Stimulus> load_training_corpus(const TrainingConfig& config) {
  const std::string& spec = config.corpus;
  if (spec.rfind(kSyntheticPrefix, 0) == 0) {
    const CorpusPreset preset = parse_corpus_preset(spec.substr(sizeof(kSyntheticPrefix) - 1));
    return synthetic_corpus(preset, config.corpus_items, config.corpus_item_duration_s, config.seed);
  }
  return load_corpus(list_corpus_files(spec));
}

// ---------------------------------------------------------------- loss, Adam

double l1_loss(const Mat<float>& prediction, const Mat<float>& target) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols())
    throw UsageError("l1_loss: shape mismatch (" + std::to_string(prediction.rows()) + "x" +
                     std::to_string(prediction.cols()) + " vs " + std::to_string(target.rows()) + "x" +
                     std::to_string(target.cols()) + ")");
  if (prediction.size() == 0) throw UsageError("l1_loss: empty matrices");
  double acc = 0.0;
  const float* p = prediction.data();
  const float* t = target.data();
  for (Eigen::Index i = 0; i < prediction.size(); ++i) acc += std::abs(static_cast<double>(p[i]) - t[i]);
  return acc / static_cast<double>(prediction.size());
}

Mat<float> l1_gradient(const Mat<float>& prediction, const Mat<float>& target) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols())
    throw UsageError("l1_gradient: shape mismatch");
  const float scale = 1.0f / static_cast<float>(prediction.size());
  Mat<float> g(prediction.rows(), prediction.cols());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const float d = prediction.data()[i] - target.data()[i];
    g.data()[i] = d > 0.0f ? scale : (d < 0.0f ? -scale : 0.0f);
  }
  return g;
}

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grad, AdamState<T>& state, const AdamParams& hp) {
  if (grad.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw UsageError("adam_step: parameter, gradient and state sizes differ");
  ++state.step;
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(hp.beta1), b2 = static_cast<T>(hp.beta2);
  const T lr_t = static_cast<T>(hp.learning_rate / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(hp.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grad[i];
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
    params[i] -= lr_t * state.m[i] / (std::sqrt(state.v[i] * inv_c2) + eps);
  }
}

template void adam_step<float>(std::span<float>, std::span<const float>, AdamState<float>&, const AdamParams&);
template void adam_step<double>(std::span<double>, std::span<const double>, AdamState<double>&,
                                const AdamParams&);

// ---------------------------------------------------------------- dataset

std::uint64_t Dataset::record_offset(std::size_t record) const {
  const std::uint64_t floats = geometry_.total() + n_cf_ * geometry_.core;
  return header_bytes_ + static_cast<std::uint64_t>(record) * (12 + 4 * floats);
}

Dataset Dataset::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  detail::Reader r(in, path.string());
  r.expect_magic("CNDS");
  const std::uint32_t version = r.u32();
  if (version != kVersion) r.fail("unsupported dataset version " + std::to_string(version));
  if (r.u32() != kEndianTag) r.fail("bad endian tag");
  Dataset d;
  d.path_ = path;
  d.geometry_.left = r.u32();
  d.geometry_.core = r.u32();
  d.geometry_.right = r.u32();
  d.n_cf_ = r.u32();
  const std::uint64_t n = r.u64();
  d.header_bytes_ = r.offset();
  if (d.geometry_.core == 0 || d.n_cf_ == 0) r.fail("empty window geometry");

  const auto size = std::filesystem::file_size(path);
  if (size != d.record_offset(n))
    throw DataError(path.string() + ": file holds " + std::to_string(size) + " bytes, header implies " +
                    std::to_string(d.record_offset(n)));
  d.index_.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t at = d.record_offset(i);
    in.seekg(static_cast<std::streamoff>(at));
    r.set_offset(at);
    Entry e{};
    e.item = r.u32();
    e.window = r.u32();
    e.held_out = r.u32() != 0;
    d.index_.push_back(e);
  }
  return d;
}

std::vector<std::size_t> Dataset::split(bool held_out) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < index_.size(); ++i)
    if (index_[i].held_out == held_out) out.push_back(i);
  return out;
}

TrainingPair Dataset::read(std::size_t record) const { return read(record, geometry_); }

TrainingPair Dataset::read(std::size_t record, const WindowGeometry& window) const {
  if (record >= index_.size()) throw UsageError("dataset record " + std::to_string(record) + " out of range");
  check_narrowable(geometry_, window);
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path_.string());
  const std::uint64_t at = record_offset(record) + 12;
  in.seekg(static_cast<std::streamoff>(at));
  detail::Reader r(in, path_.string());
  r.set_offset(at);

  std::vector<float> full(geometry_.total());
  r.f32_array(full.data(), full.size());
  TrainingPair pair;
  const std::size_t skip = geometry_.left - window.left;
  pair.input.assign(full.begin() + static_cast<std::ptrdiff_t>(skip),
                    full.begin() + static_cast<std::ptrdiff_t>(skip + window.total()));
  pair.target.resize(static_cast<Eigen::Index>(n_cf_), static_cast<Eigen::Index>(geometry_.core));
  r.f32_array(pair.target.data(), static_cast<std::size_t>(pair.target.size()));
  pair.item = index_[record].item;
  pair.window = index_[record].window;
  pair.held_out = index_[record].held_out;
  return pair;
}

Dataset build_dataset(const std::vector<Stimulus>& corpus, const TrainingConfig& config, const TLModel& tl,
                      const std::filesystem::path& out_path) {
  config.validate();
  if (corpus.empty()) throw DataError("build_dataset: empty corpus");
  const WindowGeometry geometry = config.effective_dataset_window();
  const std::size_t n_cf = config.architecture.n_cf;
  if (tl.output_map().n_cf() != n_cf)
    throw UsageError("build_dataset: TL produces " + std::to_string(tl.output_map().n_cf()) +
                     " channels, the architecture expects " + std::to_string(n_cf));
  if (std::abs(tl.params().output_rate - kModelRate) > 1e-9)
    throw UsageError("build_dataset: TL output rate must be 20 kHz");

  std::mt19937_64 level_rng(config.seed ^ 0xA24BAED4963EE407ull);
  std::uniform_real_distribution<double> level_dist(config.level_min_db, config.level_max_db);

  struct Job {
    std::uint32_t item;
    std::uint32_t window;
    std::vector<double> samples;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    Stimulus s = corpus[i];
    const double level = config.level_min_db == config.level_max_db ? config.level_min_db : level_dist(level_rng);
    if (s.samples.empty()) throw DataError("corpus item " + std::to_string(i) + " has no samples");
    if (!(s.rate > 0.0)) throw DataError("corpus item " + std::to_string(i) + " has no sample rate");
    try {
      normalize_to_spl(s, level);
    } catch (const DataError&) {
      throw DataError("corpus item " + std::to_string(i) + " is silent and cannot be level-normalized");
    }
    if (std::abs(s.rate - kModelRate) > 1e-9) s = resample(s, kModelRate);
    WindowedAudio windowed = window_with_context(s, geometry);
    for (std::size_t w = 0; w < windowed.windows.size(); ++w)
      jobs.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(w), std::move(windowed.windows[w])});
  }

  const auto held = held_out_items(corpus.size(), config.held_out_fraction, config.seed);
  WorkerPool pool(config.threads);

  const std::filesystem::path tmp = with_suffix(out_path, ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    using namespace detail;
    out.write("CNDS", 4);
    put_u32(out, Dataset::kVersion);
    put_u32(out, kEndianTag);
    put_u32(out, static_cast<std::uint32_t>(geometry.left));
    put_u32(out, static_cast<std::uint32_t>(geometry.core));
    put_u32(out, static_cast<std::uint32_t>(geometry.right));
    put_u32(out, static_cast<std::uint32_t>(n_cf));
    put_u64(out, jobs.size());

    // Solve in chunks so results can be written in order without holding
    // every target in memory.
    const std::size_t chunk = 4 * pool.size();
    std::vector<Mat<float>> targets(chunk);
    for (std::size_t begin = 0; begin < jobs.size(); begin += chunk) {
      const std::size_t count = std::min(chunk, jobs.size() - begin);
      pool.parallel_for(count, [&](std::size_t k) {
        Stimulus window;
        window.rate = kModelRate;
        window.samples = jobs[begin + k].samples;
        const BMResponse r = tl.simulate(window);
        Mat<float>& t = targets[k];
        t.resize(static_cast<Eigen::Index>(n_cf), static_cast<Eigen::Index>(geometry.core));
        for (std::size_t c = 0; c < n_cf; ++c)
          for (std::size_t s = 0; s < geometry.core; ++s)
            t(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(s)) = r.at(geometry.left + s, c);
      });
      for (std::size_t k = 0; k < count; ++k) {
        const Job& job = jobs[begin + k];
        put_u32(out, job.item);
        put_u32(out, job.window);
        put_u32(out, std::binary_search(held.begin(), held.end(), job.item) ? 1u : 0u);
        std::vector<float> input(job.samples.begin(), job.samples.end());
        put_f32_array(out, input.data(), input.size());
        put_f32_array(out, targets[k].data(), static_cast<std::size_t>(targets[k].size()));
      }
    }
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, out_path);
  return Dataset::open(out_path);
}

// ---------------------------------------------------------------- training

double mean_l1(const SurrogateModel& model, const Dataset& dataset, std::span<const std::size_t> records,
               std::size_t threads) {
  if (records.empty()) throw UsageError("mean_l1: no records");
  std::vector<double> losses(records.size());
  WorkerPool pool(threads);
  pool.parallel_for(records.size(), [&](std::size_t i) {
    const TrainingPair pair = dataset.read(records[i], model.spec().window);
    losses[i] = l1_loss(model.forward(pair.input), pair.target);
  });
  double acc = 0.0;
  for (double l : losses) acc += l;
  return acc / static_cast<double>(losses.size());
}

std::vector<EpochReport> read_loss_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "epoch,train_L1,heldout_L1") throw DataError(path.string() + ": unexpected header '" + line + "'");
  std::vector<EpochReport> history;
  double best = std::numeric_limits<double>::infinity();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    EpochReport e;
    std::istringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected three columns");
    try {
      e.epoch = std::stoul(a);
      e.train_l1 = std::stod(b);
      e.held_out_l1 = c == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(c);
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    const double score = std::isnan(e.held_out_l1) ? e.train_l1 : e.held_out_l1;
    e.best = score < best;
    if (e.best) best = score;
    history.push_back(e);
  }
  return history;
}

TrainingResult train(SurrogateModel model, const Dataset& dataset, const TrainingConfig& config,
                     const std::optional<std::filesystem::path>& checkpoint_dir,
                     const std::function<void(const EpochReport&)>& on_epoch) {
  config.validate();
  if (!(model.spec() == config.architecture))
    throw UsageError("train: model architecture differs from the configured one");
  const WindowGeometry window = model.spec().window;
  check_narrowable(dataset.geometry(), window);
  if (dataset.n_cf() != model.spec().n_cf) throw UsageError("train: dataset and model channel counts differ");
  const std::vector<std::size_t> train_records = dataset.split(false);
  const std::vector<std::size_t> held_records = dataset.split(true);
  if (train_records.empty()) throw UsageError("train: dataset has no training records");

  const std::size_t n_params = model.parameter_count();
  AdamState<float> adam(n_params);
  TrainingResult result;
  result.best_model = model;
  double best = std::numeric_limits<double>::infinity();

  namespace fs = std::filesystem;
  fs::path last_model, last_adam, loss_csv, best_model, best_txt, config_txt;
  if (checkpoint_dir) {
    fs::create_directories(*checkpoint_dir);
    last_model = *checkpoint_dir / "last.cnnw";
    last_adam = *checkpoint_dir / "last.adam";
    loss_csv = *checkpoint_dir / "loss.csv";
    best_model = *checkpoint_dir / "best.cnnw";
    best_txt = *checkpoint_dir / "best.txt";
    config_txt = *checkpoint_dir / "config.txt";

    if (fs::exists(config_txt)) {
      const TrainingConfig previous = TrainingConfig::load(config_txt);
      if (resumable_identity(previous) != resumable_identity(config))
        throw UsageError("checkpoint in " + checkpoint_dir->string() +
                         " was written with a different configuration");
    }
    if (fs::exists(last_model) && fs::exists(last_adam) && fs::exists(loss_csv)) {
      SurrogateModel resumed = load_model(last_model);
      if (!(resumed.spec() == model.spec())) throw DataError(last_model.string() + ": architecture mismatch");
      model = std::move(resumed);
      adam = read_adam(last_adam, n_params);
      result.history = read_loss_history(loss_csv);
      for (const auto& e : result.history)
        if (e.best) best = std::isnan(e.held_out_l1) ? e.train_l1 : e.held_out_l1;
      result.best_model = fs::exists(best_model) ? load_model(best_model) : model;
    }
    write_atomic(config_txt, [&](std::ostream& out) { out << config.to_config().render(); });
  }

  WorkerPool pool(config.threads);
  const std::size_t batch = config.batch_size;
  std::vector<std::vector<float>> slot_grads(std::min(batch, train_records.size()),
                                             std::vector<float>(n_params));
  std::vector<double> slot_loss(slot_grads.size());
  std::vector<float> grad(n_params);

  for (std::size_t epoch = result.history.size() + 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order = train_records;
    std::mt19937_64 rng(config.seed * 0x9E3779B97F4A7C15ull + epoch);
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t count = std::min(batch, order.size() - begin);
      pool.parallel_for(count, [&](std::size_t k) {
        const TrainingPair pair = dataset.read(order[begin + k], window);
        Tape<float> tape;
        const Mat<float> out = model.forward(pair.input, &tape);
        slot_loss[k] = l1_loss(out, pair.target);
        std::fill(slot_grads[k].begin(), slot_grads[k].end(), 0.0f);
        model.backward(tape, l1_gradient(out, pair.target), slot_grads[k]);
      });
      // Fixed-order reduction keeps the update independent of scheduling.
      std::fill(grad.begin(), grad.end(), 0.0f);
      for (std::size_t k = 0; k < count; ++k) {
        if (!std::isfinite(slot_loss[k]))
          throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", record " +
                               std::to_string(order[begin + k]) + " (item " +
                               std::to_string(dataset.entries()[order[begin + k]].item) + ")");
        loss_sum += slot_loss[k];
        const float* g = slot_grads[k].data();
        for (std::size_t i = 0; i < n_params; ++i) grad[i] += g[i];
      }
      const float inv = 1.0f / static_cast<float>(count);
      for (float& g : grad) g *= inv;
      adam_step<float>(model.parameters(), grad, adam, config.adam);
    }

    EpochReport report;
    report.epoch = epoch;
    report.train_l1 = loss_sum / static_cast<double>(order.size());
    report.held_out_l1 = held_records.empty() ? std::numeric_limits<double>::quiet_NaN()
                                              : mean_l1(model, dataset, held_records, config.threads);
    if (!std::isfinite(report.train_l1) || (!held_records.empty() && !std::isfinite(report.held_out_l1)))
      throw NumericalError("non-finite loss after epoch " + std::to_string(epoch));
    const double score = held_records.empty() ? report.train_l1 : report.held_out_l1;
    report.best = score < best;
    if (report.best) {
      best = score;
      result.best_model = model;
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(report);

    if (checkpoint_dir) {
      write_atomic(last_model, [&](std::ostream& out) { write_model(out, model); });
      write_atomic(last_adam, [&](std::ostream& out) { write_adam(out, adam); });
      if (report.best) {
        write_atomic(best_model, [&](std::ostream& out) { write_model(out, model); });
        write_atomic(best_txt, [&](std::ostream& out) {
          out << "epoch " << epoch << "\nheldout_L1 " << format_double(report.held_out_l1) << "\n";
        });
      }
      write_atomic(loss_csv, [&](std::ostream& out) {
        out << "epoch,train_L1,heldout_L1\n";
        for (const auto& e : result.history)
          out << e.epoch << ',' << format_double(e.train_l1) << ','
              << (std::isnan(e.held_out_l1) ? std::string("nan") : format_double(e.held_out_l1)) << '\n';
      });
    }
    if (on_epoch) on_epoch(report);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace connear
