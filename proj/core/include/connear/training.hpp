#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "connear/kv_config.hpp"
#include "connear/stimulus.hpp"
#include "connear/surrogate.hpp"
#include "connear/tl_model.hpp"

namespace connear {

struct AdamParams {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainingConfig {
  AdamParams adam;
  std::size_t batch_size = 8;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  // Each corpus item is RMS-normalized to a level drawn uniformly from
  // [min, max] dB SPL (equal bounds give one fixed level).
  double level_min_db = 70.0;
  double level_max_db = 70.0;
  double held_out_fraction = 0.2;
  std::size_t threads = 0;  // 0: hardware concurrency

  // Either "synthetic:<preset>" or a directory / list file of WAVs.
  std::string corpus = "synthetic:speech-shaped";
  std::size_t corpus_items = 32;
  double corpus_item_duration_s = 1.0;

  ArchitectureSpec architecture;
  // Window geometry of the stored pairs; at least as much context as the
  // architecture. Unset means the architecture window.
  std::optional<WindowGeometry> dataset_window;

  WindowGeometry effective_dataset_window() const { return dataset_window.value_or(architecture.window); }
  void validate() const;

  KeyValueFile to_config() const;
  static TrainingConfig from_config(const KeyValueFile& file);
  // Consumes the training keys and leaves the rest for the caller.
  static TrainingConfig read(KeyValueReader& reader);
  static TrainingConfig load(const std::filesystem::path& path);
};

// Resolve config.corpus into audio (synthetic generation or WAV loading).
// Throws DataError before any compute if the corpus path is unusable.
std::vector<Stimulus> load_training_corpus(const TrainingConfig& config);

// Mean absolute difference over all entries. Throws UsageError on a shape
// mismatch.
double l1_loss(const Mat<float>& prediction, const Mat<float>& target);
// d(l1)/d(prediction) = sign(prediction - target) / entries, with sign(0) = 0.
Mat<float> l1_gradient(const Mat<float>& prediction, const Mat<float>& target);

template <typename T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::uint64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, T(0)), v(n, T(0)) {}
};

// One bias-corrected Adam update of `params` in place.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grad, AdamState<T>& state, const AdamParams& hp);

// Input window (Pa) and core-aligned TL target (micrometres, n_cf x core).
struct TrainingPair {
  std::vector<float> input;
  Mat<float> target;
  std::uint32_t item = 0;
  std::uint32_t window = 0;
  bool held_out = false;
};

// Fixed-size records on disk, read back one at a time.
//   "CNDS"  u32 version  u32 endian tag  u32 left core right n_cf  u64 records
//   per record: u32 item, u32 window, u32 held_out, f32 input[total],
//               f32 target[n_cf * core] channel-major
class Dataset {
 public:
  static constexpr std::uint32_t kVersion = 1;

  static Dataset open(const std::filesystem::path& path);

  const std::filesystem::path& path() const { return path_; }
  const WindowGeometry& geometry() const { return geometry_; }
  std::size_t n_cf() const { return n_cf_; }
  std::size_t size() const { return index_.size(); }

  // Record indices of the training or held-out split, in file order.
  std::vector<std::size_t> split(bool held_out) const;

  TrainingPair read(std::size_t record) const;
  // Same pair with the input narrowed to `window` (same core, no more
  // context than stored).
  TrainingPair read(std::size_t record, const WindowGeometry& window) const;

  struct Entry {
    std::uint32_t item;
    std::uint32_t window;
    bool held_out;
  };
  const std::vector<Entry>& entries() const { return index_; }

 private:
  std::uint64_t record_offset(std::size_t record) const;

  std::filesystem::path path_;
  WindowGeometry geometry_;
  std::size_t n_cf_ = 0;
  std::uint64_t header_bytes_ = 0;
  std::vector<Entry> index_;
};

// Normalize every item to its presentation level, bring it to 20 kHz, cut
// it into context-bearing windows and simulate the TL on each whole window,
// keeping the core. Items are split into training and held-out sets by a
// seeded shuffle. Silent or empty items are rejected with DataError.
Dataset build_dataset(const std::vector<Stimulus>& corpus, const TrainingConfig& config, const TLModel& tl,
                      const std::filesystem::path& out_path);

// Mean L1 of `model` over the given records.
double mean_l1(const SurrogateModel& model, const Dataset& dataset, std::span<const std::size_t> records,
               std::size_t threads = 0);

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  double train_l1 = 0.0;
  double held_out_l1 = 0.0;
  bool best = false;
  double seconds = 0.0;
};

struct TrainingResult {
  SurrogateModel model;
  SurrogateModel best_model;
  std::vector<EpochReport> history;
};

// Adam on the L1 loss, one shuffled pass over the training split per epoch.
// With a checkpoint directory, every epoch writes last.cnnw, last.adam,
// loss.csv (epoch,train_L1,heldout_L1) and best.cnnw/best.txt when held-out
// L1 improves, and an existing checkpoint is resumed. Throws NumericalError
// if a batch loss is not finite.
TrainingResult train(SurrogateModel model, const Dataset& dataset, const TrainingConfig& config,
                     const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt,
                     const std::function<void(const EpochReport&)>& on_epoch = {});

// Loss history from a loss.csv file.
std::vector<EpochReport> read_loss_history(const std::filesystem::path& path);

}  // namespace connear
