#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "connear/surrogate.hpp"

namespace connear::cli {

struct SpecOptions {
  std::size_t layers = 8;
  std::size_t filters = 128;
  std::size_t filter_length = 64;
  std::size_t stride = 2;
  std::string activation = "tanh";
  std::size_t core = 2048;
  std::size_t context_left = 256;
  std::size_t context_right = 256;
  std::size_t n_cf = 201;

  ArchitectureSpec build() const;
};

struct SimulateOptions {
  std::string input;
  std::string preset;
  std::string model = "tl";
  std::string weights;
  std::string tl_params;
  std::string out;
};

struct TrainOptions {
  std::string config;
  std::string out_dir;
  std::string dataset;
  long long epochs = -1;
  long long threads = -1;
  bool quiet = false;
};

struct EvalOptions {
  std::string model = "tl";
  std::string weights;
  std::string tl_params;
  bool compare = true;  // surrogate only: also run the TL and report errors
  std::vector<std::string> metrics;
  std::string levels;     // per-metric default when empty
  std::string freqs = "500,1000,2000";
  std::string f1 = "1000:6000";
  std::string l2 = "10:10:100";
  double ratio = 1.2;
  std::string corpus = "synthetic:speech-shaped";
  std::size_t corpus_items = 8;
  double corpus_item_duration_s = 1.0;
  std::uint64_t corpus_seed = 99;
  double corpus_level_db = 70.0;
  std::size_t threads = 0;
  std::string out_dir;
};

struct BenchOptions {
  std::string weights;
  SpecOptions spec;
  std::uint64_t seed = 1;
  std::string tl_params;
  std::size_t windows = 100;
  std::size_t warmup = 3;
  std::size_t window_length = 2560;
  std::string json;
};

struct InfoOptions {
  std::string weights;
  SpecOptions spec;
  bool layers = false;
};

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err);
int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err);
int cmd_bench(const BenchOptions& o, std::ostream& out, std::ostream& err);
int cmd_info(const InfoOptions& o, std::ostream& out, std::ostream& err);

}  // namespace connear::cli
