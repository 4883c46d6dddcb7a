#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "connear/error.hpp"
#include "connear/evaluation.hpp"
#include "connear/kv_config.hpp"
#include "connear/latency.hpp"
#include "connear/resample.hpp"
#include "connear/serialization.hpp"
#include "connear/training.hpp"
#include "connear/wav.hpp"

namespace connear::cli {

namespace fs = std::filesystem;

namespace {

TLModelParams tl_params_from(const std::string& path) {
  if (path.empty()) return {};
  return TLModelParams::load(path);
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw DataError(std::string(what) + " " + path + " does not exist");
}

void require_parent_dir(const fs::path& path) {
  const fs::path parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
  if (!fs::is_directory(parent)) throw DataError("output directory " + parent.string() + " does not exist");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

nlohmann::json spec_json(const ArchitectureSpec& s) {
  return {{"layers", s.n_layers},
          {"filters", s.filters},
          {"filter_length", s.filter_length},
          {"stride", s.stride},
          {"activation", to_string(s.activation)},
          {"core", s.window.core},
          {"context_left", s.window.left},
          {"context_right", s.window.right},
          {"n_cf", s.n_cf},
          {"parameters", parameter_count(s)}};
}

std::string tag(double v) { return format_double(v); }

}  // namespace

ArchitectureSpec SpecOptions::build() const {
  ArchitectureSpec s;
  s.n_layers = layers;
  s.filters = filters;
  s.filter_length = filter_length;
  s.stride = stride;
  s.activation = parse_activation(activation);
  s.window = {core, context_left, context_right};
  s.n_cf = n_cf;
  s.validate();
  return s;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& /*err*/) {
  if (o.input.empty() == o.preset.empty()) throw UsageError("simulate: give exactly one of --input and --preset");
  if (o.model == "surrogate" && o.weights.empty()) throw UsageError("simulate: --model surrogate needs --weights");
  if (!o.input.empty()) require_file(o.input, "input");
  if (!o.weights.empty()) require_file(o.weights, "weights");
  if (!o.tl_params.empty()) require_file(o.tl_params, "TL parameter file");
  const fs::path out_path(o.out);
  require_parent_dir(out_path);

  const Stimulus stimulus = o.input.empty() ? parse_preset(o.preset) : read_wav(fs::path(o.input));
  if (stimulus.samples.empty()) throw DataError("simulate: input has no samples");

  MatrixContainer matrix;
  matrix.source_rate = stimulus.rate;
  nlohmann::json meta = {{"schema", "connear.simulate"}, {"version", 1}, {"model", o.model}};
  if (o.model == "tl") {
    const TLModel tl(tl_params_from(o.tl_params));
    matrix.response = tl.simulate(stimulus);
    meta["tl_params"] = o.tl_params.empty() ? "default" : o.tl_params;
  } else {
    const SurrogateModel model = load_model(o.weights);
    const Stimulus at_rate = std::abs(stimulus.rate - 20000.0) > 1e-9 ? resample(stimulus, 20000.0) : stimulus;
    matrix.response = process_stream(model, at_rate);
    meta["weights"] = o.weights;
    meta["spec"] = spec_json(model.spec());
  }
  save_matrix(out_path, matrix);

  meta["input"] = o.input.empty() ? "preset: " + o.preset : o.input;
  meta["source_rate_hz"] = stimulus.rate;
  meta["output_rate_hz"] = matrix.response.rate;
  meta["rows"] = matrix.response.length;
  meta["channels"] = matrix.response.n_cf();
  meta["max_abs_um"] = matrix.response.max_abs();
  fs::path meta_path = out_path;
  meta_path.replace_extension(".json");
  write_text(meta_path, meta.dump(2));
  out << "wrote " << out_path.string() << " (" << matrix.response.length << " x " << matrix.response.n_cf()
      << ") and " << meta_path.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- train

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  require_file(o.config, "training configuration");
  const KeyValueFile file = KeyValueFile::load(o.config);
  KeyValueReader reader(file);
  TrainingConfig config = TrainingConfig::read(reader);
  std::string out_dir = reader.get_string("output_dir", "");
  std::string dataset_path = reader.get_string("dataset", "");
  reader.finish();
  if (!o.out_dir.empty()) out_dir = o.out_dir;
  if (!o.dataset.empty()) dataset_path = o.dataset;
  if (o.epochs >= 0) config.epochs = static_cast<std::size_t>(o.epochs);
  if (o.threads >= 0) config.threads = static_cast<std::size_t>(o.threads);
  config.validate();
  if (out_dir.empty()) throw UsageError("train: set output_dir in the config or pass --out");
  fs::create_directories(out_dir);
  if (dataset_path.empty()) dataset_path = (fs::path(out_dir) / "dataset.cnds").string();

  std::optional<Dataset> dataset;
  if (fs::exists(dataset_path)) {
    dataset = Dataset::open(dataset_path);
    if (!(dataset->geometry() == config.effective_dataset_window()) || dataset->n_cf() != config.architecture.n_cf)
      throw DataError(dataset_path + " was built for a different window geometry or channel count");
    out << "reusing dataset " << dataset_path << " (" << dataset->size() << " pairs)\n";
  } else {
    // Corpus problems surface here, before any TL solve.
    const std::vector<Stimulus> corpus = load_training_corpus(config);
    out << "building dataset from " << corpus.size() << " items into " << dataset_path << '\n' << std::flush;
    const TLModel tl;
    dataset = build_dataset(corpus, config, tl, dataset_path);
    out << "dataset: " << dataset->split(false).size() << " training pairs, " << dataset->split(true).size()
        << " held-out pairs\n";
  }

  const SurrogateModel model = build_model(config.architecture, config.seed);
  out << "model: " << model.parameter_count() << " parameters\n" << std::flush;
  const TrainingResult result = train(model, *dataset, config, fs::path(out_dir), [&](const EpochReport& e) {
    if (o.quiet) return;
    out << "epoch " << e.epoch << "  train L1 " << std::setprecision(6) << e.train_l1 << "  held-out L1 "
        << e.held_out_l1 << (e.best ? "  *best" : "") << "  (" << std::setprecision(3) << e.seconds << " s)\n"
        << std::flush;
  });
  if (result.history.empty()) {
    err << "nothing to do: checkpoint already holds " << config.epochs << " epochs\n";
    return 0;
  }
  out << "checkpoints in " << out_dir << " (last.cnnw, best.cnnw, loss.csv)\n";
  return 0;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& /*err*/) {
  const bool surrogate = o.model == "surrogate";
  if (surrogate && o.weights.empty()) throw UsageError("eval: --model surrogate needs --weights");
  if (!o.weights.empty()) require_file(o.weights, "weights");
  if (!o.tl_params.empty()) require_file(o.tl_params, "TL parameter file");
  const fs::path dir(o.out_dir);
  fs::create_directories(dir);

  const TLModel tl(tl_params_from(o.tl_params));
  const TLResponder tl_responder(tl);
  std::optional<SurrogateModel> model;
  std::optional<SurrogateResponder> nn_responder;
  EvalProtocol protocol;
  if (surrogate) {
    model = load_model(o.weights);
    nn_responder.emplace(*model);
    protocol = EvalProtocol::for_model(model->spec());
  }
  protocol.threads = o.threads;
  const Responder& test = surrogate ? static_cast<const Responder&>(*nn_responder) : tl_responder;
  const bool compare = surrogate && o.compare;
  auto levels_or = [&](const char* fallback) { return parse_list(o.levels.empty() ? fallback : o.levels, 10.0); };

  for (const std::string& metric : o.metrics) {
    if (metric == "qerb") {
      for (double level : levels_or("40,70")) {
        const QerbCurve curve = qerb_curve(test, level, protocol);
        const std::string stem = "qerb_" + test.name() + "_" + tag(level);
        write_csv(dir / (stem + ".csv"), curve);
        write_text(dir / (stem + ".json"), to_json(curve));
        out << stem << ": written\n";
        if (compare) {
          const QerbCurve ref = qerb_curve(tl_responder, level, protocol);
          const std::string ref_stem = "qerb_tl_" + tag(level);
          write_csv(dir / (ref_stem + ".csv"), ref);
          write_text(dir / (ref_stem + ".json"), to_json(ref));
        }
      }
    } else if (metric == "ep") {
      const auto levels = levels_or("10:10:90");
      const auto freqs = parse_list(o.freqs, 500.0);
      std::vector<ExcitationPattern> mine, ref;
      for (double f : freqs) {
        auto p = excitation_patterns(test, f, levels, protocol);
        mine.insert(mine.end(), p.begin(), p.end());
        if (compare) {
          auto q = excitation_patterns(tl_responder, f, levels, protocol);
          ref.insert(ref.end(), q.begin(), q.end());
        }
      }
      write_csv(dir / ("ep_" + test.name() + ".csv"), mine);
      write_text(dir / ("ep_" + test.name() + ".json"), to_json(mine));
      if (compare) {
        write_csv(dir / "ep_tl.csv", ref);
        write_text(dir / "ep_tl.json", to_json(ref));
        std::ofstream csv(dir / "ep_rmse.csv");
        csv << "frequency_hz,level_db,rmse_percent,argmax_tl,argmax_surrogate\n";
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < mine.size(); ++i) {
          const double e = ep_rmse_percent(ref[i], mine[i]);
          csv << tag(mine[i].frequency_hz) << ',' << tag(mine[i].level_db) << ',' << tag(e) << ','
              << ref[i].argmax() << ',' << mine[i].argmax() << '\n';
          rows.push_back({{"frequency_hz", mine[i].frequency_hz}, {"level_db", mine[i].level_db},
                          {"rmse_percent", e}, {"argmax_tl", ref[i].argmax()},
                          {"argmax_surrogate", mine[i].argmax()}});
          out << "ep " << tag(mine[i].frequency_hz) << " Hz " << tag(mine[i].level_db) << " dB: RMSE "
              << std::setprecision(3) << e << "% of TL max\n";
        }
        write_text(dir / "ep_rmse.json",
                   nlohmann::json({{"schema", "connear.ep_rmse"}, {"version", kReportSchemaVersion}, {"rows", rows}})
                       .dump(2));
      }
      out << "ep: " << mine.size() << " patterns written\n";
    } else if (metric == "dispersion") {
      for (double level : levels_or("70")) {
        const DispersionProfile p = dispersion_profile(test, level, protocol);
        const std::string stem = "dispersion_" + test.name() + "_" + tag(level);
        write_csv(dir / (stem + ".csv"), p);
        write_text(dir / (stem + ".json"), to_json(p));
        out << stem << ": apical onset " << std::setprecision(4) << p.delay_ms.back() << " ms\n";
        if (compare) {
          const DispersionProfile r = dispersion_profile(tl_responder, level, protocol);
          write_csv(dir / ("dispersion_tl_" + tag(level) + ".csv"), r);
          write_text(dir / ("dispersion_tl_" + tag(level) + ".json"), to_json(r));
        }
      }
    } else if (metric == "dp") {
      const auto f1 = parse_list(o.f1, 1000.0);
      const auto l2 = parse_list(o.l2, 10.0);
      const DPGram g = dp_gram(test, f1, l2, o.ratio, protocol);
      write_csv(dir / ("dpgram_" + test.name() + ".csv"), g);
      write_text(dir / ("dpgram_" + test.name() + ".json"), to_json(g));
      if (compare) {
        const DPGram r = dp_gram(tl_responder, f1, l2, o.ratio, protocol);
        write_csv(dir / "dpgram_tl.csv", r);
        write_text(dir / "dpgram_tl.json", to_json(r));
      }
      out << "dpgram: " << f1.size() << " x " << l2.size() << " cells written\n";
    } else if (metric == "l1") {
      TrainingConfig corpus_cfg;
      corpus_cfg.corpus = o.corpus;
      corpus_cfg.corpus_items = o.corpus_items;
      corpus_cfg.corpus_item_duration_s = o.corpus_item_duration_s;
      corpus_cfg.seed = o.corpus_seed;
      const auto corpus = load_training_corpus(corpus_cfg);
      const auto losses = window_l1(test, tl_responder, corpus, protocol.window, o.corpus_level_db, o.threads);
      const BoxSummary s = box_summary(losses);
      write_csv(dir / ("l1_" + test.name() + ".csv"), losses);
      write_text(dir / ("l1_" + test.name() + ".json"), to_json(s));
      out << "l1: " << s.count << " windows, median " << std::setprecision(4) << s.median << " um, IQR ["
          << s.q1 << ", " << s.q3 << "]\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------- bench

int cmd_bench(const BenchOptions& o, std::ostream& out, std::ostream& err) {
  if (!o.weights.empty()) require_file(o.weights, "weights");
  if (!o.tl_params.empty()) require_file(o.tl_params, "TL parameter file");
  if (!o.json.empty()) require_parent_dir(o.json);
  const SurrogateModel model = o.weights.empty() ? build_model(o.spec.build(), o.seed) : load_model(o.weights);
  const TLModel tl(tl_params_from(o.tl_params));
  if (o.window_length != 2560)
    err << "note: the surrogate always runs its " << model.spec().input_length()
        << "-sample input window; the TL simulates " << o.window_length << " samples\n";
  const BenchReport r = bench_models(tl, model, o.window_length, o.windows, o.warmup, o.seed);
  for (const auto& w : r.warnings) err << "warning: " << w << '\n';

  auto row = [&](const char* name, const LatencyStats& s) {
    out << std::left << std::setw(10) << name << std::right << std::fixed << std::setprecision(3)
        << "  first " << std::setw(9) << s.first_ms << " ms  median " << std::setw(9) << s.median_ms
        << " ms  p95 " << std::setw(9) << s.p95_ms << " ms\n";
  };
  out << "window " << r.window_length << " samples (" << std::fixed << std::setprecision(1)
      << 1000.0 * static_cast<double>(r.window_length) / 20000.0 << " ms of audio), " << o.windows
      << " timed windows after " << o.warmup << " warmup\n";
  out << "surrogate: " << model.parameter_count() << " parameters, filters " << model.spec().filters << '\n';
  row("tl", r.tl);
  row("surrogate", r.surrogate);
  out << "speedup " << std::setprecision(2) << r.speedup << "x (TL median / surrogate median)\n";
  out << "real-time budget " << std::setprecision(1) << r.budget_ms << " ms: surrogate median "
      << (r.surrogate.median_ms <= r.budget_ms ? "within" : "over") << " budget on this machine\n";
  out.unsetf(std::ios::fixed);
  if (!o.json.empty()) write_text(o.json, to_json(r));
  return 0;
}

// ---------------------------------------------------------------- info

int cmd_info(const InfoOptions& o, std::ostream& out, std::ostream& /*err*/) {
  if (!o.weights.empty()) require_file(o.weights, "weights");
  const ArchitectureSpec spec = o.weights.empty() ? o.spec.build() : load_model(o.weights).spec();
  out << "layers         " << spec.n_layers << " (" << spec.depth() << " encoder, " << spec.depth() << " decoder)\n"
      << "filters        " << spec.filters << '\n'
      << "filter length  " << spec.filter_length << '\n'
      << "stride         " << spec.stride << '\n'
      << "activation     " << to_string(spec.activation) << '\n'
      << "window         " << spec.window.left << " + " << spec.window.core << " + " << spec.window.right << " = "
      << spec.input_length() << " samples\n"
      << "channels       " << spec.n_cf << " (" << surrogate_output_map(spec.n_cf).cf(spec.n_cf - 1) << " - "
      << surrogate_output_map(spec.n_cf).cf(0) << " Hz)\n"
      << "parameters     " << parameter_count(spec) << '\n';
  if (o.layers) {
    out << "\n#  kind        in_ch  out_ch  in_len  out_len  skip_from\n";
    const auto layers = plan_layers(spec);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const LayerInfo& l = layers[i];
      out << std::left << std::setw(3) << i << std::setw(12)
          << (l.kind == LayerKind::kConv ? "conv" : "transposed") << std::right << std::setw(5) << l.in_channels
          << std::setw(8) << l.out_channels << std::setw(8) << l.in_length << std::setw(9) << l.out_length
          << std::setw(11) << l.skip_from << '\n';
    }
  }
  return 0;
}

}  // namespace connear::cli
