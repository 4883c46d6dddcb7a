#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "connear/error.hpp"
#include "connear/kv_config.hpp"

namespace connear::cli {

namespace {

double to_number(const std::string& s, const std::string& context) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v))
    throw UsageError("'" + s + "' is not a number (" + context + ")");
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream ss(text);
  while (std::getline(ss, part, sep)) parts.push_back(part);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

void add_spec_options(CLI::App* app, SpecOptions& s) {
  app->add_option("--layers", s.layers, "encoder + decoder layers")->capture_default_str();
  app->add_option("--filters", s.filters, "filters per layer")->capture_default_str();
  app->add_option("--filter-length", s.filter_length, "taps per filter")->capture_default_str();
  app->add_option("--stride", s.stride)->capture_default_str();
  app->add_option("--activation", s.activation, "tanh or prelu")->capture_default_str();
  app->add_option("--core", s.core, "core window samples")->capture_default_str();
  app->add_option("--context-left", s.context_left)->capture_default_str();
  app->add_option("--context-right", s.context_right)->capture_default_str();
  app->add_option("--n-cf", s.n_cf, "output channels")->capture_default_str();
}

// Turn `--config FILE` into ordinary `--key=value` arguments placed before the
// explicit ones, so flags given on the command line take precedence. Keys
// must name options of the chosen subcommand.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
  if (args.size() < 2) return args;
  const CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[1]);
  } catch (const CLI::OptionNotFound&) {
    return args;
  }
  std::string config_path;
  std::vector<std::string> rest;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config_path.empty()) return args;

  const KeyValueFile file = KeyValueFile::load(config_path);
  std::vector<std::string> out{args[0], args[1]};
  for (const auto& [key, value] : file.entries()) {
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config")
      throw UsageError(config_path + ": unknown key '" + key + "' for '" + args[1] + "'");
    if (opt->get_expected_max() > 1) {
      for (const auto& item : split(value, ',')) out.push_back("--" + key + "=" + item);
    } else {
      out.push_back("--" + key + "=" + value);
    }
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

}  // namespace

std::vector<double> parse_list(const std::string& text, double default_step) {
  if (text.empty()) throw UsageError("empty value list");
  std::vector<double> values;
  for (const auto& item : split(text, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() == 1) {
      values.push_back(to_number(parts[0], text));
      continue;
    }
    if (parts.size() > 3) throw UsageError("range '" + item + "' has too many ':'");
    const double start = to_number(parts[0], text);
    const double step = parts.size() == 3 ? to_number(parts[1], text) : default_step;
    const double stop = to_number(parts.back(), text);
    if (!(step > 0.0)) throw UsageError("range '" + item + "' needs a positive step");
    if (stop < start) throw UsageError("range '" + item + "' runs backwards");
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
    if (n > 100000) throw UsageError("range '" + item + "' is too long");
    for (std::size_t k = 0; k <= n; ++k) values.push_back(start + static_cast<double>(k) * step);
  }
  return values;
}

Stimulus parse_preset(const std::string& text, double rate) {
  std::istringstream ss(text);
  std::vector<std::string> words;
  for (std::string w; ss >> w;) words.push_back(w);
  if (words.empty()) throw UsageError("empty stimulus preset");
  auto arg = [&](std::size_t i, double fallback) {
    return i < words.size() ? to_number(words[i], "preset '" + text + "'") : fallback;
  };
  auto need = [&](std::size_t min, std::size_t max, const char* usage) {
    if (words.size() < min || words.size() > max) throw UsageError("preset usage: " + std::string(usage));
  };
  constexpr double kDuration = 0.128;
  const std::string& kind = words[0];
  if (kind == "click") {
    need(2, 4, "click LEVEL_PESPL [DURATION_S [ONSET_S]]");
    return make_click(arg(1, 0), rate, arg(2, kDuration), arg(3, 0.0));
  }
  if (kind == "tone") {
    need(3, 4, "tone FREQ_HZ LEVEL_SPL [DURATION_S]");
    const double duration = arg(3, kDuration);
    return make_tone(arg(1, 0), arg(2, 0), rate, static_cast<std::size_t>(std::llround(duration * rate)));
  }
  if (kind == "dp") {
    need(3, 5, "dp F1_HZ L2_DB [RATIO [DURATION_S]]");
    const double duration = arg(4, kDuration);
    return make_dp_pair(arg(1, 0), arg(3, 1.2), arg(2, 0), rate,
                        static_cast<std::size_t>(std::llround(duration * rate)));
  }
  throw UsageError("unknown preset '" + kind + "' (expected click, tone or dp)");
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cochlear transmission-line oracle and CNN surrogate"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", "connear 0.1.0");

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Run a model on a WAV file or a stimulus preset");
  simulate->add_option("--input", sim.input, "mono WAV (16/24-bit PCM or float)");
  simulate->add_option("--preset", sim.preset, "e.g. \"click 70\", \"tone 1000 60\", \"dp 2000 60\"");
  simulate->add_option("--model", sim.model, "tl or surrogate")->capture_default_str()
      ->check(CLI::IsMember({"tl", "surrogate"}));
  simulate->add_option("--weights", sim.weights, "surrogate weights (.cnnw)");
  simulate->add_option("--tl-params", sim.tl_params, "TL parameter file");
  simulate->add_option("--out", sim.out, "output matrix (.bmrx); metadata goes next to it as .json")->required();

  TrainOptions tr;
  auto* train = app.add_subcommand("train", "Build the TL dataset and train a surrogate");
  train->add_option("config", tr.config, "training configuration file")->required();
  train->add_option("--out", tr.out_dir, "checkpoint directory (overrides output_dir)");
  train->add_option("--dataset", tr.dataset, "dataset file, built if missing (overrides dataset)");
  train->add_option("--epochs", tr.epochs, "override the configured epoch count");
  train->add_option("--threads", tr.threads, "override the configured thread count");
  train->add_flag("--quiet", tr.quiet, "no per-epoch progress");

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "Cochlear-mechanics metrics as CSV and JSON");
  eval->add_option("--model", ev.model, "tl or surrogate")->capture_default_str()
      ->check(CLI::IsMember({"tl", "surrogate"}));
  eval->add_option("--weights", ev.weights, "surrogate weights (.cnnw)");
  eval->add_option("--tl-params", ev.tl_params, "TL parameter file");
  eval->add_flag("--compare,!--no-compare", ev.compare, "surrogate: also run the TL and report errors (default on)");
  eval->add_option("--metric", ev.metrics, "qerb, ep, dispersion, dp, l1 (repeatable)")
      ->required()->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)->delimiter(',')
      ->check(CLI::IsMember({"qerb", "ep", "dispersion", "dp", "l1"}));
  eval->add_option("--levels", ev.levels, "levels (dB); default depends on the metric");
  eval->add_option("--freqs", ev.freqs, "tone frequencies for ep (Hz)")->capture_default_str();
  eval->add_option("--f1", ev.f1, "f1 grid for dp (Hz, default step 1000)")->capture_default_str();
  eval->add_option("--l2", ev.l2, "L2 grid for dp (dB, default step 10)")->capture_default_str();
  eval->add_option("--ratio", ev.ratio, "f2/f1 for dp")->capture_default_str();
  eval->add_option("--corpus", ev.corpus, "l1: synthetic:<preset>, WAV directory or list file")
      ->capture_default_str();
  eval->add_option("--corpus-items", ev.corpus_items)->capture_default_str();
  eval->add_option("--corpus-item-duration", ev.corpus_item_duration_s)->capture_default_str();
  eval->add_option("--corpus-seed", ev.corpus_seed)->capture_default_str();
  eval->add_option("--corpus-level", ev.corpus_level_db, "presentation level (dB SPL)")->capture_default_str();
  eval->add_option("--threads", ev.threads)->capture_default_str();
  eval->add_option("--out", ev.out_dir, "report directory")->required();

  BenchOptions be;
  auto* bench = app.add_subcommand("bench", "Per-window latency of the TL oracle and the surrogate");
  bench->add_option("--weights", be.weights, "surrogate weights; otherwise a seeded model of --spec flags");
  add_spec_options(bench, be.spec);
  bench->add_option("--seed", be.seed, "initialization seed without --weights")->capture_default_str();
  bench->add_option("--tl-params", be.tl_params, "TL parameter file");
  bench->add_option("--windows", be.windows, "timed windows")->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--warmup", be.warmup, "untimed warmup windows")->capture_default_str();
  bench->add_option("--window-length", be.window_length, "samples per window (2560 or 1048)")
      ->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--json", be.json, "write the report as JSON");

  InfoOptions in;
  auto* info = app.add_subcommand("info", "Print a model spec and its parameter count");
  info->add_option("--weights", in.weights, "read the spec from a weights file");
  add_spec_options(info, in.spec);
  info->add_flag("--layer-table", in.layers, "also print the layer table");

  for (auto* sub : {simulate, eval, bench, info})
    sub->add_option("--config", "key = value file with option defaults");

  std::vector<std::string> args(argv, argv + argc);
  try {
    args = expand_config(app, std::move(args));
    std::vector<const char*> cargs;
    for (const auto& a : args) cargs.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::CallForHelp& e) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp& e) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::CallForVersion& e) {
      out << e.what() << '\n';
      return 0;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << '\n';
      for (auto* sub : app.get_subcommands()) err << sub->help();
      return 2;
    }

    if (simulate->parsed()) return cmd_simulate(sim, out, err);
    if (train->parsed()) return cmd_train(tr, out, err);
    if (eval->parsed()) return cmd_eval(ev, out, err);
    if (bench->parsed()) return cmd_bench(be, out, err);
    return cmd_info(in, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return 4;
  }
}

}  // namespace connear::cli
