// Copyright 2026 The wsadv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wsadv/cli/commands.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>

#include "wsadv/error.hpp"
#include "wsadv/textdist.hpp"

namespace wsadv::cli {

namespace {

using nlohmann::ordered_json;

// Checkpoint problems exit with kExitModelFailure rather than the generic code.
class ModelLoadError : public Error {
 public:
  using Error::Error;
};

ToyCtcModel load_checkpoint(const std::filesystem::path& path) {
  try {
    return load_model(path);
  } catch (const Error& e) {
    throw ModelLoadError(e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

ordered_json metadata_json(const Metadata& metadata) {
  ordered_json m = ordered_json::object();
  for (const auto& [k, v] : metadata) m[k] = v;
  return m;
}

void report_check(std::ostream& log, bool ok, const std::string& what, bool& all_ok) {
  log << (ok ? "[PASS] " : "[FAIL] ") << what << '\n';
  all_ok = all_ok && ok;
}

const RobustnessRow* find_row(const RobustnessReport& report, const std::string& approach, double delta) {
  for (const auto& r : report.rows) {
    if (r.approach == approach && r.delta_int16 == delta) return &r;
  }
  return nullptr;
}

}  // namespace

int cmd_gen_corpus(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Corpus corpus =
      generate_corpus(config.corpus.utterances, config.corpus.min_length, config.corpus.max_length, config.corpus.seed);
  const auto manifest = write_corpus(corpus, config.corpus_path);
  log << "wrote " << corpus.items.size() << " utterances, manifest " << manifest.string() << '\n';
  return kExitOk;
}

int cmd_train(const RunConfig& config, bool assert_cer, std::ostream& log) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const Corpus corpus = read_corpus(config.manifest_path());
  TrainOptions options = config.train.options;
  options.threads = config.bench.threads;
  const ToyCtcModel init = ToyCtcModel::initialize(config.train.shape, config.train.init_seed);
  const TrainOutcome outcome = train(init, corpus, options);
  if (config.model_path.has_parent_path()) std::filesystem::create_directories(config.model_path.parent_path());
  save_model(outcome.model, config.model_path);

  std::filesystem::create_directories(config.output_dir);
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "train_report";
  j["metadata"] = metadata_json(config.resolved());
  j["checkpoint"] = config.model_path.string();
  j["utterances"] = corpus.items.size();
  j["train_count"] = outcome.report.train_count;
  j["heldout_count"] = outcome.report.heldout_count;
  j["initial_loss"] = outcome.report.initial_loss;
  j["epoch_loss"] = outcome.report.epoch_loss;
  j["heldout_cer"] = outcome.report.heldout_cer;
  j["timing"] = {{"wall_time_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
  write_text(config.output_dir / "train_report.json", j.dump(2) + "\n");

  log << "trained " << outcome.report.epoch_loss.size() << " epochs, final loss "
      << (outcome.report.epoch_loss.empty() ? outcome.report.initial_loss : outcome.report.epoch_loss.back())
      << ", held-out CER " << outcome.report.heldout_cer << '\n';
  if (assert_cer) {
    bool ok = true;
    report_check(log, outcome.report.heldout_cer <= config.train.max_heldout_cer,
                 "held-out CER <= " + std::to_string(config.train.max_heldout_cer), ok);
    if (!ok) return kExitAssertion;
  }
  return kExitOk;
}

int cmd_attack(const RunConfig& config, const std::filesystem::path& input, bool assert_success, std::ostream& log) {
  config.validate();
  const AttackConfig attack = config.attack_config();
  if (attack.target.empty()) throw ConfigError("attack needs a target phrase (--target)");
  const ToyCtcModel model = load_checkpoint(config.model_path);
  const AudioClip x = read_wav(input);
  check_target_reachable(model, x, attack.target);
  const AttackResult result = attack.eot_samples > 0 ? run_attack_eot(model, x, attack) : run_attack(model, x, attack);

  std::filesystem::create_directories(config.output_dir);
  write_wav(result.adversarial, config.output_dir / "adversarial.wav");
  write_wav(result.delta, config.output_dir / "delta.wav");
  Metadata meta = config.resolved();
  meta.emplace_back("input", input.string());
  write_text(config.output_dir / "result.json", attack_result_to_json(result, meta));
  if (attack.record_trace) write_text(config.output_dir / "trace.jsonl", trace_to_jsonl(result.trace));

  log << (result.success ? "success" : "failure") << ": \"" << result.final_transcription << "\" after "
      << result.iterations_run << " iterations";
  if (std::isinf(result.snr_db)) {
    log << ", SNR infinite (no perturbation)";
  } else {
    log << ", SNR " << result.snr_db << " dB";
  }
  log << '\n';
  if (assert_success && !result.success) return kExitAssertion;
  return kExitOk;
}

std::vector<Approach> robustness_approaches(const RunConfig& config) {
  const AttackConfig base = config.attack_config();
  auto with = [&](double proportion, bool eot) {
    AttackConfig c = base;
    c.spt_proportion = proportion;
    c.eot_samples = eot ? config.bench.eot_samples : 0;
    c.eot_bound = eot ? config.bench.eot_delta_int16 / kInt16Scale : 0.0;
    return c;
  };
  const std::string d = std::to_string(static_cast<long long>(std::llround(config.bench.eot_delta_int16)));
  return {
      {"baseline", with(1.0, false)},
      {"spt-25", with(0.25, false)},
      {"spt-75", with(0.75, false)},
      {"eot-" + d, with(1.0, true)},
      {"spt-eot-75-" + d, with(0.75, true)},
  };
}

int cmd_bench(const RunConfig& config, const std::string& suite, bool assert_claims, std::ostream& log) {
  config.validate();
  if (suite != "robustness" && suite != "metrics" && suite != "wpt-speed") {
    throw ConfigError("unknown bench suite '" + suite + "' (robustness, metrics, wpt-speed)");
  }
  const ToyCtcModel model = load_checkpoint(config.model_path);
  const Corpus corpus = read_corpus(config.manifest_path());
  const auto pairs = make_cross_pairs(corpus, model, config.bench.pairs, config.bench.seed);
  const Metadata meta = config.resolved();
  const std::size_t threads = config.bench.threads;
  std::filesystem::create_directories(config.output_dir);
  const auto stem = config.output_dir / ("bench_" + suite);

  bool ok = true;
  if (suite == "robustness") {
    const auto approaches = robustness_approaches(config);
    const RobustnessReport report = robustness_suite(model, pairs, approaches, config.bench.deltas_int16,
                                                     config.bench.trials, config.bench.seed, threads);
    write_text(stem.string() + ".csv", to_csv(report));
    write_text(stem.string() + ".json", to_json(report, meta));
    log << to_csv(report);
    for (const auto& [label, rate] : report.success_rates) {
      if (label == "baseline") report_check(log, rate >= 0.9, "baseline success rate >= 0.9", ok);
    }
    for (double d : config.bench.deltas_int16) {
      const auto* small = find_row(report, "spt-25", d);
      const auto* full = find_row(report, "baseline", d);
      report_check(log, small->robustness_rate >= full->robustness_rate,
                   "robustness(spt-25) >= robustness(baseline) at delta " + std::to_string(d), ok);
    }
    const std::string eot_label = approaches.back().label;
    const auto* eot = find_row(report, eot_label, config.bench.eot_delta_int16);
    const auto* base = find_row(report, "baseline", config.bench.eot_delta_int16);
    if (eot != nullptr && base != nullptr) {
      report_check(log, eot->robustness_rate >= base->robustness_rate,
                   "robustness(" + eot_label + ") >= robustness(baseline) at its own delta", ok);
    }
  } else if (suite == "metrics") {
    const BenchmarkSummary summary = compare_metrics(model, pairs, config.attack_config(), threads);
    write_text(stem.string() + ".csv", to_csv(summary));
    write_text(stem.string() + ".json", to_json(summary, meta));
    log << to_csv(summary);
    double best_snr = -std::numeric_limits<double>::infinity();
    double tvd_snr = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : summary.rows) {
      report_check(log, r.success_rate >= 0.9, std::string(to_string(r.metric)) + " success rate >= 0.9", ok);
      if (std::isfinite(r.snr_mean)) best_snr = std::max(best_snr, r.snr_mean);
      if (r.metric == MetricKind::kTvd) tvd_snr = r.snr_mean;
    }
    report_check(log, std::isfinite(tvd_snr) && tvd_snr >= best_snr - 1.0, "tvd mean SNR within 1 dB of the best",
                 ok);
  } else {
    AttackConfig on = config.attack_config();
    on.key_point_weighting = true;
    on.lr_decay = true;
    AttackConfig off = on;
    off.key_point_weighting = false;
    off.lr_decay = false;
    const WptSpeedResult result = wpt_speed_trial(model, pairs, on, off, threads);
    write_text(stem.string() + ".csv", to_csv(result));
    write_text(stem.string() + ".json", to_json(result, meta));
    log << "median iterations to first success: wpt on " << result.median_on << ", wpt off " << result.median_off
        << '\n';
    report_check(log, result.median_on <= result.median_off, "median iterations wpt on <= wpt off", ok);
  }
  if (assert_claims && !ok) return kExitAssertion;
  return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weighted-sampling audio adversarial attack toolkit"};
  app.require_subcommand(1);
  // Global options may also follow the subcommand.
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string config_file, preset;
  std::vector<std::string> sets;
  // Flag overrides, applied last, by configuration key.
  std::map<std::string, std::string> overrides;
  bool assert_flag = false;

  app.add_option("--config", config_file, "Configuration file ([section] key = value)");
  app.add_option("--preset", preset, "Hyperparameter preset (paper)");
  app.add_option("--set", sets, "Override any configuration key: section.key=value");

  auto key_option = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(
        flag, [&overrides, key](const std::string& v) { overrides[key] = v; }, help);
  };
  auto attack_options = [&](CLI::App* sub) {
    key_option(sub, "--target", "attack.target", "Target phrase");
    key_option(sub, "--metric", "attack.metric", "tvd, linf, l2 or cosine");
    key_option(sub, "--c", "attack.c", "Metric trade-off constant");
    key_option(sub, "--gamma", "attack.gamma", "Total-variation weight");
    key_option(sub, "--spt-proportion", "attack.spt_proportion", "Fraction of perturbed samples");
    key_option(sub, "--omega", "attack.omega", "Key-point weight (> 1)");
    key_option(sub, "--lr0", "attack.lr0", "Initial step, int16 units");
    key_option(sub, "--beta", "attack.beta", "Learning-rate decay factor");
    key_option(sub, "--max-iters", "attack.max_iters", "Iteration budget");
    key_option(sub, "--decoder", "attack.decoder", "greedy or beam:<width>");
    key_option(sub, "--eot-samples", "attack.eot_samples", "Noise draws per EOT step (0 disables)");
    key_option(sub, "--eot-bound", "attack.eot_bound_int16", "EOT noise bound, int16 units");
    key_option(sub, "--seed", "attack.seed", "Attack seed");
    key_option(sub, "--model", "paths.model", "Model checkpoint");
    key_option(sub, "--out", "paths.output", "Output directory");
  };

  auto* gen = app.add_subcommand("gen-corpus", "Generate the synthetic tone-coded corpus");
  key_option(gen, "--out", "paths.corpus", "Corpus directory");
  key_option(gen, "--count", "corpus.utterances", "Number of utterances");
  key_option(gen, "--min-len", "corpus.min_length", "Minimum transcript length");
  key_option(gen, "--max-len", "corpus.max_length", "Maximum transcript length");
  key_option(gen, "--seed", "corpus.seed", "Corpus seed");

  auto* trn = app.add_subcommand("train", "Train the recurrent CTC recognizer");
  key_option(trn, "--corpus", "paths.corpus", "Corpus directory or manifest");
  key_option(trn, "--model", "paths.model", "Checkpoint to write");
  key_option(trn, "--out", "paths.output", "Report directory");
  key_option(trn, "--epochs", "train.epochs", "Training epochs");
  key_option(trn, "--lr", "train.lr", "Learning rate");
  key_option(trn, "--seed", "train.seed", "Training seed");
  trn->add_flag("--assert", assert_flag, "Exit 5 if the held-out CER misses its bound");

  auto* atk = app.add_subcommand("attack", "Generate one adversarial example");
  std::string input;
  atk->add_option("--input", input, "Input WAV")->required();
  attack_options(atk);
  atk->add_flag("--trace", [&overrides](std::int64_t) { overrides["attack.trace"] = "true"; },
                "Write trace.jsonl");
  atk->add_flag("--assert", assert_flag, "Exit 5 if the attack does not succeed");

  auto* bench = app.add_subcommand("bench", "Run a benchmark suite");
  std::string suite;
  bench->add_option("suite", suite, "robustness, metrics or wpt-speed")
      ->required()
      ->check(CLI::IsMember({"robustness", "metrics", "wpt-speed"}));
  attack_options(bench);
  key_option(bench, "--corpus", "paths.corpus", "Corpus directory or manifest");
  key_option(bench, "--pairs", "bench.pairs", "Number of attack pairs");
  key_option(bench, "--trials", "bench.trials", "Noise trials per example");
  key_option(bench, "--threads", "bench.threads", "Worker threads (0 = all cores)");
  bench->add_flag("--assert", assert_flag, "Exit 5 if a direction check fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig config;
    config.attack.record_trace = false;
    if (!config_file.empty()) config.apply_file(config_file);
    if (!preset.empty()) config.apply_preset(preset);
    for (const std::string& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + s + "'");
      config.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [key, value] : overrides) config.set(key, value);

    if (gen->parsed()) return cmd_gen_corpus(config, out);
    if (trn->parsed()) return cmd_train(config, assert_flag, out);
    if (atk->parsed()) return cmd_attack(config, input, assert_flag, out);
    return cmd_bench(config, suite, assert_flag, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UnreachableTargetError& e) {
    err << "unreachable target: " << e.what() << '\n';
    return kExitUnreachableTarget;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitModelFailure;
  } catch (const ModelLoadError& e) {
    err << "model failure: " << e.what() << '\n';
    return kExitModelFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace wsadv::cli
