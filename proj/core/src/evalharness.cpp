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

#include "wsadv/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <sstream>

#include "wsadv/error.hpp"
#include "wsadv/parallel.hpp"
#include "wsadv/rng.hpp"
#include "wsadv/textdist.hpp"

namespace wsadv {

using nlohmann::ordered_json;

namespace {

// JSON has no infinity; non-finite values become null.
ordered_json number_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json metadata_json(const Metadata& metadata) {
  ordered_json m = ordered_json::object();
  for (const auto& [k, v] : metadata) m[k] = v;
  return m;
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  std::ostringstream out;
  out << std::setprecision(10) << v;
  return out.str();
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::vector<AttackPair> make_cross_pairs(const Corpus& corpus, const ToyCtcModel& model, std::size_t count,
                                         std::uint64_t seed) {
  const std::size_t n = corpus.items.size();
  if (n < 2) throw DomainError("cross pairs need at least two corpus items");
  Rng rng(mix_seed(seed, 0x7061697273ULL));
  std::vector<AttackPair> pairs;
  pairs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const CorpusItem& src = corpus.items[i % n];
    const std::size_t frames = model.frames_for(src.clip.size()).frame_count();
    std::vector<std::size_t> candidates;
    for (std::size_t j = 0; j < n; ++j) {
      const auto& t = corpus.items[j].transcript;
      if (t != src.transcript && min_frames_for(t) <= frames) candidates.push_back(j);
    }
    if (candidates.empty()) throw DomainError("no reachable target for corpus item " + std::to_string(i % n));
    const auto& target = corpus.items[candidates[rng.below(candidates.size())]].transcript;
    pairs.push_back({src.clip, src.transcript, target});
  }
  return pairs;
}

double eval_success_rate(std::span<const AttackResult> results) {
  if (results.empty()) throw DomainError("success rate of an empty result list");
  const auto ok = std::count_if(results.begin(), results.end(), [](const AttackResult& r) { return r.success; });
  return static_cast<double>(ok) / static_cast<double>(results.size());
}

RobustnessOutcome eval_robustness(const ToyCtcModel& model, std::span<const AttackResult> results, double bound,
                                  std::size_t trials_per_example, std::uint64_t seed, const DecoderSpec& decoder,
                                  std::size_t threads) {
  if (!(bound >= 0.0)) throw DomainError("noise bound must be non-negative");
  if (results.empty()) throw DomainError("robustness of an empty result list");
  if (trials_per_example == 0) throw DomainError("trials_per_example must be positive");
  const std::size_t total = results.size() * trials_per_example;
  std::vector<std::uint8_t> robust(total, 0);
  std::vector<double> wers(total, 1.0);
  parallel_for(
      total,
      [&](std::size_t k) {
        const std::size_t e = k / trials_per_example;
        const std::size_t trial = k % trials_per_example;
        const AttackResult& r = results[e];
        if (r.adversarial.samples.empty()) return;  // errored example: counts as a failure
        const AudioClip noisy = add_uniform_noise(r.adversarial, bound, mix_seed(seed, e * 1000003ULL + trial));
        const std::string text = decode(forward(model, noisy), decoder);
        robust[k] = text == r.target;
        wers[k] = wer(r.target, text).ratio;
      },
      threads);
  RobustnessOutcome out;
  out.trials = total;
  out.robustness_rate =
      static_cast<double>(std::count(robust.begin(), robust.end(), std::uint8_t{1})) / static_cast<double>(total);
  out.mean_wer = std::accumulate(wers.begin(), wers.end(), 0.0) / static_cast<double>(total);
  return out;
}

std::vector<AttackResult> attack_all(const ToyCtcModel& model, std::span<const AttackPair> pairs,
                                     const AttackConfig& config, std::size_t threads) {
  std::vector<AttackResult> results(pairs.size());
  parallel_for(
      pairs.size(),
      [&](std::size_t i) {
        AttackConfig cfg = config;
        cfg.target = pairs[i].target;
        cfg.seed = config.seed + i;
        try {
          results[i] = cfg.eot_samples > 0 ? run_attack_eot(model, pairs[i].clip, cfg)
                                           : run_attack(model, pairs[i].clip, cfg);
        } catch (const std::exception& e) {
          results[i] = AttackResult{};
          results[i].target = cfg.target;
          results[i].error = e.what();
        }
      },
      threads);
  return results;
}

RobustnessReport robustness_suite(const ToyCtcModel& model, std::span<const AttackPair> pairs,
                                  std::span<const Approach> approaches, std::span<const double> bounds_int16,
                                  std::size_t trials_per_example, std::uint64_t seed, std::size_t threads) {
  RobustnessReport report;
  report.trials_per_example = trials_per_example;
  report.examples = pairs.size();
  report.seed = seed;
  for (const Approach& approach : approaches) {
    const auto results = attack_all(model, pairs, approach.config, threads);
    report.success_rates.emplace_back(approach.label, eval_success_rate(results));
    for (double d : bounds_int16) {
      // The same noise seeds for every approach keep rows paired.
      const RobustnessOutcome o = eval_robustness(model, results, d / kInt16Scale, trials_per_example, seed,
                                                  approach.config.decoder, threads);
      report.rows.push_back({approach.label, d, o.robustness_rate, o.mean_wer, o.trials});
    }
  }
  return report;
}

BenchmarkSummary compare_metrics(const ToyCtcModel& model, std::span<const AttackPair> pairs,
                                 const AttackConfig& base, std::size_t threads) {
  BenchmarkSummary summary;
  for (MetricKind kind : {MetricKind::kTvd, MetricKind::kLinf, MetricKind::kL2, MetricKind::kCosine}) {
    AttackConfig cfg = base;
    cfg.metric = kind;
    cfg.c.reset();
    const auto results = attack_all(model, pairs, cfg, threads);
    MetricRow row;
    row.metric = kind;
    row.c = cfg.trade_off();
    row.runs = results.size();
    row.success_rate = eval_success_rate(results);
    std::vector<double> snr, dbx, iters, wall;
    for (const AttackResult& r : results) {
      wall.push_back(r.wall_time_s);
      if (!r.success) continue;
      if (std::isfinite(r.snr_db)) snr.push_back(r.snr_db);
      if (std::isfinite(r.dbx_delta)) dbx.push_back(r.dbx_delta);
      iters.push_back(static_cast<double>(*r.iterations_to_first_success));
    }
    row.snr_mean = mean_of(snr);
    row.dbx_mean = mean_of(dbx);
    row.mean_iterations_to_success = mean_of(iters);
    row.mean_wall_time_s = mean_of(wall);
    summary.rows.push_back(row);
  }
  return summary;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

WptSpeedResult wpt_speed_trial(const ToyCtcModel& model, std::span<const AttackPair> pairs,
                               const AttackConfig& config_on, const AttackConfig& config_off, std::size_t threads) {
  if (pairs.empty()) throw DomainError("wpt_speed_trial needs at least one pair");
  WptSpeedResult out;
  auto collect = [&](const AttackConfig& cfg, std::vector<std::optional<std::size_t>>& iters) {
    std::vector<double> counted;
    for (const AttackResult& r : attack_all(model, pairs, cfg, threads)) {
      iters.push_back(r.iterations_to_first_success);
      counted.push_back(static_cast<double>(r.iterations_to_first_success.value_or(cfg.max_iters + 1)));
    }
    return median(counted);
  };
  out.median_on = collect(config_on, out.iterations_on);
  out.median_off = collect(config_off, out.iterations_off);
  return out;
}

std::string to_csv(const RobustnessReport& report) {
  std::ostringstream out;
  out << "approach,delta_int16,robustness_rate,mean_wer,trials\n";
  for (const auto& r : report.rows) {
    out << r.approach << ',' << csv_number(r.delta_int16) << ',' << csv_number(r.robustness_rate) << ','
        << csv_number(r.mean_wer) << ',' << r.trials << '\n';
  }
  return out.str();
}

std::string to_json(const RobustnessReport& report, const Metadata& metadata) {
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "robustness";
  j["metadata"] = metadata_json(metadata);
  j["trials_per_example"] = report.trials_per_example;
  j["examples"] = report.examples;
  j["seed"] = report.seed;
  ordered_json success = ordered_json::object();
  for (const auto& [label, rate] : report.success_rates) success[label] = rate;
  j["success_rates"] = success;
  j["rows"] = ordered_json::array();
  for (const auto& r : report.rows) {
    j["rows"].push_back({{"approach", r.approach},
                         {"delta_int16", r.delta_int16},
                         {"robustness_rate", r.robustness_rate},
                         {"mean_wer", r.mean_wer},
                         {"trials", r.trials}});
  }
  return j.dump(2) + "\n";
}

std::string to_csv(const BenchmarkSummary& summary) {
  std::ostringstream out;
  out << "metric,c,snr_mean,dbx_mean,success_rate,mean_iterations_to_success,mean_wall_time_s,runs\n";
  for (const auto& r : summary.rows) {
    out << to_string(r.metric) << ',' << csv_number(r.c) << ',' << csv_number(r.snr_mean) << ','
        << csv_number(r.dbx_mean) << ',' << csv_number(r.success_rate) << ','
        << csv_number(r.mean_iterations_to_success) << ',' << csv_number(r.mean_wall_time_s) << ',' << r.runs
        << '\n';
  }
  return out.str();
}

std::string to_json(const BenchmarkSummary& summary, const Metadata& metadata) {
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "metrics";
  j["metadata"] = metadata_json(metadata);
  j["rows"] = ordered_json::array();
  ordered_json timing = ordered_json::object();
  for (const auto& r : summary.rows) {
    j["rows"].push_back({{"metric", to_string(r.metric)},
                         {"c", r.c},
                         {"snr_mean", number_or_null(r.snr_mean)},
                         {"dbx_mean", number_or_null(r.dbx_mean)},
                         {"success_rate", r.success_rate},
                         {"mean_iterations_to_success", number_or_null(r.mean_iterations_to_success)},
                         {"runs", r.runs}});
    timing[to_string(r.metric)] = {{"mean_wall_time_s", number_or_null(r.mean_wall_time_s)}};
  }
  j["timing"] = timing;
  return j.dump(2) + "\n";
}

std::string to_csv(const WptSpeedResult& result) {
  std::ostringstream out;
  out << "pair,iterations_wpt_on,iterations_wpt_off\n";
  auto cell = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string("fail"); };
  for (std::size_t i = 0; i < result.iterations_on.size(); ++i) {
    out << i << ',' << cell(result.iterations_on[i]) << ',' << cell(result.iterations_off[i]) << '\n';
  }
  out << "median," << csv_number(result.median_on) << ',' << csv_number(result.median_off) << '\n';
  return out.str();
}

std::string to_json(const WptSpeedResult& result, const Metadata& metadata) {
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "wpt-speed";
  j["metadata"] = metadata_json(metadata);
  auto vec = [](const std::vector<std::optional<std::size_t>>& v) {
    ordered_json a = ordered_json::array();
    for (const auto& x : v) a.push_back(x ? ordered_json(*x) : ordered_json(nullptr));
    return a;
  };
  j["rows"] = {{{"arm", "wpt_on"}, {"median_iterations", result.median_on}, {"iterations", vec(result.iterations_on)}},
               {{"arm", "wpt_off"}, {"median_iterations", result.median_off}, {"iterations", vec(result.iterations_off)}}};
  return j.dump(2) + "\n";
}

std::string attack_result_to_json(const AttackResult& r, const Metadata& metadata) {
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "attack_result";
  j["metadata"] = metadata_json(metadata);
  j["target"] = r.target;
  j["success"] = r.success;
  j["final_transcription"] = r.final_transcription;
  j["iterations_to_first_success"] =
      r.iterations_to_first_success ? ordered_json(*r.iterations_to_first_success) : ordered_json(nullptr);
  j["iterations_run"] = r.iterations_run;
  j["snr_db"] = number_or_null(r.snr_db);
  j["snr_infinite"] = std::isinf(r.snr_db) && r.snr_db > 0;
  j["dbx_delta"] = number_or_null(r.dbx_delta);
  j["dbx_infinite"] = std::isinf(r.dbx_delta) && r.dbx_delta > 0;
  j["metric_value"] = r.metric_value;
  j["perturbed_samples"] = r.perturbed_samples;
  j["untouched_samples"] = r.untouched_samples;
  j["sample_rate"] = r.adversarial.sample_rate;
  j["final_lr"] = r.final_lr;
  j["error"] = r.error;
  j["timing"] = {{"wall_time_s", r.wall_time_s}};
  return j.dump(2) + "\n";
}

AttackResult attack_result_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("attack result JSON: ") + e.what());
  }
  if (j.value("schema_version", 0) != kReportSchemaVersion || j.value("kind", "") != "attack_result") {
    throw Error("attack result JSON: unexpected schema or kind");
  }
  const double inf = std::numeric_limits<double>::infinity();
  AttackResult r;
  r.target = j.at("target").get<std::string>();
  r.success = j.at("success").get<bool>();
  r.final_transcription = j.at("final_transcription").get<std::string>();
  if (!j.at("iterations_to_first_success").is_null()) {
    r.iterations_to_first_success = j.at("iterations_to_first_success").get<std::size_t>();
  }
  r.iterations_run = j.at("iterations_run").get<std::size_t>();
  r.snr_db = j.at("snr_db").is_null() ? (j.at("snr_infinite").get<bool>() ? inf : std::nan(""))
                                      : j.at("snr_db").get<double>();
  r.dbx_delta = j.at("dbx_delta").is_null() ? (j.at("dbx_infinite").get<bool>() ? inf : std::nan(""))
                                            : j.at("dbx_delta").get<double>();
  r.metric_value = j.at("metric_value").get<double>();
  r.perturbed_samples = j.at("perturbed_samples").get<std::size_t>();
  r.untouched_samples = j.at("untouched_samples").get<std::size_t>();
  r.adversarial.sample_rate = j.at("sample_rate").get<int>();
  r.delta.sample_rate = r.adversarial.sample_rate;
  r.final_lr = j.at("final_lr").get<double>();
  r.error = j.at("error").get<std::string>();
  r.wall_time_s = j.at("timing").at("wall_time_s").get<double>();
  return r;
}

std::string trace_to_jsonl(std::span<const TraceRecord> trace) {
  std::string out;
  for (const TraceRecord& t : trace) {
    ordered_json j;
    j["iteration"] = t.iteration;
    j["loss_model"] = number_or_null(t.loss_model);
    j["loss_metric"] = number_or_null(t.loss_metric);
    j["lr"] = t.lr;
    j["levenshtein"] = t.levenshtein;
    j["transcription"] = t.transcription;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace wsadv
