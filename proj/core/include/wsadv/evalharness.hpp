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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wsadv/attack.hpp"
#include "wsadv/model.hpp"

namespace wsadv {

/// A source clip to attack and the phrase it should be transcribed as.
struct AttackPair {
  AudioClip clip;
  std::string source_transcript;
  std::string target;
};

/// Pairs clip i with the transcript of another corpus item that differs from
/// clip i's transcript and fits its frame budget. Deterministic in `seed`.
std::vector<AttackPair> make_cross_pairs(const Corpus& corpus, const ToyCtcModel& model, std::size_t count,
                                         std::uint64_t seed);

/// Ordered key/value pairs echoed into report metadata.
using Metadata = std::vector<std::pair<std::string, std::string>>;

double eval_success_rate(std::span<const AttackResult> results);

struct RobustnessOutcome {
  double robustness_rate = 0.0;
  double mean_wer = 0.0;
  std::size_t trials = 0;
};

/// Re-decodes every adversarial clip under trials_per_example uniform-noise
/// draws of half-width `bound` (normalized units). A trial counts as robust
/// only if the transcription still equals the target exactly; WER is taken
/// against the target and averaged over all trials. Unsuccessful results take
/// part too, so at bound 0 the rate equals the success rate.
RobustnessOutcome eval_robustness(const ToyCtcModel& model, std::span<const AttackResult> results, double bound,
                                  std::size_t trials_per_example, std::uint64_t seed,
                                  const DecoderSpec& decoder = {}, std::size_t threads = 0);

struct RobustnessRow {
  std::string approach;
  double delta_int16 = 0.0;
  double robustness_rate = 0.0;
  double mean_wer = 0.0;
  std::size_t trials = 0;
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;
  std::size_t trials_per_example = 0;
  std::size_t examples = 0;
  std::uint64_t seed = 0;
  /// Success rate of each approach before noise, by approach label.
  std::vector<std::pair<std::string, double>> success_rates;
};

/// One attack approach of the robustness table.
struct Approach {
  std::string label;
  AttackConfig config;
};

/// Attacks every pair with every approach, then measures robustness at each
/// bound (int16 units). Rows are ordered by approach, then bound.
RobustnessReport robustness_suite(const ToyCtcModel& model, std::span<const AttackPair> pairs,
                                  std::span<const Approach> approaches, std::span<const double> bounds_int16,
                                  std::size_t trials_per_example, std::uint64_t seed, std::size_t threads = 0);

struct MetricRow {
  MetricKind metric = MetricKind::kTvd;
  double c = 0.0;
  double snr_mean = 0.0;
  double dbx_mean = 0.0;
  double success_rate = 0.0;
  double mean_iterations_to_success = 0.0;
  double mean_wall_time_s = 0.0;
  std::size_t runs = 0;
};

struct BenchmarkSummary {
  std::vector<MetricRow> rows;
};

/// Runs the four metric variants of `base` on every pair. Each pair uses the
/// same seed (hence the same SPT mask) across variants. SNR and dB_x means
/// cover successful runs.
BenchmarkSummary compare_metrics(const ToyCtcModel& model, std::span<const AttackPair> pairs,
                                 const AttackConfig& base, std::size_t threads = 0);

struct WptSpeedResult {
  /// Iterations to first success per pair; empty when the run never succeeded.
  std::vector<std::optional<std::size_t>> iterations_on;
  std::vector<std::optional<std::size_t>> iterations_off;
  /// Medians with failed runs counted as max_iters + 1.
  double median_on = 0.0;
  double median_off = 0.0;
};

/// Paired runs of two configurations that share seeds (and therefore masks).
WptSpeedResult wpt_speed_trial(const ToyCtcModel& model, std::span<const AttackPair> pairs,
                               const AttackConfig& config_on, const AttackConfig& config_off,
                               std::size_t threads = 0);

/// Runs `config` (with per-pair seed config.seed + i and the pair's target)
/// over all pairs, in parallel, results in pair order. Uses the EOT loop
/// when eot_samples > 0.
std::vector<AttackResult> attack_all(const ToyCtcModel& model, std::span<const AttackPair> pairs,
                                     const AttackConfig& config, std::size_t threads = 0);

double median(std::vector<double> values);

// Report emission. JSON documents carry schema_version, a "metadata" object
// built from `metadata`, and "rows"; timing values live under a separate
// "timing" key so reruns can be compared byte-for-byte without it.
std::string to_csv(const RobustnessReport& report);
std::string to_json(const RobustnessReport& report, const Metadata& metadata);
std::string to_csv(const BenchmarkSummary& summary);
std::string to_json(const BenchmarkSummary& summary, const Metadata& metadata);
std::string to_csv(const WptSpeedResult& result);
std::string to_json(const WptSpeedResult& result, const Metadata& metadata);

/// AttackResult as a JSON document (without sample data or trace), and back.
std::string attack_result_to_json(const AttackResult& result, const Metadata& metadata = {});
AttackResult attack_result_from_json(const std::string& text);
/// One JSON object per line: iteration, loss_model, loss_metric, lr,
/// levenshtein, transcription.
std::string trace_to_jsonl(std::span<const TraceRecord> trace);

inline constexpr int kReportSchemaVersion = 1;

}  // namespace wsadv
