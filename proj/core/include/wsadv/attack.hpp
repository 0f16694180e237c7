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
#include <string_view>
#include <vector>

#include "wsadv/ctc.hpp"
#include "wsadv/model.hpp"
#include "wsadv/signal.hpp"

namespace wsadv {

enum class MetricKind { kTvd, kLinf, kL2, kCosine };

const char* to_string(MetricKind kind);
MetricKind parse_metric_kind(std::string_view name);
/// Trade-off constant c used with each metric unless overridden.
double default_trade_off(MetricKind kind);

enum class DecoderKind { kGreedy, kBeam };

struct DecoderSpec {
  DecoderKind kind = DecoderKind::kGreedy;
  std::size_t beam_width = 8;

  std::string to_string() const;
  static DecoderSpec parse(std::string_view text);  // "greedy" or "beam:<width>"
  bool operator==(const DecoderSpec&) const = default;
};

std::string decode(const LogitsMatrix& logits, const DecoderSpec& decoder);

struct AttackConfig {
  std::string target;
  MetricKind metric = MetricKind::kTvd;
  /// Unset means default_trade_off(metric).
  std::optional<double> c;
  double gamma = 10.0;
  double spt_proportion = 0.75;
  double omega = 1.2;
  /// Initial step in int16 units; the normalized step is lr0 / 32768.
  double lr0 = 100.0;
  double beta = 0.8;
  std::size_t decay_period = 50;
  std::size_t max_iters = 500;
  /// Key-point weighting engages once levenshtein(current, target) is at most this.
  std::size_t wpt_threshold = 3;
  bool key_point_weighting = true;
  bool lr_decay = true;
  DecoderSpec decoder;
  std::size_t eot_samples = 0;
  /// EOT noise bound in normalized units.
  double eot_bound = 0.0;
  std::uint64_t seed = 0;
  bool record_trace = true;

  double trade_off() const { return c.value_or(default_trade_off(metric)); }
  /// Throws ConfigError naming the first violated constraint.
  void validate() const;
};

struct MetricValue {
  double value = 0.0;
  /// (Sub)gradient with respect to delta.
  std::vector<double> grad;
};

/// (1/n) sum delta_i^2 + gamma * sum_j |(x+delta)_{j+1} - (x+delta)_j|.
/// The subgradient of |.| at 0 is taken as 0.
MetricValue metric_tvd(std::span<const double> x, std::span<const double> delta, double gamma);
/// max_i |delta_i|; subgradient on the first maximizing index.
MetricValue metric_linf(std::span<const double> x, std::span<const double> delta);
/// sqrt(sum delta_i^2); zero subgradient at delta = 0.
MetricValue metric_l2(std::span<const double> x, std::span<const double> delta);
/// 1 - cos(x, x + delta). Throws DomainError for an all-zero x.
MetricValue metric_cos(std::span<const double> x, std::span<const double> delta);
MetricValue evaluate_metric(MetricKind kind, std::span<const double> x, std::span<const double> delta, double gamma);

/// Exactly round(proportion * n) positions set, drawn without replacement.
/// Throws DomainError if that rounds to zero.
std::vector<std::uint8_t> spt_mask(std::size_t n, double proportion, std::uint64_t seed);

/// Sample intervals holding the characters that keep `current_text` from
/// `target`: align the two strings, map differing characters (and insertion
/// gaps) to frames through the alignment `path`, then to samples.
std::vector<Interval> asl_intervals(std::string_view current_text, std::string_view target,
                                    std::span<const std::size_t> path, const FrameView& view);

struct BestCandidate {
  std::vector<double> delta;
  double metric = 0.0;
  std::size_t iteration = 0;
};

struct AttackState {
  std::vector<double> delta;
  std::vector<std::uint8_t> mask;
  std::vector<double> alpha;
  double lr = 0.0;
  std::size_t decays = 0;
  std::size_t iteration = 0;
  /// Greedy alignment of the current x + delta (drives key-point location).
  TokenPath path;
  std::string greedy_text;
  /// Transcription under the configured decoder.
  std::string decoded_text;
  bool success_seen = false;
  std::optional<std::size_t> first_success;
  std::optional<BestCandidate> best;
};

struct TraceRecord {
  std::size_t iteration = 0;
  double loss_model = 0.0;
  double loss_metric = 0.0;
  double lr = 0.0;
  std::size_t levenshtein = 0;
  std::string transcription;

  bool operator==(const TraceRecord&) const = default;
};

struct CompositeLoss {
  double loss = 0.0;
  double loss_model = 0.0;
  double loss_metric = 0.0;
  std::vector<double> grad;
};

/// Weighted loss l_model(f(x + alpha*delta), t) + c * l_metric(x, delta) and
/// its gradient alpha * grad_model + c * grad_metric, zeroed off the mask.
/// With eot_samples > 0 the model term is averaged over uniform-noise draws.
CompositeLoss composite_loss_and_grad(const ToyCtcModel& model, std::span<const double> x, const AttackState& state,
                                      const AttackConfig& config);

/// Fresh state for x: delta = 0, the SPT mask, alpha = 1, lr = lr0 / 32768,
/// and the decodes of x itself. Success at iteration 0 is recorded.
AttackState init_attack(const ToyCtcModel& model, const AudioClip& x, const AttackConfig& config);

/// One projected sign-gradient step followed by decode, success bookkeeping
/// and the learning-rate schedule. Throws NumericError on a non-finite
/// gradient.
AttackState attack_step(const ToyCtcModel& model, const AudioClip& x, AttackState state, const AttackConfig& config,
                        TraceRecord* trace = nullptr);

struct AttackResult {
  std::string target;
  bool success = false;
  AudioClip adversarial;
  AudioClip delta;
  std::optional<std::size_t> iterations_to_first_success;
  std::size_t iterations_run = 0;
  std::string final_transcription;
  /// +infinity for an all-zero delta.
  double snr_db = 0.0;
  double dbx_delta = 0.0;
  double metric_value = 0.0;
  std::size_t perturbed_samples = 0;
  std::size_t untouched_samples = 0;
  double final_lr = 0.0;
  double wall_time_s = 0.0;
  std::vector<TraceRecord> trace;
  /// Set when a batch driver caught an error for this example.
  std::string error;
};

/// Throws UnreachableTargetError unless the target fits the clip's frames.
void check_target_reachable(const ToyCtcModel& model, const AudioClip& x, std::string_view target);

/// Runs the attack loop for max_iters iterations and returns the successful
/// iterate with the smallest metric value, or the last iterate on failure.
AttackResult run_attack(const ToyCtcModel& model, const AudioClip& x, const AttackConfig& config);
/// run_attack with the model gradient averaged over eot_samples noisy copies.
AttackResult run_attack_eot(const ToyCtcModel& model, const AudioClip& x, const AttackConfig& config);

}  // namespace wsadv
