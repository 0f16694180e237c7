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

#include "wsadv/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "wsadv/error.hpp"
#include "wsadv/rng.hpp"
#include "wsadv/textdist.hpp"

namespace wsadv {

namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_lengths(std::span<const double> x, std::span<const double> delta) {
  if (x.size() != delta.size()) {
    throw DomainError("metric: x has " + std::to_string(x.size()) + " samples, delta has " +
                      std::to_string(delta.size()));
  }
}

std::vector<double> apply_weights(std::span<const double> x, const AttackState& state) {
  std::vector<double> input(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) input[i] = x[i] + state.alpha[i] * state.delta[i];
  return input;
}

void refresh_decodes(const ToyCtcModel& model, std::span<const double> adversarial, const AttackConfig& config,
                     AttackState& state) {
  const LogitsMatrix logits = forward(model, adversarial);
  GreedyDecode greedy = greedy_decode(logits);
  state.path = std::move(greedy.path);
  state.greedy_text = std::move(greedy.text);
  state.decoded_text =
      config.decoder.kind == DecoderKind::kGreedy ? state.greedy_text : decode(logits, config.decoder);
}

std::vector<double> adversarial_of(std::span<const double> x, std::span<const double> delta) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + delta[i];
  return out;
}

void record_success(std::span<const double> x, const AttackConfig& config, AttackState& state) {
  if (state.decoded_text != config.target) return;
  state.success_seen = true;
  if (!state.first_success) state.first_success = state.iteration;
  const double m = evaluate_metric(config.metric, x, state.delta, config.gamma).value;
  if (!state.best || m < state.best->metric) state.best = BestCandidate{state.delta, m, state.iteration};
}

}  // namespace

const char* to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::kTvd:
      return "tvd";
    case MetricKind::kLinf:
      return "linf";
    case MetricKind::kL2:
      return "l2";
    case MetricKind::kCosine:
      return "cosine";
  }
  return "?";
}

MetricKind parse_metric_kind(std::string_view name) {
  for (MetricKind k : {MetricKind::kTvd, MetricKind::kLinf, MetricKind::kL2, MetricKind::kCosine}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown metric '" + std::string(name) + "' (expected tvd, linf, l2 or cosine)");
}

double default_trade_off(MetricKind kind) {
  switch (kind) {
    case MetricKind::kTvd:
      return 0.001;
    case MetricKind::kLinf:
      return 0.01;
    case MetricKind::kL2:
      return 0.001;
    case MetricKind::kCosine:
      return 1.0;
  }
  return 0.0;
}

std::string DecoderSpec::to_string() const {
  return kind == DecoderKind::kGreedy ? "greedy" : "beam:" + std::to_string(beam_width);
}

DecoderSpec DecoderSpec::parse(std::string_view text) {
  if (text == "greedy") return {};
  if (text.starts_with("beam")) {
    DecoderSpec d{DecoderKind::kBeam, 8};
    if (text.size() > 4) {
      if (text[4] != ':') throw ConfigError("decoder must be 'greedy' or 'beam:<width>'");
      const std::string width(text.substr(5));
      std::size_t used = 0;
      long long w = 0;
      try {
        w = std::stoll(width, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != width.size() || w < 1) throw ConfigError("beam width must be a positive integer");
      d.beam_width = static_cast<std::size_t>(w);
    }
    return d;
  }
  throw ConfigError("decoder must be 'greedy' or 'beam:<width>'");
}

std::string decode(const LogitsMatrix& logits, const DecoderSpec& decoder) {
  if (decoder.kind == DecoderKind::kGreedy) return greedy_decode(logits).text;
  return beam_search_decode(logits, decoder.beam_width).text;
}

void AttackConfig::validate() const {
  if (target.empty()) throw ConfigError("target phrase is empty");
  if (!(spt_proportion > 0.0 && spt_proportion <= 1.0)) throw ConfigError("spt_proportion must be in (0, 1]");
  if (!(omega > 1.0)) throw ConfigError("omega must be greater than 1");
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must be in (0, 1)");
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (!(trade_off() >= 0.0)) throw ConfigError("c must be non-negative");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  if (decay_period == 0) throw ConfigError("decay_period must be positive");
  if (!(eot_bound >= 0.0)) throw ConfigError("eot_bound must be non-negative");
  if (decoder.kind == DecoderKind::kBeam && decoder.beam_width == 0) throw ConfigError("beam width must be positive");
}

MetricValue metric_tvd(std::span<const double> x, std::span<const double> delta, double gamma) {
  check_lengths(x, delta);
  const std::size_t n = x.size();
  if (n < 2) throw DomainError("metric_tvd needs at least two samples");
  MetricValue out;
  out.grad.assign(n, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  double closeness = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    closeness += delta[i] * delta[i];
    out.grad[i] = 2.0 * delta[i] * inv_n;
  }
  double variation = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double d = (x[j + 1] + delta[j + 1]) - (x[j] + delta[j]);
    variation += std::abs(d);
    const double s = gamma * sgn(d);
    out.grad[j + 1] += s;
    out.grad[j] -= s;
  }
  out.value = closeness * inv_n + gamma * variation;
  return out;
}

MetricValue metric_linf(std::span<const double> x, std::span<const double> delta) {
  check_lengths(x, delta);
  MetricValue out;
  out.grad.assign(delta.size(), 0.0);
  std::size_t arg = 0;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    if (std::abs(delta[i]) > out.value) {
      out.value = std::abs(delta[i]);
      arg = i;
    }
  }
  if (out.value > 0.0) out.grad[arg] = sgn(delta[arg]);
  return out;
}

MetricValue metric_l2(std::span<const double> x, std::span<const double> delta) {
  check_lengths(x, delta);
  MetricValue out;
  out.grad.assign(delta.size(), 0.0);
  double sq = 0.0;
  for (double d : delta) sq += d * d;
  out.value = std::sqrt(sq);
  if (out.value > 0.0) {
    for (std::size_t i = 0; i < delta.size(); ++i) out.grad[i] = delta[i] / out.value;
  }
  return out;
}

MetricValue metric_cos(std::span<const double> x, std::span<const double> delta) {
  check_lengths(x, delta);
  double xx = 0.0, uu = 0.0, xu = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = x[i] + delta[i];
    xx += x[i] * x[i];
    uu += u * u;
    xu += x[i] * u;
  }
  if (xx == 0.0) throw DomainError("metric_cos: x has zero norm");
  MetricValue out;
  out.grad.assign(x.size(), 0.0);
  if (uu == 0.0) {
    // Cosine is undefined at x + delta = 0; report orthogonality.
    out.value = 1.0;
    return out;
  }
  const double nx = std::sqrt(xx), nu = std::sqrt(uu);
  const double cos = xu / (nx * nu);
  out.value = 1.0 - cos;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = x[i] + delta[i];
    out.grad[i] = -(x[i] / (nx * nu) - cos * u / uu);
  }
  return out;
}

MetricValue evaluate_metric(MetricKind kind, std::span<const double> x, std::span<const double> delta, double gamma) {
  switch (kind) {
    case MetricKind::kTvd:
      return metric_tvd(x, delta, gamma);
    case MetricKind::kLinf:
      return metric_linf(x, delta);
    case MetricKind::kL2:
      return metric_l2(x, delta);
    case MetricKind::kCosine:
      return metric_cos(x, delta);
  }
  throw DomainError("unknown metric kind");
}

std::vector<std::uint8_t> spt_mask(std::size_t n, double proportion, std::uint64_t seed) {
  if (!(proportion > 0.0 && proportion <= 1.0)) throw DomainError("SPT proportion must be in (0, 1]");
  const auto m = static_cast<std::size_t>(std::llround(proportion * static_cast<double>(n)));
  if (m == 0) throw DomainError("SPT proportion selects no samples out of " + std::to_string(n));
  std::vector<std::uint8_t> mask(n, 0);
  if (m == n) {
    std::fill(mask.begin(), mask.end(), 1);
    return mask;
  }
  // Partial Fisher-Yates: the first m slots of the permutation are chosen.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(mix_seed(seed, 0x6d61736bULL));
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(idx[i], idx[i + rng.below(n - i)]);
    mask[idx[i]] = 1;
  }
  return mask;
}

std::vector<Interval> asl_intervals(std::string_view current_text, std::string_view target,
                                    std::span<const std::size_t> path, const FrameView& view) {
  if (collapse(path) != current_text) {
    throw DomainError("alignment path does not collapse to \"" + std::string(current_text) + "\"");
  }
  std::vector<CharLocus> loci;
  for (const AlignStep& step : align_chars(current_text, target)) {
    switch (step.op) {
      case EditOp::kMatch:
        break;
      case EditOp::kSubstitute:
      case EditOp::kDelete:
        loci.push_back(CharLocus::emitted(step.hyp));
        break;
      case EditOp::kInsert:
        loci.push_back(CharLocus::gap(step.hyp));
        break;
    }
  }
  if (loci.empty()) return {};
  const auto frames = char_frames(path, loci);
  return frame_intervals(view, frames);
}

CompositeLoss composite_loss_and_grad(const ToyCtcModel& model, std::span<const double> x, const AttackState& state,
                                      const AttackConfig& config) {
  const std::size_t n = x.size();
  if (state.delta.size() != n || state.mask.size() != n || state.alpha.size() != n) {
    throw DomainError("attack state does not match the clip length");
  }
  const std::vector<double> input = apply_weights(x, state);
  CompositeLoss out;
  std::vector<double> model_grad;
  if (config.eot_samples == 0 || config.eot_bound == 0.0) {
    // Zero-width noise leaves every draw identical to the clean input.
    InputGradient g = loss_and_input_grad(model, input, config.target);
    out.loss_model = g.loss;
    model_grad = std::move(g.grad);
  } else {
    model_grad.assign(n, 0.0);
    AudioClip clean{input, kDefaultSampleRate};
    const std::uint64_t base = mix_seed(config.seed, 0x656f74ULL + state.iteration);
    for (std::size_t k = 0; k < config.eot_samples; ++k) {
      const AudioClip noisy = add_uniform_noise(clean, config.eot_bound, mix_seed(base, k));
      InputGradient g = loss_and_input_grad(model, noisy.samples, config.target);
      out.loss_model += g.loss;
      for (std::size_t i = 0; i < n; ++i) {
        // Saturated samples do not depend on the input.
        const bool clamped = std::abs(noisy.samples[i]) == 1.0 && std::abs(input[i]) + config.eot_bound > 1.0;
        if (!clamped) model_grad[i] += g.grad[i];
      }
    }
    const double inv = 1.0 / static_cast<double>(config.eot_samples);
    out.loss_model *= inv;
    for (double& v : model_grad) v *= inv;
  }

  const double c = config.trade_off();
  const MetricValue metric = evaluate_metric(config.metric, x, state.delta, config.gamma);
  out.loss_metric = metric.value;
  out.loss = out.loss_model + c * metric.value;
  out.grad.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (state.mask[i]) out.grad[i] = state.alpha[i] * model_grad[i] + c * metric.grad[i];
  }
  return out;
}

AttackState init_attack(const ToyCtcModel& model, const AudioClip& x, const AttackConfig& config) {
  config.validate();
  x.validate_normalized();
  check_target_reachable(model, x, config.target);
  AttackState state;
  const std::size_t n = x.size();
  state.delta.assign(n, 0.0);
  state.mask = spt_mask(n, config.spt_proportion, config.seed);
  state.alpha.assign(n, 1.0);
  state.lr = config.lr0 / kInt16Scale;
  refresh_decodes(model, x.samples, config, state);
  record_success(x.samples, config, state);
  return state;
}

AttackState attack_step(const ToyCtcModel& model, const AudioClip& x, AttackState state, const AttackConfig& config,
                        TraceRecord* trace) {
  const std::size_t n = x.size();

  // Key points come from the alignment of the current iterate.
  std::fill(state.alpha.begin(), state.alpha.end(), 1.0);
  if (config.key_point_weighting && state.greedy_text != config.target &&
      levenshtein(state.greedy_text, config.target) <= config.wpt_threshold) {
    const FrameView view = model.frames_for(n);
    for (const Interval& iv : asl_intervals(state.greedy_text, config.target, state.path, view)) {
      std::fill(state.alpha.begin() + static_cast<std::ptrdiff_t>(iv.begin),
                state.alpha.begin() + static_cast<std::ptrdiff_t>(iv.end), config.omega);
    }
  }

  const CompositeLoss loss = composite_loss_and_grad(model, x.samples, state, config);
  if (!std::isfinite(loss.loss)) throw NumericError("attack loss is not finite", state.iteration);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(loss.grad[i])) throw NumericError("attack gradient is not finite", state.iteration);
  }
  const double lr_used = state.lr;
  for (std::size_t i = 0; i < n; ++i) {
    if (!state.mask[i] || loss.grad[i] == 0.0) continue;
    state.delta[i] -= lr_used * sgn(loss.grad[i]);
    // Project so that x + delta stays a valid sample.
    const double moved = x.samples[i] + state.delta[i];
    if (moved > 1.0) state.delta[i] = 1.0 - x.samples[i];
    if (moved < -1.0) state.delta[i] = -1.0 - x.samples[i];
  }
  ++state.iteration;

  refresh_decodes(model, adversarial_of(x.samples, state.delta), config, state);
  record_success(x.samples, config, state);

  if (config.lr_decay && state.success_seen && state.iteration % config.decay_period == 0) {
    state.lr *= config.beta;
    ++state.decays;
  }

  if (trace != nullptr) {
    *trace = TraceRecord{state.iteration, loss.loss_model, loss.loss_metric, lr_used,
                         levenshtein(state.decoded_text, config.target), state.decoded_text};
  }
  return state;
}

void check_target_reachable(const ToyCtcModel& model, const AudioClip& x, std::string_view target) {
  if (!Alphabet::is_valid_text(target)) {
    throw UnreachableTargetError("target \"" + std::string(target) + "\" has characters outside the alphabet");
  }
  const std::size_t frames = model.frames_for(x.size()).frame_count();
  const std::size_t need = min_frames_for(target);
  if (need > frames) {
    throw UnreachableTargetError("target \"" + std::string(target) + "\" needs " + std::to_string(need) +
                                 " frames but the clip has " + std::to_string(frames));
  }
}

namespace {

AttackResult attack_loop(const ToyCtcModel& model, const AudioClip& x, const AttackConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  AttackState state = init_attack(model, x, config);
  AttackResult result;
  result.target = config.target;
  if (config.record_trace) {
    result.trace.push_back(TraceRecord{0, ctc_loss(forward(model, x), config.target),
                                       evaluate_metric(config.metric, x.samples, state.delta, config.gamma).value,
                                       state.lr, levenshtein(state.decoded_text, config.target), state.decoded_text});
  }
  // An input that already decodes as the target needs no perturbation.
  const bool already_target = state.success_seen;
  while (!already_target && state.iteration < config.max_iters) {
    // A zero-metric success cannot be improved on.
    if (state.best && state.best->metric == 0.0) break;
    TraceRecord rec;
    state = attack_step(model, x, std::move(state), config, config.record_trace ? &rec : nullptr);
    if (config.record_trace) result.trace.push_back(std::move(rec));
  }

  result.success = state.best.has_value();
  std::vector<double> delta = result.success ? state.best->delta : state.delta;
  result.iterations_to_first_success = state.first_success;
  result.iterations_run = state.iteration;
  result.final_lr = state.lr;
  result.metric_value = evaluate_metric(config.metric, x.samples, delta, config.gamma).value;
  result.adversarial = AudioClip{adversarial_of(x.samples, delta), x.sample_rate};
  result.final_transcription = decode(forward(model, result.adversarial), config.decoder);
  result.snr_db = snr_db(x.samples, delta);
  result.dbx_delta = dbx_delta(x.samples, delta);
  for (std::size_t i = 0; i < delta.size(); ++i) {
    if (result.adversarial.samples[i] == x.samples[i]) ++result.untouched_samples;
  }
  result.perturbed_samples = delta.size() - result.untouched_samples;
  result.delta = AudioClip{std::move(delta), x.sample_rate};
  result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace

AttackResult run_attack(const ToyCtcModel& model, const AudioClip& x, const AttackConfig& config) {
  AttackConfig plain = config;
  plain.eot_samples = 0;
  return attack_loop(model, x, plain);
}

AttackResult run_attack_eot(const ToyCtcModel& model, const AudioClip& x, const AttackConfig& config) {
  if (config.eot_samples == 0) throw ConfigError("EOT attack needs eot_samples >= 1");
  return attack_loop(model, x, config);
}

}  // namespace wsadv
