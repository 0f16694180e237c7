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

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wsadv/ctc.hpp"
#include "wsadv/signal.hpp"

namespace wsadv {

struct ModelShape {
  std::size_t frame_length = 160;
  std::size_t hop = 160;
  std::size_t hidden = 64;
  std::size_t vocab = Alphabet::kSize;

  bool operator==(const ModelShape&) const = default;
};

/// Single-layer tanh recurrent CTC recognizer over raw sample frames:
///
///   h_t      = tanh(W_in * frame_t + W_rec * h_{t-1} + b),  h_0 = 0
///   logits_t = W_out * h_t + b_out
struct ToyCtcModel {
  ModelShape shape;
  Eigen::MatrixXd input_weights;      // hidden x frame_length
  Eigen::MatrixXd recurrent_weights;  // hidden x hidden
  Eigen::VectorXd hidden_bias;        // hidden
  Eigen::MatrixXd output_weights;     // vocab x hidden
  Eigen::VectorXd output_bias;        // vocab

  /// All parameters zero.
  static ToyCtcModel zeros(const ModelShape& shape);
  /// All parameters uniform on (-scale, scale) from `seed`.
  static ToyCtcModel initialize(const ModelShape& shape, std::uint64_t seed, double scale = 0.08);

  FrameView frames_for(std::size_t signal_length) const {
    return {shape.frame_length, shape.hop, signal_length};
  }
  std::size_t parameter_count() const;
  bool all_finite() const;

  bool operator==(const ToyCtcModel& other) const;
};

LogitsMatrix forward(const ToyCtcModel& model, std::span<const double> samples);
inline LogitsMatrix forward(const ToyCtcModel& model, const AudioClip& clip) { return forward(model, clip.samples); }

struct InputGradient {
  double loss = 0.0;
  LogitsMatrix logits;
  /// d ctc_loss / d sample, one entry per input sample.
  std::vector<double> grad;
};

/// CTC loss of the model's output against `target` and its exact gradient
/// with respect to every raw input sample (backpropagation through time).
InputGradient loss_and_input_grad(const ToyCtcModel& model, std::span<const double> samples, std::string_view target);
std::vector<double> grad_wrt_input(const ToyCtcModel& model, const AudioClip& clip, std::string_view target);

/// Parameter gradient with the same layout as ToyCtcModel.
struct ModelGradient {
  Eigen::MatrixXd input_weights;
  Eigen::MatrixXd recurrent_weights;
  Eigen::VectorXd hidden_bias;
  Eigen::MatrixXd output_weights;
  Eigen::VectorXd output_bias;

  static ModelGradient zeros_like(const ToyCtcModel& model);
  void add(const ModelGradient& other);
  void scale(double factor);
  double squared_norm() const;
};

/// Loss plus parameter gradient for a single utterance.
double loss_and_param_grad(const ToyCtcModel& model, std::span<const double> samples, std::string_view target,
                           ModelGradient& grad);

void save_model(const ToyCtcModel& model, const std::filesystem::path& path);
ToyCtcModel load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic tone-coded corpus.

struct SynthOptions {
  std::size_t frame_length = 160;
  std::size_t frames_per_char = 6;
  std::size_t silence_frames = 2;
  int sample_rate = kDefaultSampleRate;
  double amplitude = 0.3;
  double noise = 0.01;
};

inline constexpr std::size_t kMaxUtteranceChars = 32;

/// Tone frequencies for a character: 400 + 35*idx Hz and 1200 + 20*idx Hz,
/// idx being the alphabet index.
std::pair<double, double> tone_frequencies(char c);

/// Renders each character as a dual-sine tone burst (phase zero at the burst
/// onset, peak amplitude `amplitude`) separated by silence, plus uniform
/// noise of amplitude `noise` seeded by `seed`.
AudioClip synth_utterance(std::string_view text, std::uint64_t seed, const SynthOptions& options = {});

struct CorpusItem {
  AudioClip clip;
  std::string transcript;
};

struct Corpus {
  std::vector<CorpusItem> items;
  std::uint64_t seed = 0;
};

/// Lowercase words of the paper-style demo phrases plus a short built-in list.
const std::vector<std::string>& default_word_list();

/// Transcripts are one or two words from `words` joined by a space, with
/// character length in [min_len, max_len]. Item i uses seed mix_seed(seed, i).
Corpus generate_corpus(std::size_t count, std::size_t min_len, std::size_t max_len, std::uint64_t seed,
                       const std::vector<std::string>& words = default_word_list(), const SynthOptions& options = {});

/// Writes utt_NNNN.wav files plus `manifest.tsv` (`<wav-path>\t<transcript>`,
/// paths relative to the directory). Returns the manifest path.
std::filesystem::path write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
/// Reads a manifest; relative WAV paths resolve against its directory.
Corpus read_corpus(const std::filesystem::path& manifest);

// ---------------------------------------------------------------------------
// Training.

struct TrainOptions {
  std::size_t epochs = 200;
  double lr = 0.003;
  std::size_t batch_size = 10;
  double clip_norm = 5.0;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
};

struct TrainingReport {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;  // running mean of mini-batch losses per epoch
  double heldout_cer = 0.0;
  std::size_t train_count = 0;
  std::size_t heldout_count = 0;
  std::vector<std::size_t> heldout_indices;
};

struct TrainOutcome {
  ToyCtcModel model;
  TrainingReport report;
};

/// Splits off a seeded held-out slice, then runs Adam with global
/// gradient-norm clipping on mini-batch mean CTC loss. Throws NumericError
/// naming the epoch if the loss stops being finite.
TrainOutcome train(ToyCtcModel model, const Corpus& corpus, const TrainOptions& options);

/// Mean CTC loss of the model over the selected items.
double mean_loss(const ToyCtcModel& model, const Corpus& corpus, std::span<const std::size_t> indices,
                 std::size_t threads = 0);
/// Corpus-level greedy character error rate over the selected items.
double greedy_cer(const ToyCtcModel& model, const Corpus& corpus, std::span<const std::size_t> indices,
                  std::size_t threads = 0);

}  // namespace wsadv
