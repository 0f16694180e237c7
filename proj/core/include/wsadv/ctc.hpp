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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wsadv {

/// Token inventory shared by the recognizer and the decoders: blank, the 26
/// lowercase letters, and space. Instances with a smaller vocabulary V use
/// the first V tokens.
struct Alphabet {
  static constexpr std::string_view kTokens = "-abcdefghijklmnopqrstuvwxyz ";
  static constexpr std::size_t kBlank = 0;
  static constexpr std::size_t kSize = kTokens.size();

  static char token(std::size_t index) { return kTokens.at(index); }
  static std::optional<std::size_t> index_of(char c);
  static bool is_valid_text(std::string_view text);
  /// Token indices of a blank-free text; throws UnreachableTargetError on
  /// characters outside the alphabet.
  static std::vector<std::size_t> encode(std::string_view text);
  static std::string decode(std::span<const std::size_t> tokens);
};

/// Per-frame unnormalized scores, T frames x V tokens.
struct LogitsMatrix {
  Eigen::MatrixXd scores;

  std::size_t frames() const { return static_cast<std::size_t>(scores.rows()); }
  std::size_t vocab() const { return static_cast<std::size_t>(scores.cols()); }

  Eigen::MatrixXd log_softmax() const;
  Eigen::MatrixXd softmax() const { return log_softmax().array().exp().matrix(); }
};

using TokenPath = std::vector<std::size_t>;

/// Merge adjacent repeats, then drop blanks.
std::vector<std::size_t> collapse_tokens(std::span<const std::size_t> path);
std::string collapse(std::span<const std::size_t> path);

/// Fewest frames able to emit `target`: one per character plus one blank
/// between each pair of equal neighbours.
std::size_t min_frames_for(std::string_view target);

/// Pr(p | y) by enumerating all V^T paths. `probs` holds row-normalized
/// per-frame distributions. Guarded to T <= 8, V <= 6.
double prob_phrase_bruteforce(const Eigen::MatrixXd& probs, std::string_view phrase);

struct CtcLossGrad {
  double loss = 0.0;
  /// d loss / d logits, same shape as the logits.
  Eigen::MatrixXd grad;
};

/// -log Pr(target | softmax(logits)) by the log-space forward algorithm.
double ctc_loss(const LogitsMatrix& logits, std::string_view target);
/// Loss and its exact gradient softmax - posterior from forward-backward.
CtcLossGrad ctc_loss_and_grad(const LogitsMatrix& logits, std::string_view target);
Eigen::MatrixXd ctc_grad_logits(const LogitsMatrix& logits, std::string_view target);

struct GreedyDecode {
  std::string text;
  TokenPath path;
};

/// Per-frame argmax (ties to the lowest index, so blank wins ties) and its
/// collapse.
GreedyDecode greedy_decode(const LogitsMatrix& logits);

struct BeamDecode {
  std::string text;
  std::vector<std::size_t> tokens;
  /// log of the merged prefix probability held by the beam.
  double log_score = 0.0;
};

inline constexpr std::size_t kExhaustiveBeam = static_cast<std::size_t>(-1);

/// CTC prefix beam search without a language model. With kExhaustiveBeam no
/// prefix is pruned and every score is the exact Pr(prefix | y).
BeamDecode beam_search_decode(const LogitsMatrix& logits, std::size_t beam_width);

/// A character of a collapsed transcription, or the gap in front of
/// character `index` (index == length means after the last character).
struct CharLocus {
  enum class Kind { kEmitted, kGap };
  Kind kind = Kind::kEmitted;
  std::size_t index = 0;

  static CharLocus emitted(std::size_t i) { return {Kind::kEmitted, i}; }
  static CharLocus gap(std::size_t i) { return {Kind::kGap, i}; }
};

/// Frame range [first, last] of the token run behind each collapsed character.
struct EmissionRun {
  std::size_t first = 0;
  std::size_t last = 0;
};
std::vector<EmissionRun> emission_runs(std::span<const std::size_t> path);

/// Frames responsible for the given loci. An emitted character maps to its
/// run; a gap maps to the frames from the last frame of the left neighbour
/// through the first frame of the right neighbour (path ends stand in for
/// missing neighbours). Result is sorted and unique.
std::vector<std::size_t> char_frames(std::span<const std::size_t> path, std::span<const CharLocus> loci);

/// Diagnostic dump: u32 T, u32 V, then T*V little-endian doubles row by row.
void write_logits(const LogitsMatrix& logits, const std::filesystem::path& path);
LogitsMatrix read_logits(const std::filesystem::path& path);

}  // namespace wsadv
