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
#include <filesystem>
#include <span>
#include <vector>

namespace wsadv {

inline constexpr int kDefaultSampleRate = 16000;

/// Full-scale factor between normalized amplitudes and 16-bit PCM.
inline constexpr double kInt16Scale = 32768.0;

/// Mono audio in normalized amplitude units. Also used for perturbations,
/// which are not required to stay inside [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  std::size_t size() const { return samples.size(); }

  /// Throws DomainError unless length >= 1 and sample_rate > 0.
  void validate() const;
  /// validate() plus every sample in [-1, 1].
  void validate_normalized() const;

  bool operator==(const AudioClip&) const = default;
};

/// Half-open sample interval [begin, end).
struct Interval {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  bool operator==(const Interval&) const = default;
};

/// Slicing of a signal into frames; frame i covers [i*hop, i*hop + frame_length).
struct FrameView {
  std::size_t frame_length = 160;
  std::size_t hop = 160;
  std::size_t signal_length = 0;

  /// floor((len - frame_length) / hop) + 1, or 0 when the signal is shorter
  /// than one frame.
  std::size_t frame_count() const;
  Interval frame(std::size_t index) const { return {index * hop, index * hop + frame_length}; }
};

AudioClip read_wav(const std::filesystem::path& path);
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

/// Encodes a clip as a canonical 44-byte-header PCM16 mono WAV image.
std::vector<std::uint8_t> encode_wav(const AudioClip& clip);
AudioClip decode_wav(std::span<const std::uint8_t> bytes);

/// Quantize one normalized sample to int16 (round(s * 32768), saturated).
std::int16_t quantize_sample(double s);

double mean_power(std::span<const double> v);

/// 10*log10(P_x / P_delta) with P the mean squared amplitude. Returns
/// +infinity when delta has zero energy; throws DomainError when x does.
double snr_db(std::span<const double> x, std::span<const double> delta);
double snr_db(const AudioClip& x, const AudioClip& delta);

/// Peak-amplitude ratio 20*log10(max|x|) - 20*log10(max|delta|).
/// +infinity for an all-zero delta.
double dbx_delta(std::span<const double> x, std::span<const double> delta);

/// Adds i.i.d. uniform noise on [-bound, bound] and clamps to [-1, 1].
/// `bound` is in normalized units; an int16-scale bound D is D / 32768.
AudioClip add_uniform_noise(const AudioClip& x, double bound, std::uint64_t seed);

/// Sample intervals covered by the given frames, sorted and with overlapping
/// or touching intervals merged.
std::vector<Interval> frame_intervals(const FrameView& view, std::span<const std::size_t> frame_indices);

/// Sum of lengths of a set of disjoint intervals.
std::size_t covered_samples(std::span<const Interval> intervals);

}  // namespace wsadv
