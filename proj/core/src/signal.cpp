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

#include "wsadv/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "wsadv/error.hpp"
#include "wsadv/rng.hpp"

namespace wsadv {

const char* to_string(WavErrorKind kind) {
  switch (kind) {
    case WavErrorKind::kIo:
      return "I/O error";
    case WavErrorKind::kMalformedHeader:
      return "malformed WAV header";
    case WavErrorKind::kUnsupportedEncoding:
      return "unsupported WAV encoding";
    case WavErrorKind::kEmptyData:
      return "empty WAV data chunk";
  }
  return "WAV error";
}

void AudioClip::validate() const {
  if (samples.empty()) throw DomainError("audio clip is empty");
  if (sample_rate <= 0) throw DomainError("sample rate must be positive");
}

void AudioClip::validate_normalized() const {
  validate();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i] >= -1.0 && samples[i] <= 1.0)) {
      throw DomainError("sample " + std::to_string(i) + " outside [-1, 1]");
    }
  }
}

std::size_t FrameView::frame_count() const {
  if (frame_length == 0 || hop == 0) throw DomainError("frame_length and hop must be positive");
  if (signal_length < frame_length) return 0;
  return (signal_length - frame_length) / hop + 1;
}

namespace {

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

bool tag_is(const std::uint8_t* p, const char* tag) { return std::memcmp(p, tag, 4) == 0; }

}  // namespace

std::int16_t quantize_sample(double s) {
  const double q = std::round(s * kInt16Scale);
  return static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip) {
  clip.validate();
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : clip.samples) put_u16(out, static_cast<std::uint16_t>(quantize_sample(s)));
  return out;
}

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes.data(), "RIFF") || !tag_is(bytes.data() + 8, "WAVE")) {
    throw WavError(WavErrorKind::kMalformedHeader, "missing RIFF/WAVE signature");
  }
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (tag_is(chunk, "fmt ")) {
      if (size < 16 || body + size > bytes.size()) {
        throw WavError(WavErrorKind::kMalformedHeader, "truncated fmt chunk");
      }
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (tag_is(chunk, "data")) {
      if (!have_fmt) throw WavError(WavErrorKind::kMalformedHeader, "data chunk before fmt chunk");
      if (format != 1) {
        throw WavError(WavErrorKind::kUnsupportedEncoding,
                       "audio format " + std::to_string(format) + " (only PCM is supported)");
      }
      if (channels != 1) {
        throw WavError(WavErrorKind::kUnsupportedEncoding,
                       std::to_string(channels) + " channels (only mono is supported)");
      }
      if (bits != 16) {
        throw WavError(WavErrorKind::kUnsupportedEncoding,
                       std::to_string(bits) + "-bit samples (only 16-bit is supported)");
      }
      if (rate == 0) throw WavError(WavErrorKind::kMalformedHeader, "zero sample rate");
      if (body + size > bytes.size()) throw WavError(WavErrorKind::kMalformedHeader, "truncated data chunk");
      if (size < 2) throw WavError(WavErrorKind::kEmptyData, "no samples");
      AudioClip clip;
      clip.sample_rate = static_cast<int>(rate);
      clip.samples.resize(size / 2);
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
        clip.samples[i] = static_cast<double>(v) / kInt16Scale;
      }
      return clip;
    }
    pos = body + size + (size & 1u);
  }
  throw WavError(have_fmt ? WavErrorKind::kEmptyData : WavErrorKind::kMalformedHeader,
                 have_fmt ? "no data chunk" : "no fmt chunk");
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError(WavErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const WavError& e) {
    throw WavError(e.kind(), path.string() + ": " + e.detail());
  }
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  const auto bytes = encode_wav(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WavError(WavErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WavError(WavErrorKind::kIo, "write failed for " + path.string());
}

double mean_power(std::span<const double> v) {
  if (v.empty()) throw DomainError("mean power of an empty signal");
  double acc = 0.0;
  for (double s : v) acc += s * s;
  return acc / static_cast<double>(v.size());
}

double snr_db(std::span<const double> x, std::span<const double> delta) {
  if (x.size() != delta.size()) throw DomainError("snr_db: length mismatch");
  const double px = mean_power(x);
  const double pd = mean_power(delta);
  if (px == 0.0) throw DomainError("snr_db: signal has zero energy");
  if (pd == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(px / pd);
}

double snr_db(const AudioClip& x, const AudioClip& delta) { return snr_db(x.samples, delta.samples); }

double dbx_delta(std::span<const double> x, std::span<const double> delta) {
  auto peak = [](std::span<const double> v) {
    double m = 0.0;
    for (double s : v) m = std::max(m, std::abs(s));
    return m;
  };
  const double px = peak(x);
  const double pd = peak(delta);
  if (px == 0.0) throw DomainError("dbx_delta: signal is all zero");
  if (pd == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(px) - 20.0 * std::log10(pd);
}

AudioClip add_uniform_noise(const AudioClip& x, double bound, std::uint64_t seed) {
  x.validate();
  if (!(bound >= 0.0)) throw DomainError("noise bound must be non-negative");
  AudioClip out = x;
  if (bound == 0.0) return out;
  Rng rng(seed);
  for (double& s : out.samples) s = std::clamp(s + rng.uniform(-bound, bound), -1.0, 1.0);
  return out;
}

std::vector<Interval> frame_intervals(const FrameView& view, std::span<const std::size_t> frame_indices) {
  const std::size_t count = view.frame_count();
  std::vector<Interval> raw;
  raw.reserve(frame_indices.size());
  for (std::size_t i : frame_indices) {
    if (i >= count) {
      throw DomainError("frame index " + std::to_string(i) + " out of range (" + std::to_string(count) + " frames)");
    }
    raw.push_back(view.frame(i));
  }
  std::sort(raw.begin(), raw.end(), [](const Interval& a, const Interval& b) { return a.begin < b.begin; });
  std::vector<Interval> merged;
  for (const Interval& iv : raw) {
    if (!merged.empty() && iv.begin <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, iv.end);
    } else {
      merged.push_back(iv);
    }
  }
  return merged;
}

std::size_t covered_samples(std::span<const Interval> intervals) {
  std::size_t n = 0;
  for (const Interval& iv : intervals) n += iv.length();
  return n;
}

}  // namespace wsadv
