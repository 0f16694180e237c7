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
#include <string>
#include <string_view>
#include <vector>

#include "wsadv/attack.hpp"
#include "wsadv/evalharness.hpp"
#include "wsadv/model.hpp"

namespace wsadv::cli {

struct CorpusSettings {
  std::size_t utterances = 200;
  std::size_t min_length = 3;
  std::size_t max_length = 8;
  std::uint64_t seed = 7;
};

struct TrainSettings {
  TrainOptions options;
  ModelShape shape;
  std::uint64_t init_seed = 1;
  double max_heldout_cer = 0.05;
};

struct BenchSettings {
  std::size_t pairs = 20;
  std::size_t trials = 5;
  std::vector<double> deltas_int16 = {5.0, 15.0, 30.0};
  std::uint64_t seed = 11;
  std::size_t eot_samples = 4;
  double eot_delta_int16 = 30.0;
  std::size_t threads = 0;
};

/// Resolved configuration of one command invocation.
///
/// Text form is a flat key = value file with [section] headers; keys are
/// addressed as "section.key" (e.g. attack.omega). Blank lines and lines
/// starting with '#' or ';' are ignored. Unknown sections or keys are errors.
struct RunConfig {
  AttackConfig attack;
  /// attack.eot_bound in int16 units; converted when resolving.
  double eot_bound_int16 = 0.0;

  std::filesystem::path model_path = "model.bin";
  std::filesystem::path corpus_path = "corpus";
  std::filesystem::path output_dir = "out";

  CorpusSettings corpus;
  TrainSettings train;
  BenchSettings bench;

  /// Assigns one "section.key" entry. Throws ConfigError for unknown keys or
  /// unparsable values.
  void set(std::string_view key, std::string_view value);
  void apply_text(std::string_view text);
  void apply_file(const std::filesystem::path& path);
  /// "paper": SPT 0.75, omega 1.2, lr0 100, beta 0.8, gamma 10, c 0.001,
  /// 500 iterations, TVD metric.
  void apply_preset(std::string_view name);

  /// AttackConfig with int16-scale settings converted.
  AttackConfig attack_config() const;
  /// Checks every attack invariant and setting range.
  void validate() const;
  /// Every key with its resolved value, in a stable order.
  Metadata resolved() const;
  /// The manifest file behind corpus_path (a directory or a .tsv file).
  std::filesystem::path manifest_path() const;

  static std::vector<std::string> known_keys();
};

}  // namespace wsadv::cli
