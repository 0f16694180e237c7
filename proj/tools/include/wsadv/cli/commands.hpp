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

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "wsadv/cli/run_config.hpp"

namespace wsadv::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitUnreachableTarget = 3,
  kExitModelFailure = 4,
  kExitAssertion = 5,
};

/// Writes the synthetic corpus (WAVs + manifest.tsv) to config.corpus_path.
int cmd_gen_corpus(const RunConfig& config, std::ostream& log);

/// Trains on the corpus manifest, writes the checkpoint to config.model_path
/// and train_report.json to config.output_dir. With `assert_cer`, a held-out
/// CER above train.max_heldout_cer exits with kExitAssertion.
int cmd_train(const RunConfig& config, bool assert_cer, std::ostream& log);

/// Attacks one WAV toward config.attack.target; writes adversarial.wav,
/// delta.wav, result.json and, with attack.trace, trace.jsonl.
int cmd_attack(const RunConfig& config, const std::filesystem::path& input, bool assert_success, std::ostream& log);

/// suite is "robustness", "metrics" or "wpt-speed". Writes bench_<suite>.csv
/// and bench_<suite>.json. With `assert_claims`, failed direction checks exit
/// with kExitAssertion.
int cmd_bench(const RunConfig& config, const std::string& suite, bool assert_claims, std::ostream& log);

/// Robustness suite approaches derived from the attack settings.
std::vector<Approach> robustness_approaches(const RunConfig& config);

/// Full command-line entry point; maps errors to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wsadv::cli
