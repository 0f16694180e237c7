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

#include <benchmark/benchmark.h>

#include "wsadv/attack.hpp"
#include "wsadv/ctc.hpp"
#include "wsadv/model.hpp"
#include "wsadv/rng.hpp"

#include <string>

namespace {

wsadv::LogitsMatrix random_logits(std::size_t frames, std::uint64_t seed) {
  wsadv::Rng rng(seed);
  wsadv::LogitsMatrix m{Eigen::MatrixXd(frames, wsadv::Alphabet::kSize)};
  for (Eigen::Index t = 0; t < m.scores.rows(); ++t) {
    for (Eigen::Index v = 0; v < m.scores.cols(); ++v) m.scores(t, v) = rng.uniform(-3.0, 3.0);
  }
  return m;
}

void BM_CtcLossAndGrad(benchmark::State& state) {
  const auto logits = random_logits(static_cast<std::size_t>(state.range(0)), 3);
  const std::string target = "open the door";
  for (auto _ : state) benchmark::DoNotOptimize(wsadv::ctc_loss_and_grad(logits, target));
}
BENCHMARK(BM_CtcLossAndGrad)->Arg(64)->Arg(128)->Arg(256);

void BM_BeamSearch(benchmark::State& state) {
  const auto logits = random_logits(96, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(wsadv::beam_search_decode(logits, static_cast<std::size_t>(state.range(0))));
  }
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(8)->Arg(32);

struct Fixture {
  wsadv::ToyCtcModel model = wsadv::ToyCtcModel::initialize(wsadv::ModelShape{}, 1);
  wsadv::AudioClip clip = wsadv::synth_utterance("hello world", 9);
};

void BM_ModelForward(benchmark::State& state) {
  const Fixture f;
  for (auto _ : state) benchmark::DoNotOptimize(wsadv::forward(f.model, f.clip.samples));
}
BENCHMARK(BM_ModelForward);

void BM_InputGradient(benchmark::State& state) {
  const Fixture f;
  const std::string target = "hello";
  for (auto _ : state) benchmark::DoNotOptimize(wsadv::loss_and_input_grad(f.model, f.clip.samples, target));
}
BENCHMARK(BM_InputGradient);

void BM_AttackStep(benchmark::State& state) {
  const Fixture f;
  wsadv::AttackConfig config;
  config.target = "hello";
  config.eot_samples = static_cast<std::size_t>(state.range(0));
  config.eot_bound = state.range(0) > 0 ? 30.0 / wsadv::kInt16Scale : 0.0;
  config.record_trace = false;
  const auto initial = wsadv::init_attack(f.model, f.clip, config);
  for (auto _ : state) benchmark::DoNotOptimize(wsadv::attack_step(f.model, f.clip, initial, config, nullptr));
}
BENCHMARK(BM_AttackStep)->Arg(0)->Arg(4);

}  // namespace

BENCHMARK_MAIN();
