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

#include "wsadv/model.hpp"

namespace wsadv::test {

/// A recognizer trained briefly on a small tone corpus, built once per process.
struct TrainedFixture {
  Corpus corpus;
  ToyCtcModel model;
  double heldout_cer = 1.0;
};

inline const TrainedFixture& trained_fixture() {
  static const TrainedFixture fixture = [] {
    TrainedFixture f;
    f.corpus = generate_corpus(120, 3, 8, 1234);
    TrainOptions opt;
    opt.epochs = 40;
    const TrainOutcome out = train(ToyCtcModel::initialize(ModelShape{}, 1), f.corpus, opt);
    f.model = out.model;
    f.heldout_cer = out.report.heldout_cer;
    return f;
  }();
  return fixture;
}

}  // namespace wsadv::test
