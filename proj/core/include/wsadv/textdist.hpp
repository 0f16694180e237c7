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
#include <string>
#include <string_view>
#include <vector>

namespace wsadv {

struct EditBreakdown {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_length = 0;

  std::size_t distance() const { return substitutions + deletions + insertions; }
  bool operator==(const EditBreakdown&) const = default;
};

enum class EditOp { kMatch, kSubstitute, kDelete, kInsert };

/// One alignment step. `hyp` indexes the hypothesis string (unused for
/// inserts), `target` indexes the target string (unused for deletes).
struct AlignStep {
  EditOp op = EditOp::kMatch;
  std::size_t hyp = 0;
  std::size_t target = 0;

  bool operator==(const AlignStep&) const = default;
};

using CharAlignment = std::vector<AlignStep>;

/// Unit-cost edit distance between two strings.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// Minimum-cost alignment turning `hyp` into `target`. Among equal-cost
/// alignments the backtrace from the end prefers match, then substitute,
/// then delete, then insert, so the result is deterministic.
CharAlignment align_chars(std::string_view hyp, std::string_view target);

/// Number of non-match steps in an alignment.
std::size_t alignment_cost(const CharAlignment& alignment);

struct WerResult {
  EditBreakdown breakdown;
  double ratio = 0.0;
};

/// Lowercases and splits on whitespace.
std::vector<std::string> tokenize_words(std::string_view text);

/// Word error rate (S + D + I) / N against `reference`. Throws DomainError for
/// an empty reference. The ratio may exceed 1.
WerResult wer(std::string_view reference, std::string_view hypothesis);

/// Character error rate: levenshtein / reference length.
double cer(std::string_view reference, std::string_view hypothesis);

}  // namespace wsadv
