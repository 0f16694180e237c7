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

#include "wsadv/textdist.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "wsadv/error.hpp"

namespace wsadv {

namespace {

// Full (n+1) x (m+1) edit-distance table, row-major.
template <typename Seq>
std::vector<std::size_t> distance_table(const Seq& a, const Seq& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = at(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1);
      at(i, j) = std::min({sub, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  return d;
}

template <typename Seq>
std::vector<AlignStep> backtrace(const Seq& a, const Seq& b) {
  const std::size_t n = a.size(), m = b.size();
  const auto d = distance_table(a, b);
  auto at = [&](std::size_t i, std::size_t j) { return d[i * (m + 1) + j]; };
  std::vector<AlignStep> steps;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const std::size_t here = at(i, j);
    if (i > 0 && j > 0 && a[i - 1] == b[j - 1] && at(i - 1, j - 1) == here) {
      steps.push_back({EditOp::kMatch, i - 1, j - 1});
      --i, --j;
    } else if (i > 0 && j > 0 && at(i - 1, j - 1) + 1 == here) {
      steps.push_back({EditOp::kSubstitute, i - 1, j - 1});
      --i, --j;
    } else if (i > 0 && at(i - 1, j) + 1 == here) {
      steps.push_back({EditOp::kDelete, i - 1, j});
      --i;
    } else {
      steps.push_back({EditOp::kInsert, i, j - 1});
      --j;
    }
  }
  std::reverse(steps.begin(), steps.end());
  return steps;
}

}  // namespace

std::size_t levenshtein(std::string_view a, std::string_view b) {
  // Two-row DP; the full table is only needed for backtraces.
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1), prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

CharAlignment align_chars(std::string_view hyp, std::string_view target) { return backtrace(hyp, target); }

std::size_t alignment_cost(const CharAlignment& alignment) {
  return static_cast<std::size_t>(std::count_if(alignment.begin(), alignment.end(),
                                                [](const AlignStep& s) { return s.op != EditOp::kMatch; }));
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::istringstream in(lowered);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(std::move(w));
  return words;
}

WerResult wer(std::string_view reference, std::string_view hypothesis) {
  const auto ref = tokenize_words(reference);
  const auto hyp = tokenize_words(hypothesis);
  if (ref.empty()) throw DomainError("wer: reference has no words");
  // Align reference -> hypothesis: a "delete" drops a reference word, an
  // "insert" adds a hypothesis word.
  WerResult r;
  r.breakdown.reference_length = ref.size();
  for (const AlignStep& s : backtrace(ref, hyp)) {
    switch (s.op) {
      case EditOp::kMatch:
        break;
      case EditOp::kSubstitute:
        ++r.breakdown.substitutions;
        break;
      case EditOp::kDelete:
        ++r.breakdown.deletions;
        break;
      case EditOp::kInsert:
        ++r.breakdown.insertions;
        break;
    }
  }
  r.ratio = static_cast<double>(r.breakdown.distance()) / static_cast<double>(ref.size());
  return r;
}

double cer(std::string_view reference, std::string_view hypothesis) {
  if (reference.empty()) throw DomainError("cer: empty reference");
  return static_cast<double>(levenshtein(reference, hypothesis)) / static_cast<double>(reference.size());
}

}  // namespace wsadv
