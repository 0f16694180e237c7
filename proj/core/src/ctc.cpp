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

#include "wsadv/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include "wsadv/error.hpp"

namespace wsadv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

std::vector<std::size_t> encode_for(std::string_view target, std::size_t vocab) {
  auto tokens = Alphabet::encode(target);
  for (std::size_t k : tokens) {
    if (k >= vocab) {
      throw UnreachableTargetError("character '" + std::string(1, Alphabet::token(k)) +
                                   "' is outside a vocabulary of " + std::to_string(vocab) + " tokens");
    }
  }
  return tokens;
}

// Blank-interleaved label sequence: -, l0, -, l1, ..., -.
std::vector<std::size_t> interleave(const std::vector<std::size_t>& labels) {
  std::vector<std::size_t> ext(2 * labels.size() + 1, Alphabet::kBlank);
  for (std::size_t k = 0; k < labels.size(); ++k) ext[2 * k + 1] = labels[k];
  return ext;
}

void check_reachable(std::size_t frames, std::string_view target) {
  const std::size_t need = min_frames_for(target);
  if (need > frames) {
    throw UnreachableTargetError("target \"" + std::string(target) + "\" needs at least " + std::to_string(need) +
                                 " frames, only " + std::to_string(frames) + " available");
  }
}

struct Lattice {
  std::vector<std::size_t> ext;
  std::size_t frames = 0;
  std::vector<double> alpha;  // frames x ext.size(), log domain, emissions included
  double log_prob = kNegInf;

  double& a(std::size_t t, std::size_t s) { return alpha[t * ext.size() + s]; }
};

Lattice forward_pass(const Eigen::MatrixXd& lp, const std::vector<std::size_t>& labels) {
  Lattice lat;
  lat.ext = interleave(labels);
  lat.frames = static_cast<std::size_t>(lp.rows());
  const std::size_t S = lat.ext.size();
  const auto& ext = lat.ext;
  lat.alpha.assign(lat.frames * S, kNegInf);
  lat.a(0, 0) = lp(0, static_cast<Eigen::Index>(ext[0]));
  if (S > 1) lat.a(0, 1) = lp(0, static_cast<Eigen::Index>(ext[1]));
  for (std::size_t t = 1; t < lat.frames; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double acc = lat.a(t - 1, s);
      if (s >= 1) acc = log_add(acc, lat.a(t - 1, s - 1));
      if (s >= 2 && ext[s] != Alphabet::kBlank && ext[s] != ext[s - 2]) acc = log_add(acc, lat.a(t - 1, s - 2));
      if (acc != kNegInf) lat.a(t, s) = acc + lp(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(ext[s]));
    }
  }
  lat.log_prob = lat.a(lat.frames - 1, S - 1);
  if (S > 1) lat.log_prob = log_add(lat.log_prob, lat.a(lat.frames - 1, S - 2));
  return lat;
}

}  // namespace

std::optional<std::size_t> Alphabet::index_of(char c) {
  const auto pos = kTokens.find(c);
  if (pos == std::string_view::npos) return std::nullopt;
  return pos;
}

bool Alphabet::is_valid_text(std::string_view text) {
  return std::all_of(text.begin(), text.end(), [](char c) {
    const auto idx = index_of(c);
    return idx && *idx != kBlank;
  });
}

std::vector<std::size_t> Alphabet::encode(std::string_view text) {
  std::vector<std::size_t> out;
  out.reserve(text.size());
  for (char c : text) {
    const auto idx = index_of(c);
    if (!idx || *idx == kBlank) {
      throw UnreachableTargetError("character '" + std::string(1, c) + "' is not in the alphabet");
    }
    out.push_back(*idx);
  }
  return out;
}

std::string Alphabet::decode(std::span<const std::size_t> tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (std::size_t k : tokens) {
    if (k != kBlank) out.push_back(token(k));
  }
  return out;
}

Eigen::MatrixXd LogitsMatrix::log_softmax() const {
  Eigen::MatrixXd out(scores.rows(), scores.cols());
  for (Eigen::Index t = 0; t < scores.rows(); ++t) {
    const double m = scores.row(t).maxCoeff();
    const double lse = m + std::log((scores.row(t).array() - m).exp().sum());
    out.row(t) = scores.row(t).array() - lse;
  }
  return out;
}

std::vector<std::size_t> collapse_tokens(std::span<const std::size_t> path) {
  std::vector<std::size_t> out;
  std::size_t prev = Alphabet::kBlank;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const std::size_t k = path[i];
    if (k != Alphabet::kBlank && (i == 0 || k != prev)) out.push_back(k);
    prev = k;
  }
  return out;
}

std::string collapse(std::span<const std::size_t> path) { return Alphabet::decode(collapse_tokens(path)); }

std::size_t min_frames_for(std::string_view target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++n;
  }
  return n;
}

double prob_phrase_bruteforce(const Eigen::MatrixXd& probs, std::string_view phrase) {
  const auto T = static_cast<std::size_t>(probs.rows());
  const auto V = static_cast<std::size_t>(probs.cols());
  if (T == 0 || T > 8 || V == 0 || V > 6) {
    throw DomainError("prob_phrase_bruteforce: enumeration guard is T <= 8, V <= 6 (got T=" + std::to_string(T) +
                      ", V=" + std::to_string(V) + ")");
  }
  const auto want = encode_for(phrase, V);
  if (want.size() > T) return 0.0;
  TokenPath path(T, 0);
  double total = 0.0;
  while (true) {
    if (collapse_tokens(path) == want) {
      double p = 1.0;
      for (std::size_t t = 0; t < T; ++t) p *= probs(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(path[t]));
      total += p;
    }
    // Odometer increment over V^T paths.
    std::size_t t = 0;
    while (t < T && ++path[t] == V) path[t++] = 0;
    if (t == T) break;
  }
  return total;
}

double ctc_loss(const LogitsMatrix& logits, std::string_view target) {
  if (logits.frames() == 0) throw DomainError("ctc_loss: no frames");
  const auto labels = encode_for(target, logits.vocab());
  check_reachable(logits.frames(), target);
  const Lattice lat = forward_pass(logits.log_softmax(), labels);
  return -lat.log_prob;
}

CtcLossGrad ctc_loss_and_grad(const LogitsMatrix& logits, std::string_view target) {
  if (logits.frames() == 0) throw DomainError("ctc_loss: no frames");
  const auto labels = encode_for(target, logits.vocab());
  check_reachable(logits.frames(), target);
  const Eigen::MatrixXd lp = logits.log_softmax();
  Lattice lat = forward_pass(lp, labels);
  const auto& ext = lat.ext;
  const std::size_t S = ext.size();
  const std::size_t T = lat.frames;
  const auto V = static_cast<Eigen::Index>(logits.vocab());

  std::vector<double> beta(T * S, kNegInf);
  auto b = [&](std::size_t t, std::size_t s) -> double& { return beta[t * S + s]; };
  const auto last = static_cast<Eigen::Index>(T - 1);
  b(T - 1, S - 1) = lp(last, static_cast<Eigen::Index>(ext[S - 1]));
  if (S > 1) b(T - 1, S - 2) = lp(last, static_cast<Eigen::Index>(ext[S - 2]));
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t s = 0; s < S; ++s) {
      double acc = b(t + 1, s);
      if (s + 1 < S) acc = log_add(acc, b(t + 1, s + 1));
      if (s + 2 < S && ext[s + 2] != Alphabet::kBlank && ext[s + 2] != ext[s]) acc = log_add(acc, b(t + 1, s + 2));
      if (acc != kNegInf) b(t, s) = acc + lp(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(ext[s]));
    }
  }

  CtcLossGrad out;
  out.loss = -lat.log_prob;
  out.grad = lp.array().exp().matrix();
  std::vector<double> occupancy(static_cast<std::size_t>(V));
  for (std::size_t t = 0; t < T; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kNegInf);
    const auto row = static_cast<Eigen::Index>(t);
    for (std::size_t s = 0; s < S; ++s) {
      const double ab = lat.a(t, s) + b(t, s);
      if (ab == kNegInf) continue;
      // alpha and beta both carry the emission at t; remove one copy.
      const double v = ab - lp(row, static_cast<Eigen::Index>(ext[s]));
      occupancy[ext[s]] = log_add(occupancy[ext[s]], v);
    }
    for (Eigen::Index k = 0; k < V; ++k) {
      const double occ = occupancy[static_cast<std::size_t>(k)];
      if (occ != kNegInf) out.grad(row, k) -= std::exp(occ - lat.log_prob);
    }
  }
  return out;
}

Eigen::MatrixXd ctc_grad_logits(const LogitsMatrix& logits, std::string_view target) {
  return ctc_loss_and_grad(logits, target).grad;
}

GreedyDecode greedy_decode(const LogitsMatrix& logits) {
  GreedyDecode out;
  out.path.resize(logits.frames());
  for (std::size_t t = 0; t < logits.frames(); ++t) {
    Eigen::Index best = 0;
    // maxCoeff's tie rule is unspecified; scan explicitly so the lowest index wins.
    const auto row = logits.scores.row(static_cast<Eigen::Index>(t));
    for (Eigen::Index k = 1; k < row.size(); ++k) {
      if (row(k) > row(best)) best = k;
    }
    out.path[t] = static_cast<std::size_t>(best);
  }
  out.text = collapse(out.path);
  return out;
}

BeamDecode beam_search_decode(const LogitsMatrix& logits, std::size_t beam_width) {
  if (beam_width == 0) throw DomainError("beam width must be at least 1");
  if (logits.frames() == 0) throw DomainError("beam_search_decode: no frames");
  struct Score {
    double blank = kNegInf;
    double non_blank = kNegInf;
    double total() const { return log_add(blank, non_blank); }
  };
  using Prefix = std::vector<std::size_t>;
  const Eigen::MatrixXd lp = logits.log_softmax();
  const auto V = logits.vocab();

  std::vector<std::pair<Prefix, Score>> beam{{Prefix{}, Score{0.0, kNegInf}}};
  for (std::size_t t = 0; t < logits.frames(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    std::map<Prefix, Score> next;
    for (const auto& [prefix, score] : beam) {
      const double total = score.total();
      Score& same = next[prefix];
      same.blank = log_add(same.blank, total + lp(row, 0));
      for (std::size_t c = 1; c < V; ++c) {
        const double lc = lp(row, static_cast<Eigen::Index>(c));
        Prefix extended = prefix;
        extended.push_back(c);
        Score& ext = next[extended];
        if (!prefix.empty() && prefix.back() == c) {
          // A repeat only extends the prefix across a blank; otherwise it
          // merges into the current character.
          ext.non_blank = log_add(ext.non_blank, score.blank + lc);
          Score& stay = next[prefix];
          stay.non_blank = log_add(stay.non_blank, score.non_blank + lc);
        } else {
          ext.non_blank = log_add(ext.non_blank, total + lc);
        }
      }
    }
    beam.assign(next.begin(), next.end());
    // Map order makes the sort deterministic: equal scores keep the
    // lexicographically smaller prefix first.
    std::stable_sort(beam.begin(), beam.end(),
                     [](const auto& a, const auto& b) { return a.second.total() > b.second.total(); });
    if (beam.size() > beam_width) beam.resize(beam_width);
  }
  BeamDecode out;
  out.tokens = beam.front().first;
  out.log_score = beam.front().second.total();
  out.text = Alphabet::decode(out.tokens);
  return out;
}

std::vector<EmissionRun> emission_runs(std::span<const std::size_t> path) {
  std::vector<EmissionRun> runs;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path[t] == Alphabet::kBlank) continue;
    if (t > 0 && path[t] == path[t - 1]) {
      runs.back().last = t;
    } else {
      runs.push_back({t, t});
    }
  }
  return runs;
}

std::vector<std::size_t> char_frames(std::span<const std::size_t> path, std::span<const CharLocus> loci) {
  const auto runs = emission_runs(path);
  std::vector<std::size_t> frames;
  for (const CharLocus& locus : loci) {
    std::size_t first = 0, last = 0;
    if (locus.kind == CharLocus::Kind::kEmitted) {
      if (locus.index >= runs.size()) {
        throw DomainError("character position " + std::to_string(locus.index) + " out of range (" +
                          std::to_string(runs.size()) + " characters)");
      }
      first = runs[locus.index].first;
      last = runs[locus.index].last;
    } else {
      if (locus.index > runs.size()) {
        throw DomainError("gap position " + std::to_string(locus.index) + " out of range (" +
                          std::to_string(runs.size()) + " characters)");
      }
      if (path.empty()) continue;
      first = locus.index > 0 ? runs[locus.index - 1].last : 0;
      last = locus.index < runs.size() ? runs[locus.index].first : path.size() - 1;
    }
    for (std::size_t t = first; t <= last; ++t) frames.push_back(t);
  }
  std::sort(frames.begin(), frames.end());
  frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
  return frames;
}

void write_logits(const LogitsMatrix& logits, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  put_u32(static_cast<std::uint32_t>(logits.frames()));
  put_u32(static_cast<std::uint32_t>(logits.vocab()));
  for (Eigen::Index t = 0; t < logits.scores.rows(); ++t) {
    for (Eigen::Index k = 0; k < logits.scores.cols(); ++k) {
      std::uint64_t bits;
      const double v = logits.scores(t, k);
      std::memcpy(&bits, &v, sizeof bits);
      unsigned char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
      out.write(reinterpret_cast<const char*>(b), 8);
    }
  }
  if (!out) throw Error("write failed for " + path.string());
}

LogitsMatrix read_logits(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  auto get = [&](int n) {
    unsigned char b[8] = {};
    in.read(reinterpret_cast<char*>(b), n);
    if (!in) throw Error("truncated logits file " + path.string());
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  };
  const auto T = static_cast<Eigen::Index>(get(4));
  const auto V = static_cast<Eigen::Index>(get(4));
  LogitsMatrix out{Eigen::MatrixXd(T, V)};
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index k = 0; k < V; ++k) {
      const std::uint64_t bits = get(8);
      double v;
      std::memcpy(&v, &bits, sizeof v);
      out.scores(t, k) = v;
    }
  }
  return out;
}

}  // namespace wsadv
