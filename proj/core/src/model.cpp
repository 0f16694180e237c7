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

#include "wsadv/model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "wsadv/error.hpp"
#include "wsadv/parallel.hpp"
#include "wsadv/rng.hpp"
#include "wsadv/textdist.hpp"

namespace wsadv {

namespace {

using FrameMap = Eigen::Map<const Eigen::MatrixXd, 0, Eigen::OuterStride<>>;

FrameMap frame_matrix(const ToyCtcModel& model, std::span<const double> samples) {
  const auto view = model.frames_for(samples.size());
  const std::size_t frames = view.frame_count();
  if (frames == 0) {
    throw DomainError("clip of " + std::to_string(samples.size()) + " samples is shorter than one frame (" +
                      std::to_string(model.shape.frame_length) + ")");
  }
  return FrameMap(samples.data(), static_cast<Eigen::Index>(model.shape.frame_length),
                  static_cast<Eigen::Index>(frames), Eigen::OuterStride<>(static_cast<Eigen::Index>(model.shape.hop)));
}

// Hidden states column by column, hidden x T.
Eigen::MatrixXd run_recurrence(const ToyCtcModel& model, const FrameMap& frames) {
  Eigen::MatrixXd hidden = model.input_weights * frames;
  hidden.colwise() += model.hidden_bias;
  for (Eigen::Index t = 0; t < hidden.cols(); ++t) {
    if (t > 0) hidden.col(t) += model.recurrent_weights * hidden.col(t - 1);
    hidden.col(t) = hidden.col(t).array().tanh();
  }
  return hidden;
}

LogitsMatrix project(const ToyCtcModel& model, const Eigen::MatrixXd& hidden) {
  Eigen::MatrixXd out = model.output_weights * hidden;
  out.colwise() += model.output_bias;
  return LogitsMatrix{out.transpose()};
}

// Gradient wrt the pre-activations, hidden x T, given d loss / d logits.
Eigen::MatrixXd backprop_hidden(const ToyCtcModel& model, const Eigen::MatrixXd& hidden,
                                const Eigen::MatrixXd& logit_grad) {
  Eigen::MatrixXd pre = model.output_weights.transpose() * logit_grad.transpose();
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(hidden.rows());
  for (Eigen::Index t = hidden.cols(); t-- > 0;) {
    pre.col(t) += carry;
    pre.col(t).array() *= 1.0 - hidden.col(t).array().square();
    carry = model.recurrent_weights.transpose() * pre.col(t);
  }
  return pre;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_le(std::istream& in, int n, const std::filesystem::path& path) {
  unsigned char b[8] = {};
  in.read(reinterpret_cast<char*>(b), n);
  if (!in) throw Error("truncated model checkpoint " + path.string());
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

// Row-major so the on-disk order is independent of Eigen's storage order.
template <typename M>
void put_matrix(std::ostream& out, const M& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
  }
}

template <typename M>
void get_matrix(std::istream& in, M& m, const std::filesystem::path& path) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const std::uint64_t bits = get_le(in, 8, path);
      double v;
      std::memcpy(&v, &bits, sizeof v);
      m(r, c) = v;
    }
  }
}

constexpr char kModelMagic[8] = {'W', 'S', 'A', 'D', 'V', 'M', 'D', 'L'};
constexpr std::uint32_t kModelVersion = 1;

}  // namespace

ToyCtcModel ToyCtcModel::zeros(const ModelShape& shape) {
  if (shape.frame_length == 0 || shape.hop == 0 || shape.hidden == 0 || shape.vocab < 2) {
    throw DomainError("invalid model shape");
  }
  const auto F = static_cast<Eigen::Index>(shape.frame_length);
  const auto H = static_cast<Eigen::Index>(shape.hidden);
  const auto V = static_cast<Eigen::Index>(shape.vocab);
  ToyCtcModel m;
  m.shape = shape;
  m.input_weights = Eigen::MatrixXd::Zero(H, F);
  m.recurrent_weights = Eigen::MatrixXd::Zero(H, H);
  m.hidden_bias = Eigen::VectorXd::Zero(H);
  m.output_weights = Eigen::MatrixXd::Zero(V, H);
  m.output_bias = Eigen::VectorXd::Zero(V);
  return m;
}

ToyCtcModel ToyCtcModel::initialize(const ModelShape& shape, std::uint64_t seed, double scale) {
  ToyCtcModel m = zeros(shape);
  Rng rng(seed);
  auto fill = [&](auto& mat) {
    for (Eigen::Index r = 0; r < mat.rows(); ++r) {
      for (Eigen::Index c = 0; c < mat.cols(); ++c) mat(r, c) = rng.uniform(-scale, scale);
    }
  };
  fill(m.input_weights);
  fill(m.recurrent_weights);
  fill(m.hidden_bias);
  fill(m.output_weights);
  fill(m.output_bias);
  return m;
}

std::size_t ToyCtcModel::parameter_count() const {
  return static_cast<std::size_t>(input_weights.size() + recurrent_weights.size() + hidden_bias.size() +
                                  output_weights.size() + output_bias.size());
}

bool ToyCtcModel::all_finite() const {
  return input_weights.allFinite() && recurrent_weights.allFinite() && hidden_bias.allFinite() &&
         output_weights.allFinite() && output_bias.allFinite();
}

bool ToyCtcModel::operator==(const ToyCtcModel& o) const {
  return shape == o.shape && input_weights == o.input_weights && recurrent_weights == o.recurrent_weights &&
         hidden_bias == o.hidden_bias && output_weights == o.output_weights && output_bias == o.output_bias;
}

LogitsMatrix forward(const ToyCtcModel& model, std::span<const double> samples) {
  const FrameMap frames = frame_matrix(model, samples);
  return project(model, run_recurrence(model, frames));
}

InputGradient loss_and_input_grad(const ToyCtcModel& model, std::span<const double> samples,
                                  std::string_view target) {
  const FrameMap frames = frame_matrix(model, samples);
  const Eigen::MatrixXd hidden = run_recurrence(model, frames);
  InputGradient out;
  out.logits = project(model, hidden);
  CtcLossGrad ctc = ctc_loss_and_grad(out.logits, target);
  out.loss = ctc.loss;
  const Eigen::MatrixXd pre = backprop_hidden(model, hidden, ctc.grad);
  const Eigen::MatrixXd frame_grad = model.input_weights.transpose() * pre;  // frame_length x T
  out.grad.assign(samples.size(), 0.0);
  for (Eigen::Index t = 0; t < frame_grad.cols(); ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * model.shape.hop;
    for (Eigen::Index i = 0; i < frame_grad.rows(); ++i) out.grad[start + static_cast<std::size_t>(i)] += frame_grad(i, t);
  }
  return out;
}

std::vector<double> grad_wrt_input(const ToyCtcModel& model, const AudioClip& clip, std::string_view target) {
  return loss_and_input_grad(model, clip.samples, target).grad;
}

ModelGradient ModelGradient::zeros_like(const ToyCtcModel& model) {
  const ToyCtcModel z = ToyCtcModel::zeros(model.shape);
  return {z.input_weights, z.recurrent_weights, z.hidden_bias, z.output_weights, z.output_bias};
}

void ModelGradient::add(const ModelGradient& o) {
  input_weights += o.input_weights;
  recurrent_weights += o.recurrent_weights;
  hidden_bias += o.hidden_bias;
  output_weights += o.output_weights;
  output_bias += o.output_bias;
}

void ModelGradient::scale(double f) {
  input_weights *= f;
  recurrent_weights *= f;
  hidden_bias *= f;
  output_weights *= f;
  output_bias *= f;
}

double ModelGradient::squared_norm() const {
  return input_weights.squaredNorm() + recurrent_weights.squaredNorm() + hidden_bias.squaredNorm() +
         output_weights.squaredNorm() + output_bias.squaredNorm();
}

double loss_and_param_grad(const ToyCtcModel& model, std::span<const double> samples, std::string_view target,
                           ModelGradient& grad) {
  const FrameMap frames = frame_matrix(model, samples);
  const Eigen::MatrixXd hidden = run_recurrence(model, frames);
  const LogitsMatrix logits = project(model, hidden);
  const CtcLossGrad ctc = ctc_loss_and_grad(logits, target);
  const Eigen::MatrixXd pre = backprop_hidden(model, hidden, ctc.grad);
  const Eigen::Index T = hidden.cols();

  grad.output_weights += ctc.grad.transpose() * hidden.transpose();
  grad.output_bias += ctc.grad.colwise().sum().transpose();
  grad.input_weights += pre * frames.transpose();
  grad.hidden_bias += pre.rowwise().sum();
  if (T > 1) grad.recurrent_weights += pre.rightCols(T - 1) * hidden.leftCols(T - 1).transpose();
  return ctc.loss;
}

void save_model(const ToyCtcModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(kModelMagic, sizeof kModelMagic);
  put_u32(out, kModelVersion);
  put_u32(out, static_cast<std::uint32_t>(model.shape.frame_length));
  put_u32(out, static_cast<std::uint32_t>(model.shape.hop));
  put_u32(out, static_cast<std::uint32_t>(model.shape.hidden));
  put_u32(out, static_cast<std::uint32_t>(model.shape.vocab));
  put_matrix(out, model.input_weights);
  put_matrix(out, model.recurrent_weights);
  put_matrix(out, model.hidden_bias);
  put_matrix(out, model.output_weights);
  put_matrix(out, model.output_bias);
  if (!out) throw Error("write failed for " + path.string());
}

ToyCtcModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model checkpoint " + path.string());
  char magic[sizeof kModelMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kModelMagic, sizeof magic) != 0) {
    throw Error(path.string() + " is not a model checkpoint (bad magic)");
  }
  const auto version = static_cast<std::uint32_t>(get_le(in, 4, path));
  if (version != kModelVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  ModelShape shape;
  shape.frame_length = get_le(in, 4, path);
  shape.hop = get_le(in, 4, path);
  shape.hidden = get_le(in, 4, path);
  shape.vocab = get_le(in, 4, path);
  ToyCtcModel m = ToyCtcModel::zeros(shape);
  get_matrix(in, m.input_weights, path);
  get_matrix(in, m.recurrent_weights, path);
  get_matrix(in, m.hidden_bias, path);
  get_matrix(in, m.output_weights, path);
  get_matrix(in, m.output_bias, path);
  return m;
}

std::pair<double, double> tone_frequencies(char c) {
  const auto idx = Alphabet::index_of(c);
  if (!idx || *idx == Alphabet::kBlank) throw DomainError("no tone for character '" + std::string(1, c) + "'");
  const auto k = static_cast<double>(*idx);
  return {400.0 + 35.0 * k, 1200.0 + 20.0 * k};
}

AudioClip synth_utterance(std::string_view text, std::uint64_t seed, const SynthOptions& options) {
  if (text.empty()) throw DomainError("cannot synthesize an empty utterance");
  if (text.size() > kMaxUtteranceChars) {
    throw DomainError("utterance longer than " + std::to_string(kMaxUtteranceChars) + " characters");
  }
  const std::size_t burst = options.frames_per_char * options.frame_length;
  const std::size_t gap = options.silence_frames * options.frame_length;
  AudioClip clip;
  clip.sample_rate = options.sample_rate;
  clip.samples.assign(text.size() * burst + (text.size() - 1) * gap, 0.0);
  const double half = 0.5 * options.amplitude;
  const double w = 2.0 * std::numbers::pi / static_cast<double>(options.sample_rate);
  for (std::size_t c = 0; c < text.size(); ++c) {
    const auto [f1, f2] = tone_frequencies(text[c]);
    const std::size_t start = c * (burst + gap);
    for (std::size_t n = 0; n < burst; ++n) {
      const auto tn = static_cast<double>(n);
      clip.samples[start + n] = half * std::sin(w * f1 * tn) + half * std::sin(w * f2 * tn);
    }
  }
  Rng rng(seed);
  for (double& s : clip.samples) s += rng.uniform(-options.noise, options.noise);
  return clip;
}

const std::vector<std::string>& default_word_list() {
  static const std::vector<std::string> words = [] {
    const char* phrases[] = {
        "he thought of all the married shepherds he had known",
        "were refugees from the tribal wars and we need money the other figure said",
        "i told him we could teach her to ignore people who waste her time",
        "down below in the darkness were hundreds of people sleeping in peace",
        "but finally the merchant appeared and asked the boy to shear four sheep",
        "it seemed so safe and tranquil",
        "this is no place for you",
        "some of the grey ash was falling off the circular edge",
        // built-in short words
        "cat dog open door yes no stop go left right up down call home play music turn off light",
    };
    std::vector<std::string> out;
    for (const char* p : phrases) {
      std::istringstream in(p);
      for (std::string w; in >> w;) {
        if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
      }
    }
    return out;
  }();
  return words;
}

Corpus generate_corpus(std::size_t count, std::size_t min_len, std::size_t max_len, std::uint64_t seed,
                       const std::vector<std::string>& words, const SynthOptions& options) {
  if (min_len == 0 || min_len > max_len || max_len > kMaxUtteranceChars) {
    throw DomainError("invalid transcript length range");
  }
  std::vector<std::string> usable;
  for (const auto& w : words) {
    if (!w.empty() && w.size() <= max_len && Alphabet::is_valid_text(w)) usable.push_back(w);
  }
  if (usable.empty()) throw DomainError("no usable words for the requested length range");

  Corpus corpus;
  corpus.seed = seed;
  Rng rng(mix_seed(seed, 0x636f72707573ULL));
  for (std::size_t i = 0; i < count; ++i) {
    std::string text;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw DomainError("cannot build a transcript in the requested length range");
      text = usable[rng.below(usable.size())];
      if (rng.uniform() < 0.5) {
        const std::string& second = usable[rng.below(usable.size())];
        if (text.size() + 1 + second.size() <= max_len) text += " " + second;
      }
      if (text.size() >= min_len && text.size() <= max_len) break;
    }
    corpus.items.push_back({synth_utterance(text, mix_seed(seed, i), options), text});
  }
  return corpus;
}

std::filesystem::path write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto manifest = dir / "manifest.tsv";
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw Error("cannot write manifest " + manifest.string());
  for (std::size_t i = 0; i < corpus.items.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "utt_%04zu.wav", i);
    write_wav(corpus.items[i].clip, dir / name);
    out << name << '\t' << corpus.items[i].transcript << '\n';
  }
  if (!out) throw Error("write failed for " + manifest.string());
  return manifest;
}

Corpus read_corpus(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error("cannot open corpus manifest " + manifest.string());
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error(manifest.string() + ":" + std::to_string(lineno) + ": expected <wav-path><TAB><transcript>");
    }
    std::filesystem::path wav = line.substr(0, tab);
    if (wav.is_relative()) wav = manifest.parent_path() / wav;
    std::string text = line.substr(tab + 1);
    if (!Alphabet::is_valid_text(text)) {
      throw Error(manifest.string() + ":" + std::to_string(lineno) + ": transcript has characters outside the alphabet");
    }
    corpus.items.push_back({read_wav(wav), std::move(text)});
  }
  if (corpus.items.empty()) throw Error("corpus manifest " + manifest.string() + " has no entries");
  return corpus;
}

double mean_loss(const ToyCtcModel& model, const Corpus& corpus, std::span<const std::size_t> indices,
                 std::size_t threads) {
  std::vector<double> losses(indices.size());
  parallel_for(
      indices.size(),
      [&](std::size_t i) {
        const auto& item = corpus.items[indices[i]];
        losses[i] = ctc_loss(forward(model, item.clip), item.transcript);
      },
      threads);
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(std::max<std::size_t>(1, indices.size()));
}

double greedy_cer(const ToyCtcModel& model, const Corpus& corpus, std::span<const std::size_t> indices,
                  std::size_t threads) {
  std::vector<std::size_t> errors(indices.size());
  parallel_for(
      indices.size(),
      [&](std::size_t i) {
        const auto& item = corpus.items[indices[i]];
        errors[i] = levenshtein(item.transcript, greedy_decode(forward(model, item.clip)).text);
      },
      threads);
  std::size_t ref_chars = 0;
  for (std::size_t idx : indices) ref_chars += corpus.items[idx].transcript.size();
  if (ref_chars == 0) throw DomainError("greedy_cer: no reference characters");
  return static_cast<double>(std::accumulate(errors.begin(), errors.end(), std::size_t{0})) /
         static_cast<double>(ref_chars);
}

TrainOutcome train(ToyCtcModel model, const Corpus& corpus, const TrainOptions& options) {
  if (corpus.items.empty()) throw DomainError("cannot train on an empty corpus");
  if (options.batch_size == 0) throw DomainError("batch size must be positive");
  const std::size_t n = corpus.items.size();

  // Seeded Fisher-Yates split: the trailing slice is held out.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(options.seed, 0x73706c6974ULL));
  for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[rng.below(i + 1)]);
  std::size_t heldout = static_cast<std::size_t>(std::llround(options.holdout_fraction * static_cast<double>(n)));
  if (n > 1) heldout = std::min(heldout, n - 1);
  else heldout = 0;
  std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<std::ptrdiff_t>(heldout));
  std::vector<std::size_t> held_idx(order.end() - static_cast<std::ptrdiff_t>(heldout), order.end());
  std::sort(held_idx.begin(), held_idx.end());

  TrainOutcome out;
  out.report.train_count = train_idx.size();
  out.report.heldout_count = held_idx.size();
  out.report.heldout_indices = held_idx;
  out.report.initial_loss = mean_loss(model, corpus, train_idx, options.threads);
  if (!std::isfinite(out.report.initial_loss)) throw NumericError("initial training loss is not finite", 0);

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  ModelGradient m1 = ModelGradient::zeros_like(model);
  ModelGradient m2 = ModelGradient::zeros_like(model);
  std::size_t step = 0;

  auto adam = [&](auto& param, auto& g, auto& first, auto& second, double lr_t) {
    first = kBeta1 * first + (1.0 - kBeta1) * g;
    second = kBeta2 * second + (1.0 - kBeta2) * g.cwiseProduct(g);
    param.array() -= lr_t * first.array() / (second.array().sqrt() + kEps);
  };

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    for (std::size_t i = train_idx.size(); i-- > 1;) std::swap(train_idx[i], train_idx[rng.below(i + 1)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += options.batch_size) {
      const std::size_t count = std::min(options.batch_size, train_idx.size() - start);
      std::vector<ModelGradient> grads(count, ModelGradient::zeros_like(model));
      std::vector<double> losses(count);
      parallel_for(
          count,
          [&](std::size_t j) {
            const auto& item = corpus.items[train_idx[start + j]];
            losses[j] = loss_and_param_grad(model, item.clip.samples, item.transcript, grads[j]);
          },
          options.threads);
      ModelGradient g = ModelGradient::zeros_like(model);
      for (std::size_t j = 0; j < count; ++j) {
        g.add(grads[j]);
        epoch_loss += losses[j];
      }
      g.scale(1.0 / static_cast<double>(count));
      const double norm = std::sqrt(g.squared_norm());
      if (!std::isfinite(norm)) throw NumericError("training gradient is not finite", epoch);
      if (norm > options.clip_norm) g.scale(options.clip_norm / norm);

      ++step;
      const double lr_t = options.lr * std::sqrt(1.0 - std::pow(kBeta2, static_cast<double>(step))) /
                          (1.0 - std::pow(kBeta1, static_cast<double>(step)));
      adam(model.input_weights, g.input_weights, m1.input_weights, m2.input_weights, lr_t);
      adam(model.recurrent_weights, g.recurrent_weights, m1.recurrent_weights, m2.recurrent_weights, lr_t);
      adam(model.hidden_bias, g.hidden_bias, m1.hidden_bias, m2.hidden_bias, lr_t);
      adam(model.output_weights, g.output_weights, m1.output_weights, m2.output_weights, lr_t);
      adam(model.output_bias, g.output_bias, m1.output_bias, m2.output_bias, lr_t);
    }
    epoch_loss /= static_cast<double>(train_idx.size());
    if (!std::isfinite(epoch_loss) || !model.all_finite()) {
      throw NumericError("training loss diverged", epoch);
    }
    out.report.epoch_loss.push_back(epoch_loss);
  }
  out.report.heldout_cer = held_idx.empty() ? 0.0 : greedy_cer(model, corpus, held_idx, options.threads);
  out.model = std::move(model);
  return out;
}

}  // namespace wsadv
