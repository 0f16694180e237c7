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

#include "wsadv/cli/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "wsadv/error.hpp"

namespace wsadv::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string s = trim(v);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + s + "'");
  }
  return out;
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  const std::string s = trim(v);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + s + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  const std::string s = trim(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + s + "'");
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Field {
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Get>
Field real(Get get) {
  return {[get](RunConfig& c, std::string_view k, std::string_view v) { get(c) = parse_double(k, v); },
          [get](const RunConfig& c) { return fmt_double(get(c)); }};
}

template <typename T, typename Get>
Field integer(Get get) {
  return {[get](RunConfig& c, std::string_view k, std::string_view v) { get(c) = static_cast<T>(parse_uint(k, v)); },
          [get](const RunConfig& c) { return std::to_string(get(c)); }};
}

template <typename Get>
Field boolean(Get get) {
  return {[get](RunConfig& c, std::string_view k, std::string_view v) { get(c) = parse_bool(k, v); },
          [get](const RunConfig& c) { return std::string(get(c) ? "true" : "false"); }};
}

template <typename Get>
Field path(Get get) {
  return {[get](RunConfig& c, std::string_view, std::string_view v) { get(c) = trim(v); },
          [get](const RunConfig& c) { return get(c).string(); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"attack.target",
       {[](RunConfig& c, std::string_view, std::string_view v) { c.attack.target = trim(v); },
        [](const RunConfig& c) { return c.attack.target; }}},
      {"attack.metric",
       {[](RunConfig& c, std::string_view, std::string_view v) { c.attack.metric = parse_metric_kind(trim(v)); },
        [](const RunConfig& c) { return std::string(to_string(c.attack.metric)); }}},
      {"attack.c",
       {[](RunConfig& c, std::string_view k, std::string_view v) {
          const std::string s = trim(v);
          if (s == "default") {
            c.attack.c.reset();
          } else {
            c.attack.c = parse_double(k, s);
          }
        },
        [](const RunConfig& c) { return fmt_double(c.attack.trade_off()); }}},
      {"attack.gamma", real([](auto& c) -> auto& { return c.attack.gamma; })},
      {"attack.spt_proportion", real([](auto& c) -> auto& { return c.attack.spt_proportion; })},
      {"attack.omega", real([](auto& c) -> auto& { return c.attack.omega; })},
      {"attack.lr0", real([](auto& c) -> auto& { return c.attack.lr0; })},
      {"attack.beta", real([](auto& c) -> auto& { return c.attack.beta; })},
      {"attack.decay_period", integer<std::size_t>([](auto& c) -> auto& { return c.attack.decay_period; })},
      {"attack.max_iters", integer<std::size_t>([](auto& c) -> auto& { return c.attack.max_iters; })},
      {"attack.wpt_threshold",
       integer<std::size_t>([](auto& c) -> auto& { return c.attack.wpt_threshold; })},
      {"attack.key_point_weighting", boolean([](auto& c) -> auto& { return c.attack.key_point_weighting; })},
      {"attack.lr_decay", boolean([](auto& c) -> auto& { return c.attack.lr_decay; })},
      {"attack.decoder",
       {[](RunConfig& c, std::string_view, std::string_view v) { c.attack.decoder = DecoderSpec::parse(trim(v)); },
        [](const RunConfig& c) { return c.attack.decoder.to_string(); }}},
      {"attack.eot_samples", integer<std::size_t>([](auto& c) -> auto& { return c.attack.eot_samples; })},
      {"attack.eot_bound_int16", real([](auto& c) -> auto& { return c.eot_bound_int16; })},
      {"attack.seed", integer<std::uint64_t>([](auto& c) -> auto& { return c.attack.seed; })},
      {"attack.trace", boolean([](auto& c) -> auto& { return c.attack.record_trace; })},
      {"paths.model", path([](auto& c) -> auto& { return c.model_path; })},
      {"paths.corpus", path([](auto& c) -> auto& { return c.corpus_path; })},
      {"paths.output", path([](auto& c) -> auto& { return c.output_dir; })},
      {"corpus.utterances", integer<std::size_t>([](auto& c) -> auto& { return c.corpus.utterances; })},
      {"corpus.min_length", integer<std::size_t>([](auto& c) -> auto& { return c.corpus.min_length; })},
      {"corpus.max_length", integer<std::size_t>([](auto& c) -> auto& { return c.corpus.max_length; })},
      {"corpus.seed", integer<std::uint64_t>([](auto& c) -> auto& { return c.corpus.seed; })},
      {"train.epochs", integer<std::size_t>([](auto& c) -> auto& { return c.train.options.epochs; })},
      {"train.lr", real([](auto& c) -> auto& { return c.train.options.lr; })},
      {"train.batch_size",
       integer<std::size_t>([](auto& c) -> auto& { return c.train.options.batch_size; })},
      {"train.clip_norm", real([](auto& c) -> auto& { return c.train.options.clip_norm; })},
      {"train.holdout_fraction", real([](auto& c) -> auto& { return c.train.options.holdout_fraction; })},
      {"train.seed", integer<std::uint64_t>([](auto& c) -> auto& { return c.train.options.seed; })},
      {"train.init_seed", integer<std::uint64_t>([](auto& c) -> auto& { return c.train.init_seed; })},
      {"train.hidden", integer<std::size_t>([](auto& c) -> auto& { return c.train.shape.hidden; })},
      {"train.frame_length",
       integer<std::size_t>([](auto& c) -> auto& { return c.train.shape.frame_length; })},
      {"train.hop", integer<std::size_t>([](auto& c) -> auto& { return c.train.shape.hop; })},
      {"train.max_heldout_cer", real([](auto& c) -> auto& { return c.train.max_heldout_cer; })},
      {"bench.pairs", integer<std::size_t>([](auto& c) -> auto& { return c.bench.pairs; })},
      {"bench.trials", integer<std::size_t>([](auto& c) -> auto& { return c.bench.trials; })},
      {"bench.deltas_int16",
       {[](RunConfig& c, std::string_view k, std::string_view v) {
          std::vector<double> out;
          std::string item;
          std::istringstream in{std::string(v)};
          while (std::getline(in, item, ',')) out.push_back(parse_double(k, item));
          if (out.empty()) throw ConfigError(std::string(k) + ": expected a comma-separated list");
          c.bench.deltas_int16 = std::move(out);
        },
        [](const RunConfig& c) {
          std::string s;
          for (double d : c.bench.deltas_int16) s += (s.empty() ? "" : ",") + fmt_double(d);
          return s;
        }}},
      {"bench.seed", integer<std::uint64_t>([](auto& c) -> auto& { return c.bench.seed; })},
      {"bench.eot_samples", integer<std::size_t>([](auto& c) -> auto& { return c.bench.eot_samples; })},
      {"bench.eot_delta_int16", real([](auto& c) -> auto& { return c.bench.eot_delta_int16; })},
      {"bench.threads", integer<std::size_t>([](auto& c) -> auto& { return c.bench.threads; })},
  };
  return table;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(*this, key, value);
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

void RunConfig::apply_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of a [section]");
    try {
      set(section + "." + trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

void RunConfig::apply_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    apply_text(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

void RunConfig::apply_preset(std::string_view name) {
  if (name != "paper") throw ConfigError("unknown preset '" + std::string(name) + "' (known: paper)");
  attack.metric = MetricKind::kTvd;
  attack.spt_proportion = 0.75;
  attack.omega = 1.2;
  attack.lr0 = 100.0;
  attack.beta = 0.8;
  attack.gamma = 10.0;
  attack.c = 0.001;
  attack.max_iters = 500;
  attack.decay_period = 50;
  attack.key_point_weighting = true;
  attack.lr_decay = true;
}

AttackConfig RunConfig::attack_config() const {
  AttackConfig cfg = attack;
  cfg.eot_bound = eot_bound_int16 / kInt16Scale;
  return cfg;
}

void RunConfig::validate() const {
  AttackConfig cfg = attack_config();
  // The target is supplied per command; validate the rest with a placeholder.
  if (cfg.target.empty()) cfg.target = "a";
  cfg.validate();
  if (!(eot_bound_int16 >= 0.0)) throw ConfigError("attack.eot_bound_int16 must be non-negative");
  if (corpus.utterances == 0) throw ConfigError("corpus.utterances must be positive");
  if (corpus.min_length == 0 || corpus.min_length > corpus.max_length || corpus.max_length > kMaxUtteranceChars) {
    throw ConfigError("corpus length range must satisfy 1 <= min_length <= max_length <= 32");
  }
  if (train.options.batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(train.options.lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(train.options.clip_norm > 0.0)) throw ConfigError("train.clip_norm must be positive");
  if (!(train.options.holdout_fraction >= 0.0 && train.options.holdout_fraction < 1.0)) {
    throw ConfigError("train.holdout_fraction must be in [0, 1)");
  }
  if (train.shape.hidden == 0 || train.shape.frame_length == 0 || train.shape.hop == 0) {
    throw ConfigError("train.hidden, train.frame_length and train.hop must be positive");
  }
  if (bench.pairs == 0 || bench.trials == 0) throw ConfigError("bench.pairs and bench.trials must be positive");
  for (double d : bench.deltas_int16) {
    if (!(d >= 0.0)) throw ConfigError("bench.deltas_int16 entries must be non-negative");
  }
}

Metadata RunConfig::resolved() const {
  Metadata out;
  for (const auto& [name, field] : fields()) out.emplace_back(name, field.get(*this));
  return out;
}

std::filesystem::path RunConfig::manifest_path() const {
  if (std::filesystem::is_directory(corpus_path)) return corpus_path / "manifest.tsv";
  return corpus_path;
}

std::vector<std::string> RunConfig::known_keys() {
  std::vector<std::string> keys;
  for (const auto& [name, field] : fields()) keys.push_back(name);
  return keys;
}

}  // namespace wsadv::cli
