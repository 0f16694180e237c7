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

#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "test_util.hpp"
#include "wsadv/cli/commands.hpp"
#include "wsadv/error.hpp"

using namespace wsadv;
using namespace wsadv::cli;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "wsadv");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json read_json(const std::filesystem::path& p) { return nlohmann::json::parse(slurp(p)); }

// Small corpus plus a briefly trained model shared by the end-to-end cases.
struct Workspace {
  test::TempDir dir{"cli"};
  std::string corpus = (dir / "corpus").string();
  std::string model = (dir / "model.bin").string();

  Workspace() {
    REQUIRE(run({"gen-corpus", "--out", corpus, "--count", "100", "--min-len", "3", "--max-len", "6", "--seed", "3"})
                .code == kExitOk);
    const CliRun t = run({"train", "--corpus", corpus, "--model", model, "--out", (dir / "train").string(),
                          "--epochs", "100", "--assert", "--set", "train.max_heldout_cer=0.2"});
    REQUIRE_MESSAGE(t.code == kExitOk, t.out, t.err);
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("RunConfig text format") {
  RunConfig c;
  c.apply_text(R"(
# comment
[attack]
omega = 1.5
metric = l2
decoder = beam:4
eot_bound_int16 = 30
; another comment
[bench]
deltas_int16 = 5, 10
)");
  CHECK(c.attack.omega == 1.5);
  CHECK(c.attack.metric == MetricKind::kL2);
  CHECK(c.attack.decoder == DecoderSpec{DecoderKind::kBeam, 4});
  CHECK(c.attack_config().eot_bound == 30.0 / 32768.0);
  CHECK(c.bench.deltas_int16 == std::vector<double>{5.0, 10.0});
  CHECK_THROWS_AS(c.apply_text("[attack]\nnope = 1\n"), ConfigError);
  CHECK_THROWS_AS(c.apply_text("[mystery]\nomega = 1\n"), ConfigError);
  CHECK_THROWS_AS(c.apply_text("[attack]\nomega\n"), ConfigError);
  CHECK_THROWS_AS(c.set("attack.omega", "abc"), ConfigError);
  CHECK_THROWS_AS(c.set("attack.max_iters", "-3"), ConfigError);
  CHECK_THROWS_AS(c.apply_file("/nonexistent/config.ini"), ConfigError);
  RunConfig bad;
  bad.set("attack.omega", "0.5");
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(bad.apply_preset("fast"), ConfigError);
}

TEST_CASE("paper preset resolves to the published hyperparameters") {
  RunConfig c;
  c.set("attack.spt_proportion", "0.3");
  c.set("attack.metric", "cosine");
  c.apply_preset("paper");
  const AttackConfig a = c.attack_config();
  CHECK(a.spt_proportion == 0.75);
  CHECK(a.omega == 1.2);
  CHECK(a.lr0 == 100.0);
  CHECK(a.beta == 0.8);
  CHECK(a.gamma == 10.0);
  CHECK(a.trade_off() == 0.001);
  CHECK(a.max_iters == 500);
  CHECK(a.decay_period == 50);
  CHECK(a.metric == MetricKind::kTvd);
}

TEST_CASE("resolved config covers every key and round-trips") {
  RunConfig c;
  c.apply_preset("paper");
  c.set("bench.deltas_int16", "5,15,30");
  const Metadata m = c.resolved();
  CHECK(m.size() == RunConfig::known_keys().size());
  RunConfig back;
  for (const auto& [k, v] : m) back.set(k, v);
  CHECK(back.resolved() == m);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"bogus"}).code == kExitUsage);
  CHECK(run({"attack"}).code == kExitUsage);
  CHECK(run({"--set", "attack.nope=1", "gen-corpus"}).code == kExitUsage);
  CHECK(run({"--set", "attack.omega", "gen-corpus"}).code == kExitUsage);
  CHECK(run({"--preset", "fast", "gen-corpus"}).code == kExitUsage);
  CHECK(run({"bench", "everything"}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("gen-corpus defaults and determinism") {
  test::TempDir dir("gen");
  const std::string a = (dir / "a").string(), b = (dir / "b").string();
  REQUIRE(run({"gen-corpus", "--out", a}).code == kExitOk);
  REQUIRE(run({"gen-corpus", "--out", b}).code == kExitOk);
  const std::string manifest = slurp(dir / "a/manifest.tsv");
  CHECK(std::count(manifest.begin(), manifest.end(), '\n') == 200);
  std::size_t wavs = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "a")) wavs += e.path().extension() == ".wav";
  CHECK(wavs == 200);
  CHECK(slurp(dir / "b/manifest.tsv") == manifest);
  CHECK(slurp(dir / "a/utt_0123.wav") == slurp(dir / "b/utt_0123.wav"));
  const Corpus corpus = read_corpus(dir / "a/manifest.tsv");
  for (const auto& item : corpus.items) {
    CHECK(item.transcript.size() >= 3);
    CHECK(item.transcript.size() <= 8);
  }
}

TEST_CASE("train writes checkpoint and a report echoing the resolved config") {
  auto& w = workspace();
  CHECK(std::filesystem::exists(w.model));
  const auto report = read_json(w.dir / "train/train_report.json");
  CHECK(report["schema_version"] == 1);
  CHECK(report["metadata"]["train.epochs"] == "100");
  CHECK(report["metadata"].size() == RunConfig::known_keys().size());
  CHECK(report["heldout_cer"].get<double>() <= 0.2);
  CHECK(report["epoch_loss"].size() == 100);

  const CliRun missing = run({"train", "--corpus", (w.dir / "no_such_corpus").string(), "--model",
                              (w.dir / "x.bin").string(), "--out", (w.dir / "x").string()});
  CHECK(missing.code != kExitOk);
  CHECK(missing.err.find("no_such_corpus") != std::string::npos);
}

TEST_CASE("attack outputs and exit codes") {
  auto& w = workspace();
  const Corpus corpus = read_corpus(std::filesystem::path(w.corpus) / "manifest.tsv");
  const std::string input = (std::filesystem::path(w.corpus) / "utt_0000.wav").string();
  const ToyCtcModel model = load_model(w.model);
  const std::string current = greedy_decode(forward(model, read_wav(input))).text;

  const std::string same = (w.dir / "same").string();
  const CliRun r0 = run({"attack", "--input", input, "--model", w.model, "--target", current, "--out", same});
  REQUIRE_MESSAGE(r0.code == kExitOk, r0.err);
  const auto j0 = read_json(std::filesystem::path(same) / "result.json");
  CHECK(j0["success"] == true);
  CHECK(j0["iterations_to_first_success"] == 0);
  CHECK(j0["snr_infinite"] == true);
  CHECK(j0["snr_db"].is_null());
  CHECK(read_wav(std::filesystem::path(same) / "delta.wav").samples == std::vector<double>(read_wav(input).size(), 0.0));

  std::string target;
  for (const auto& item : corpus.items) {
    if (item.transcript != current && item.transcript.size() <= current.size()) {
      target = item.transcript;
      break;
    }
  }
  REQUIRE_FALSE(target.empty());
  const std::string out = (w.dir / "atk").string();
  const CliRun r1 = run({"--preset", "paper", "attack", "--input", input, "--model", w.model, "--target", target,
                         "--out", out, "--trace", "--assert"});
  CHECK_MESSAGE(r1.code == kExitOk, r1.out, r1.err);
  for (const char* f : {"adversarial.wav", "delta.wav", "result.json", "trace.jsonl"}) {
    CHECK(std::filesystem::exists(std::filesystem::path(out) / f));
  }
  const auto j1 = read_json(std::filesystem::path(out) / "result.json");
  CHECK(j1["target"] == target);
  CHECK(j1["success"] == true);
  CHECK(j1["metadata"]["attack.omega"] == "1.2");
  CHECK(greedy_decode(forward(model, read_wav(std::filesystem::path(out) / "adversarial.wav"))).text == target);
  const std::string trace = slurp(std::filesystem::path(out) / "trace.jsonl");
  CHECK(static_cast<std::size_t>(std::count(trace.begin(), trace.end(), '\n')) ==
        j1["iterations_run"].get<std::size_t>() + 1);

  // Spelling out the published values gives the same resolved attack as the preset.
  const std::string flags_out = (w.dir / "flags").string();
  CHECK(run({"attack", "--input", input, "--model", w.model, "--target", target, "--out", flags_out,
             "--spt-proportion", "0.75", "--omega", "1.2", "--lr0", "100", "--beta", "0.8", "--gamma", "10", "--c",
             "0.001", "--max-iters", "500"})
            .code == kExitOk);
  auto j2 = read_json(std::filesystem::path(flags_out) / "result.json");
  auto meta1 = j1["metadata"], meta2 = j2["metadata"];
  for (const char* k : {"paths.output", "attack.trace"}) {
    meta1.erase(k);
    meta2.erase(k);
  }
  CHECK(meta1 == meta2);
  CHECK(slurp(std::filesystem::path(flags_out) / "delta.wav") == slurp(std::filesystem::path(out) / "delta.wav"));

  // Config file values sit below command-line flags.
  std::ofstream(w.dir / "cfg.ini") << "[attack]\nomega = 1.5\nmax_iters = 7\n";
  const std::string cfg_out = (w.dir / "cfg").string();
  CHECK(run({"--config", (w.dir / "cfg.ini").string(), "attack", "--input", input, "--model", w.model, "--target",
             target, "--out", cfg_out, "--max-iters", "3"})
            .code == kExitOk);
  const auto j3 = read_json(std::filesystem::path(cfg_out) / "result.json");
  CHECK(j3["metadata"]["attack.omega"] == "1.5");
  CHECK(j3["iterations_run"] == 3);

  CHECK(run({"attack", "--input", input, "--model", w.model, "--target", std::string(32, 'x'), "--out", out}).code ==
        kExitUnreachableTarget);
  CHECK(run({"attack", "--input", input, "--model", w.model, "--target", "Upper", "--out", out}).code ==
        kExitUnreachableTarget);
  CHECK(run({"attack", "--input", input, "--model", (w.dir / "none.bin").string(), "--target", "a", "--out", out})
            .code == kExitModelFailure);
  CHECK(run({"attack", "--input", (w.dir / "none.wav").string(), "--model", w.model, "--target", "a", "--out", out})
            .code == kExitFailure);
}

TEST_CASE("bench suites: layout, reproducibility, assertion mode") {
  auto& w = workspace();
  const std::vector<std::string> common{"--model", w.model, "--corpus", w.corpus, "--pairs", "3", "--trials", "2",
                                        "--max-iters", "120"};
  auto bench = [&](const std::string& suite, const std::string& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"bench", suite, "--out", out};
    args.insert(args.end(), common.begin(), common.end());
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  };

  const std::string rob = (w.dir / "rob").string();
  REQUIRE(bench("robustness", rob).code == kExitOk);
  const auto jr = read_json(std::filesystem::path(rob) / "bench_robustness.json");
  CHECK(jr["rows"].size() == 5 * 3);
  std::set<double> deltas;
  for (const auto& row : jr["rows"]) deltas.insert(row["delta_int16"].get<double>());
  CHECK(deltas == std::set<double>{5.0, 15.0, 30.0});
  CHECK(std::filesystem::exists(std::filesystem::path(rob) / "bench_robustness.csv"));

  const std::string met = (w.dir / "met").string(), met2 = (w.dir / "met2").string();
  REQUIRE(bench("metrics", met).code == kExitOk);
  REQUIRE(bench("metrics", met2, {"--threads", "1"}).code == kExitOk);
  auto a = read_json(std::filesystem::path(met) / "bench_metrics.json");
  auto b = read_json(std::filesystem::path(met2) / "bench_metrics.json");
  CHECK(a["rows"].size() == 4);
  for (auto* j : {&a, &b}) {
    j->erase("timing");
    (*j)["metadata"].erase("paths.output");
    (*j)["metadata"].erase("bench.threads");
  }
  CHECK(a.dump() == b.dump());
  const std::string csv = slurp(std::filesystem::path(met) / "bench_metrics.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  const std::string wpt = (w.dir / "wpt").string();
  REQUIRE(bench("wpt-speed", wpt).code == kExitOk);
  CHECK(read_json(std::filesystem::path(wpt) / "bench_wpt-speed.json")["rows"].size() == 2);

  // A model that never moves off its output bias cannot be attacked.
  const auto sabotaged = w.dir / "zero.bin";
  save_model(ToyCtcModel::zeros(ModelShape{}), sabotaged);
  std::vector<std::string> args{"bench", "metrics", "--out", (w.dir / "sab").string(), "--model", sabotaged.string(),
                                "--corpus", w.corpus, "--pairs", "3", "--max-iters", "20", "--assert"};
  CHECK(run(args).code == kExitAssertion);
  args.pop_back();
  CHECK(run(args).code == kExitOk);
}
