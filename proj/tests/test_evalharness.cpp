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

#include <cmath>
#include <json.hpp>

#include "trained_fixture.hpp"
#include "wsadv/error.hpp"
#include "wsadv/evalharness.hpp"
#include "wsadv/textdist.hpp"

using namespace wsadv;

namespace {

AttackResult fake_result(bool success) {
  AttackResult r;
  r.success = success;
  return r;
}

// Results whose "adversarial" clip is an unmodified corpus clip: the first
// `hits` target their own transcript, the rest target another one.
std::vector<AttackResult> recorded_results(std::size_t count, std::size_t hits) {
  const auto& fx = test::trained_fixture();
  std::vector<AttackResult> out;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& item = fx.corpus.items[i];
    AttackResult r;
    r.adversarial = item.clip;
    r.target = i < hits ? greedy_decode(forward(fx.model, item.clip)).text : std::string("zz");
    r.success = i < hits;
    out.push_back(r);
  }
  return out;
}

AttackConfig small_config() {
  AttackConfig c;
  c.max_iters = 150;
  c.record_trace = false;
  return c;
}

void check_same(const AttackResult& a, const AttackResult& b) {
  CHECK(a.target == b.target);
  CHECK(a.success == b.success);
  CHECK(a.final_transcription == b.final_transcription);
  CHECK(a.iterations_to_first_success == b.iterations_to_first_success);
  CHECK(a.iterations_run == b.iterations_run);
  CHECK((a.snr_db == b.snr_db || (std::isnan(a.snr_db) && std::isnan(b.snr_db))));
  CHECK(a.dbx_delta == b.dbx_delta);
  CHECK(a.metric_value == b.metric_value);
  CHECK(a.perturbed_samples == b.perturbed_samples);
  CHECK(a.untouched_samples == b.untouched_samples);
  CHECK(a.final_lr == b.final_lr);
  CHECK(a.wall_time_s == b.wall_time_s);
  CHECK(a.error == b.error);
}

}  // namespace

TEST_CASE("eval_success_rate") {
  const std::vector<AttackResult> all{fake_result(true), fake_result(true)};
  CHECK(eval_success_rate(all) == 1.0);
  const std::vector<AttackResult> three{fake_result(true), fake_result(false), fake_result(true), fake_result(true)};
  CHECK(eval_success_rate(three) == 0.75);
  CHECK_THROWS_AS(eval_success_rate(std::vector<AttackResult>{}), DomainError);
  std::vector<AttackResult> mixed;
  std::size_t count = 0;
  for (int i = 0; i < 37; ++i) {
    mixed.push_back(fake_result(i % 3 != 0 && i % 7 != 0));
    count += mixed.back().success ? 1 : 0;
  }
  CHECK(eval_success_rate(mixed) == static_cast<double>(count) / 37.0);
}

TEST_CASE("eval_robustness at zero noise equals the success rate") {
  const auto& fx = test::trained_fixture();
  const auto results = recorded_results(12, 9);
  const RobustnessOutcome zero = eval_robustness(fx.model, results, 0.0, 4, 3);
  CHECK(zero.robustness_rate == eval_success_rate(results));
  CHECK(zero.trials == 48);
  // Successful examples add no WER; "zz" against a mismatch counts fully.
  double expected_wer = 0.0;
  for (std::size_t i = 9; i < 12; ++i) {
    expected_wer += 4 * wer("zz", greedy_decode(forward(fx.model, results[i].adversarial)).text).ratio;
  }
  CHECK(zero.mean_wer == doctest::Approx(expected_wer / 48.0));
  for (double bound : {5.0, 500.0, 5000.0}) {
    const auto o = eval_robustness(fx.model, results, bound / kInt16Scale, 3, 1);
    CHECK((o.robustness_rate >= 0.0 && o.robustness_rate <= 1.0));
  }
  CHECK(eval_robustness(fx.model, results, 5000.0 / kInt16Scale, 3, 1).robustness_rate <= zero.robustness_rate);
  CHECK_THROWS_AS(eval_robustness(fx.model, results, -1.0, 3, 1), DomainError);
  CHECK(eval_robustness(fx.model, results, 0.01, 3, 9, {}, 1).robustness_rate ==
        eval_robustness(fx.model, results, 0.01, 3, 9, {}, 4).robustness_rate);
}

TEST_CASE("make_cross_pairs") {
  const auto& fx = test::trained_fixture();
  const auto pairs = make_cross_pairs(fx.corpus, fx.model, 15, 5);
  REQUIRE(pairs.size() == 15);
  for (const auto& p : pairs) {
    CHECK(p.target != p.source_transcript);
    CHECK(min_frames_for(p.target) <= fx.model.frames_for(p.clip.size()).frame_count());
  }
  const auto again = make_cross_pairs(fx.corpus, fx.model, 15, 5);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(again[i].target == pairs[i].target);
    CHECK(again[i].clip == pairs[i].clip);
  }
}

TEST_CASE("attack_all isolates failures per example") {
  const auto& fx = test::trained_fixture();
  auto pairs = make_cross_pairs(fx.corpus, fx.model, 3, 2);
  pairs[1].target = std::string(32, 'q');
  const auto results = attack_all(fx.model, pairs, small_config(), 2);
  REQUIRE(results.size() == 3);
  CHECK_FALSE(results[1].success);
  CHECK_FALSE(results[1].error.empty());
  CHECK(results[0].error.empty());
  CHECK(results[2].error.empty());
  CHECK(results[0].target == pairs[0].target);
}

TEST_CASE("robustness suite layout and Table 2 keying") {
  const auto& fx = test::trained_fixture();
  const auto pairs = make_cross_pairs(fx.corpus, fx.model, 4, 8);
  AttackConfig base = small_config();
  AttackConfig full = base;
  full.spt_proportion = 1.0;
  const std::vector<Approach> approaches{{"baseline", full}, {"spt-75", base}};
  const std::vector<double> bounds{0.0, 5.0, 15.0, 30.0};
  const RobustnessReport report = robustness_suite(fx.model, pairs, approaches, bounds, 3, 7);
  REQUIRE(report.rows.size() == 8);
  CHECK(report.rows[0].approach == "baseline");
  CHECK(report.rows[4].approach == "spt-75");
  CHECK(report.rows[1].delta_int16 == 5.0);
  REQUIRE(report.success_rates.size() == 2);
  CHECK(report.rows[0].robustness_rate == report.success_rates[0].second);
  CHECK(report.rows[4].robustness_rate == report.success_rates[1].second);
  for (const auto& r : report.rows) CHECK((r.robustness_rate >= 0.0 && r.robustness_rate <= 1.0));

  const auto csv = to_csv(report);
  CHECK(csv.rfind("approach,delta_int16,robustness_rate,mean_wer,trials\n", 0) == 0);
  const auto j = nlohmann::json::parse(to_json(report, {{"k", "v"}}));
  CHECK(j["schema_version"] == 1);
  CHECK(j["kind"] == "robustness");
  CHECK(j["metadata"]["k"] == "v");
  CHECK(j["rows"].size() == 8);

  const RobustnessReport again = robustness_suite(fx.model, pairs, approaches, bounds, 3, 7);
  CHECK(to_json(again, {{"k", "v"}}) == to_json(report, {{"k", "v"}}));
}

TEST_CASE("compare_metrics emits four paired rows") {
  const auto& fx = test::trained_fixture();
  const auto pairs = make_cross_pairs(fx.corpus, fx.model, 3, 4);
  AttackConfig base = small_config();
  base.c = 0.5;
  const BenchmarkSummary s = compare_metrics(fx.model, pairs, base, 2);
  REQUIRE(s.rows.size() == 4);
  CHECK(s.rows[0].metric == MetricKind::kTvd);
  CHECK(s.rows[3].metric == MetricKind::kCosine);
  for (const auto& r : s.rows) {
    CHECK(r.c == default_trade_off(r.metric));
    CHECK(r.runs == 3);
    CHECK((r.success_rate >= 0.0 && r.success_rate <= 1.0));
  }
  const auto j = nlohmann::json::parse(to_json(s, {}));
  CHECK(j["rows"].size() == 4);
  CHECK(j.contains("timing"));
  CHECK_FALSE(j["rows"][0].contains("mean_wall_time_s"));

  // Paired runs: every metric variant attacks pair i with the same seed, hence
  // the same SPT mask; samples outside it stay untouched in all four.
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto mask = spt_mask(pairs[i].clip.size(), base.spt_proportion, base.seed + i);
    for (MetricKind m : {MetricKind::kTvd, MetricKind::kLinf, MetricKind::kL2, MetricKind::kCosine}) {
      AttackConfig c = base;
      c.metric = m;
      c.c.reset();
      c.target = pairs[i].target;
      c.seed = base.seed + i;
      const AttackResult r = run_attack(fx.model, pairs[i].clip, c);
      for (std::size_t k = 0; k < mask.size(); ++k) {
        if (!mask[k]) REQUIRE(r.delta.samples[k] == 0.0);
      }
    }
  }
}

TEST_CASE("wpt_speed_trial") {
  const auto& fx = test::trained_fixture();
  const auto pairs = make_cross_pairs(fx.corpus, fx.model, 4, 6);
  AttackConfig on = small_config();
  AttackConfig off = on;
  off.key_point_weighting = false;
  off.lr_decay = false;
  const WptSpeedResult w = wpt_speed_trial(fx.model, pairs, on, off, 2);
  REQUIRE(w.iterations_on.size() == 4);
  REQUIRE(w.iterations_off.size() == 4);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    AttackConfig c = off;
    c.target = pairs[i].target;
    c.seed = off.seed + i;
    CHECK(run_attack(fx.model, pairs[i].clip, c).iterations_to_first_success == w.iterations_off[i]);
  }
  std::vector<double> counted;
  for (const auto& v : w.iterations_on) counted.push_back(static_cast<double>(v.value_or(on.max_iters + 1)));
  CHECK(w.median_on == median(counted));
  const auto j = nlohmann::json::parse(to_json(w, {}));
  CHECK(j["rows"][0]["iterations"].size() == 4);
  CHECK(to_csv(w).find("median,") != std::string::npos);
}

TEST_CASE("median") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS_AS(median({}), DomainError);
}

TEST_CASE("attack result JSON round trip") {
  const auto& fx = test::trained_fixture();
  const auto pairs = make_cross_pairs(fx.corpus, fx.model, 2, 3);
  AttackConfig c = small_config();
  c.target = pairs[0].target;
  AttackResult r = run_attack(fx.model, pairs[0].clip, c);
  const std::string text = attack_result_to_json(r, {{"seed", "0"}});
  const AttackResult back = attack_result_from_json(text);
  check_same(back, r);
  CHECK(attack_result_to_json(back, {{"seed", "0"}}) == text);

  AttackResult trivial;
  trivial.target = "a";
  trivial.success = true;
  trivial.iterations_to_first_success = 0;
  trivial.snr_db = std::numeric_limits<double>::infinity();
  trivial.dbx_delta = std::numeric_limits<double>::infinity();
  const std::string t2 = attack_result_to_json(trivial);
  CHECK(nlohmann::json::parse(t2)["snr_infinite"] == true);
  check_same(attack_result_from_json(t2), trivial);
  CHECK_THROWS_AS(attack_result_from_json("{"), Error);
  CHECK_THROWS_AS(attack_result_from_json(R"({"schema_version": 9})"), Error);

  std::vector<TraceRecord> trace{{0, 1.5, 0.25, 0.003, 2, "ab"}, {1, 1.0, 0.5, 0.003, 0, "a"}};
  const std::string lines = trace_to_jsonl(trace);
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 2);
  const auto first = nlohmann::json::parse(lines.substr(0, lines.find('\n')));
  CHECK(first["levenshtein"] == 2);
  CHECK(first["transcription"] == "ab");
}
