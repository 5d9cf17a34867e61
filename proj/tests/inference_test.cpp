//
// Copyright 2026 The CatShift Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include <gtest/gtest.h>

#include <atomic>
#include <functional>
#include <set>

#include "catshift/error.hpp"
#include "catshift/hashing.hpp"
#include "catshift/inference.hpp"
#include "catshift/report_io.hpp"
#include "catshift/sim_model.hpp"
#include "test_util.hpp"

namespace catshift::inference {
namespace {

using corpus::PairRecord;

std::vector<PairRecord> batch(std::size_t n, std::uint64_t seed, const std::string& prefix) {
  return corpus::make_pairs(model::synthetic_texts(n, 16, 36, seed, prefix), {}).pairs;
}

AuditConfig small_config() {
  AuditConfig cfg;
  cfg.n_finetune = 40;
  cfg.n_test = 50;
  cfg.parallelism = 4;
  cfg.seed = 9;
  cfg.poll_interval = std::chrono::milliseconds(0);
  return cfg;
}

// Delegates to a simulator and lets a test interfere with individual calls.
class HookedClient final : public model::ModelClient {
 public:
  explicit HookedClient(model::SimModelState state) : inner(std::move(state)) {}

  model::SimModelClient inner;
  std::function<void(std::string_view prompt)> before_complete;
  std::function<void(model::FineTuneJob&)> after_poll;
  std::atomic<std::size_t> completions = 0;

  model::ModelRef base_model() const override { return inner.base_model(); }
  bool has_model(const model::ModelRef& m) const override { return inner.has_model(m); }

 protected:
  std::string do_complete(const model::ModelRef& m, std::string_view prompt,
                          std::size_t max_new) override {
    ++completions;
    if (before_complete) before_complete(prompt);
    return inner.complete(m, prompt, max_new);
  }
  model::FineTuneJob do_start_finetune(const model::ModelRef& base,
                                       const model::FineTuneSpec& spec) override {
    return inner.start_finetune(base, spec);
  }
  model::FineTuneJob do_poll_finetune(const model::FineTuneJob& job) override {
    auto next = inner.poll_finetune(job);
    if (after_poll) after_poll(next);
    return next;
  }
};

struct World {
  std::vector<PairRecord> suspicious;
  std::vector<PairRecord> validation;
  model::SimModelState state;
};

World member_world(double strength = 0.3, double gain_recover = 0.6) {
  World w{batch(150, 1, "s"), batch(150, 2, "v"), {}};
  w.state = model::seed_memory({}, w.suspicious, strength, "old");
  w.state.gain_recover = gain_recover;
  w.state.noise_seed = 4;
  return w;
}

World nonmember_world() {
  World w{batch(150, 3, "s"), batch(150, 2, "v"), {}};
  w.state.noise_seed = 4;
  return w;
}

AuditReport audit(const World& w, const AuditConfig& cfg, std::size_t* jobs = nullptr) {
  model::SimModelClient client(w.state);
  const auto bundle = build_bundle(w.suspicious, w.validation, "held out", cfg);
  auto report = dual_test(client, bundle, cfg);
  if (jobs) *jobs = client.jobs_started();
  return report;
}

TEST(Decide, StrictThreshold) {
  EXPECT_EQ(decide(6.44e-5, 0.1), Decision::kMember);
  EXPECT_EQ(decide(0.711, 0.1), Decision::kNonMember);
  EXPECT_EQ(decide(0.1, 0.1), Decision::kNonMember);
}

TEST(Decide, FourVersusFourExample) {
  const std::vector<double> s{1, 1, 1, 1}, v{0, 0, 0, 0};
  EXPECT_DOUBLE_EQ(stats::mean(s), 1.0);
  EXPECT_DOUBLE_EQ(stats::mean(v), 0.0);
  const auto ks = stats::ks_two_sample(s, v, stats::TestMode::kExact);
  EXPECT_DOUBLE_EQ(ks.d_statistic, 1.0);
  EXPECT_NEAR(ks.p_value, 2.0 / 70.0, 1e-12);
  EXPECT_EQ(decide(ks, 0.1), Decision::kMember);
}

TEST(Config, Validation) {
  AuditConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.baseline_threshold = 0.2;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.n_test = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.alpha = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Names, RoundTrip) {
  EXPECT_EQ(parse_finetune_mode("paired"), FinetuneMode::kPaired);
  EXPECT_EQ(parse_finetune_mode("shared_finetune"), FinetuneMode::kShared);
  EXPECT_THROW(parse_finetune_mode("both"), Error);
  EXPECT_EQ(decision_name(Decision::kMember), "Member");
  EXPECT_EQ(decided_by_name(DecidedBy::kBaselineShortcut), "baseline_shortcut");
}

TEST(Pipeline, DetectsFadedMember) {
  std::size_t jobs = 0;
  const auto r = audit(member_world(), small_config(), &jobs);
  EXPECT_EQ(r.decision, Decision::kMember);
  EXPECT_EQ(r.decided_by, DecidedBy::kCatShift);
  ASSERT_TRUE(r.ks);
  EXPECT_LT(r.ks->p_value, 1e-6);
  EXPECT_GT(*r.median_shift_direction, 0.0);
  EXPECT_EQ(jobs, 2u);
  EXPECT_EQ(r.suspicious_scores.scores.size(), 50u);
  EXPECT_TRUE(decision_consistent(r));
  // Strength 0.3 sits below recall, so the baseline alone sees nothing.
  EXPECT_GT(r.baseline.p_value, 1e-3);
}

TEST(Pipeline, ClearsNonMember) {
  const auto r = audit(nonmember_world(), small_config());
  EXPECT_EQ(r.decision, Decision::kNonMember);
  EXPECT_EQ(r.decided_by, DecidedBy::kCatShift);
  EXPECT_GE(r.deciding_p_value(), 0.1);
  EXPECT_TRUE(decision_consistent(r));
}

TEST(Pipeline, SelfComparisonOfHalvesIsNonMember) {
  // Both halves of one unseen corpus; the only difference is the split.
  const auto all = batch(300, 5, "x");
  World w{{all.begin(), all.begin() + 150}, {all.begin() + 150, all.end()}, {}};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto cfg = small_config();
    cfg.seed = seed;
    EXPECT_EQ(audit(w, cfg).decision, Decision::kNonMember) << seed;
  }
}

TEST(DualTest, ShortcutSkipsFinetuning) {
  auto w = member_world(0.95);
  std::size_t jobs = 99;
  const auto r = audit(w, small_config(), &jobs);
  EXPECT_EQ(r.decision, Decision::kMember);
  EXPECT_EQ(r.decided_by, DecidedBy::kBaselineShortcut);
  EXPECT_EQ(jobs, 0u);
  EXPECT_FALSE(r.ks);
  EXPECT_LT(r.baseline.p_value, 1e-3);
  EXPECT_TRUE(r.baseline.direction_member);
  EXPECT_TRUE(r.suspicious_scores.scores.empty());
  for (const auto& c : r.suspicious) EXPECT_FALSE(c.post);
  EXPECT_TRUE(decision_consistent(r));
}

TEST(DualTest, InvertedBaselineDefersToCatShift) {
  // The validation corpus is the one the model recalls verbatim.
  World w{batch(150, 3, "s"), batch(150, 2, "v"), {}};
  w.state = model::seed_memory({}, w.validation, 0.95, "old");
  std::size_t jobs = 0;
  const auto r = audit(w, small_config(), &jobs);
  EXPECT_LT(r.baseline.p_value, 1e-3);
  EXPECT_FALSE(r.baseline.direction_member);
  EXPECT_EQ(r.decided_by, DecidedBy::kCatShift);
  EXPECT_GT(jobs, 0u);
  EXPECT_TRUE(decision_consistent(r));
}

TEST(DualTest, WeakBaselineDefersToCatShift) {
  std::size_t jobs = 0;
  const auto r = audit(nonmember_world(), small_config(), &jobs);
  EXPECT_GE(r.baseline.p_value, 1e-3);
  EXPECT_EQ(r.decided_by, DecidedBy::kCatShift);
  EXPECT_EQ(jobs, 2u);
}

TEST(DualTest, CatShiftOnlyPathMatchesDualVerdict) {
  const auto w = member_world();
  const auto cfg = small_config();
  model::SimModelClient client(w.state);
  const auto bundle = build_bundle(w.suspicious, w.validation, "held out", cfg);
  const auto direct = run_catshift(client, bundle, cfg);
  const auto dual = audit(w, cfg);
  EXPECT_EQ(direct.decision, dual.decision);
  EXPECT_DOUBLE_EQ(direct.ks->p_value, dual.ks->p_value);
}

TEST(Pipeline, SharedModeRunsOneJob) {
  auto cfg = small_config();
  cfg.mode = FinetuneMode::kShared;
  std::size_t jobs = 0;
  const auto r = audit(member_world(), cfg, &jobs);
  EXPECT_EQ(jobs, 1u);
  EXPECT_FALSE(r.meta.validation_job);
  EXPECT_EQ(r.decision, Decision::kMember);
}

TEST(Pipeline, SplitsStayDisjoint) {
  const auto cfg = small_config();
  const auto r = audit(member_world(), cfg);
  ASSERT_TRUE(r.meta.suspicious_job && r.meta.validation_job);
  const std::set<std::string> tuned_s(r.meta.suspicious_job->pair_ids.begin(),
                                      r.meta.suspicious_job->pair_ids.end());
  const std::set<std::string> tuned_v(r.meta.validation_job->pair_ids.begin(),
                                      r.meta.validation_job->pair_ids.end());
  EXPECT_EQ(tuned_s.size(), cfg.n_finetune);
  EXPECT_EQ(tuned_v.size(), cfg.n_finetune);
  for (const auto& id : r.meta.suspicious_test_ids) EXPECT_FALSE(tuned_s.contains(id));
  for (const auto& id : r.meta.validation_test_ids) EXPECT_FALSE(tuned_v.contains(id));
}

TEST(Pipeline, ToleratesFewDrops) {
  const auto w = member_world();
  auto cfg = small_config();
  HookedClient client(w.state);
  // Roughly 1 in 25 prompts is unreachable, on every attempt.
  client.before_complete = [](std::string_view prompt) {
    if (fnv1a64(prompt) % 25 == 0) throw Error(ErrorCode::kTransport, "reset");
  };
  const auto bundle = build_bundle(w.suspicious, w.validation, "held out", cfg);
  const auto r = dual_test(client, bundle, cfg);
  const auto dropped = r.meta.dropped_suspicious + r.meta.dropped_validation;
  EXPECT_GT(dropped, 0u);
  EXPECT_EQ(r.suspicious_scores.scores.size() + r.validation_scores.scores.size() + dropped,
            2 * cfg.n_test);
  EXPECT_EQ(r.decision, Decision::kMember);
}

TEST(Pipeline, TooManyDropsAbort) {
  const auto w = member_world();
  auto cfg = small_config();
  HookedClient client(w.state);
  client.before_complete = [](std::string_view prompt) {
    if (fnv1a64(prompt) % 3 == 0) throw Error(ErrorCode::kTransport, "reset");
  };
  const auto bundle = build_bundle(w.suspicious, w.validation, "held out", cfg);
  try {
    dual_test(client, bundle, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
}

TEST(Pipeline, FailedJobPropagates) {
  const auto w = member_world();
  auto cfg = small_config();
  HookedClient client(w.state);
  client.after_poll = [](model::FineTuneJob& job) {
    if (job.status == model::JobStatus::kSucceeded) {
      job.status = model::JobStatus::kFailed;
      job.result_model.reset();
      job.message = "out of memory";
    }
  };
  const auto bundle = build_bundle(w.suspicious, w.validation, "held out", cfg);
  try {
    dual_test(client, bundle, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kJobFailed);
    EXPECT_NE(std::string(e.what()).find("out of memory"), std::string::npos);
  }
}

nlohmann::json without_timestamps(nlohmann::json j) {
  j["run_metadata"].erase("started_at");
  j["run_metadata"].erase("finished_at");
  return j;
}

TEST(Pipeline, DeterministicReports) {
  const auto w = member_world();
  const auto a = io::to_json(audit(w, small_config()));
  const auto b = io::to_json(audit(w, small_config()));
  EXPECT_EQ(without_timestamps(a).dump(), without_timestamps(b).dump());
  auto cfg = small_config();
  cfg.parallelism = 1;
  const auto c = io::to_json(audit(w, cfg));
  EXPECT_EQ(without_timestamps(a)["suspicious"], without_timestamps(c)["suspicious"]);
}

TEST(Pipeline, ResumesFromWorkDir) {
  testutil::TempDir dir;
  const auto w = member_world();
  auto cfg = small_config();
  cfg.work_dir = dir.path().string();
  HookedClient client(w.state);
  const auto bundle = build_bundle(w.suspicious, w.validation, "held out", cfg);
  const auto first = dual_test(client, bundle, cfg);
  EXPECT_FALSE(first.meta.resumed);
  const auto calls = client.completions.load();
  const auto jobs = client.inner.jobs_started();

  const auto second = dual_test(client, bundle, cfg);
  EXPECT_TRUE(second.meta.resumed);
  EXPECT_EQ(client.completions.load(), calls);
  EXPECT_EQ(client.inner.jobs_started(), jobs);
  EXPECT_EQ(without_timestamps(io::to_json(first))["p_value"],
            without_timestamps(io::to_json(second))["p_value"]);

  // A different seed changes the fingerprint, so nothing is reused.
  cfg.seed += 1;
  const auto other = build_bundle(w.suspicious, w.validation, "held out", cfg);
  const auto third = dual_test(client, other, cfg);
  EXPECT_FALSE(third.meta.resumed);
  EXPECT_GT(client.completions.load(), calls);
}

TEST(Pipeline, ShiftGrowsWithRecoveryGain) {
  double previous = 1.0;
  for (double gr : {0.2, 0.4, 0.6, 0.8}) {
    const auto r = audit(member_world(0.3, gr), small_config());
    const double m = stats::mean(r.suspicious_scores.scores);
    EXPECT_LE(m, previous + 1e-12) << gr;
    previous = m;
  }
}

TEST(Pipeline, TamperedReportIsInconsistent) {
  auto r = audit(nonmember_world(), small_config());
  ASSERT_TRUE(decision_consistent(r));
  r.decision = Decision::kMember;
  EXPECT_FALSE(decision_consistent(r));
}

}  // namespace
}  // namespace catshift::inference
