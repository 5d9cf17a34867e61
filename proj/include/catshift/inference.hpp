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

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "catshift/corpus.hpp"
#include "catshift/model.hpp"
#include "catshift/similarity.hpp"
#include "catshift/stats.hpp"

// The audit pipeline: pre-fine-tune completions, the no-fine-tune baseline,
// fine-tuning, post-fine-tune completions, shift scoring and the KS decision.

namespace catshift::inference {

// kPaired fine-tunes a fresh copy of the base model on the validation
// fine-tune split; kShared scores validation prompts on the model that was
// fine-tuned on the suspicious data.
enum class FinetuneMode { kPaired, kShared };
enum class Decision { kMember, kNonMember };
enum class DecidedBy { kBaselineShortcut, kCatShift };

FinetuneMode parse_finetune_mode(std::string_view name);
std::string_view finetune_mode_name(FinetuneMode mode);
std::string_view decision_name(Decision d);
std::string_view decided_by_name(DecidedBy d);

struct AuditConfig {
  double alpha = 0.1;
  double baseline_threshold = 1e-3;
  similarity::Scorer scorer;  // ngram_f1, n = 2
  FinetuneMode mode = FinetuneMode::kPaired;
  std::size_t n_finetune = 600;
  std::size_t n_test = 1000;
  std::uint64_t seed = 0;
  std::size_t max_new_tokens = 32;
  std::size_t parallelism = 8;  // completions in flight
  std::size_t repeat_k = 1;     // majority vote over k calls
  stats::TestMode test_mode = stats::TestMode::kAuto;
  stats::Alternative alternative = stats::Alternative::kTwoSided;
  model::FineTuneHyperparams hyperparams;
  std::chrono::milliseconds poll_interval{10'000};
  std::chrono::milliseconds job_timeout{std::chrono::hours(12)};
  double max_drop_fraction = 0.10;
  // Stage checkpoints for resuming an interrupted audit; empty disables.
  std::string work_dir;
  std::string dataset_id;  // free-form label carried into the report

  // Requires 0 < baseline_threshold < alpha < 1 and positive counts.
  void validate() const;
};

/// Splits both corpora for an audit. The validation fine-tune split mirrors
/// n_finetune in paired mode and is empty in shared mode.
corpus::CorpusBundle build_bundle(std::vector<corpus::PairRecord> suspicious,
                                  std::vector<corpus::PairRecord> validation,
                                  std::string validation_provenance,
                                  const AuditConfig& cfg);

struct BaselineResult {
  double mean_score = 0.0;  // mean Sim(completion, ground truth), suspicious
  similarity::ScoreSet per_sample;
  double validation_mean_score = 0.0;
  similarity::ScoreSet validation_per_sample;
  stats::KsResult ks;  // suspicious vs validation ground-truth similarity
  double p_value = 1.0;
  bool direction_member = false;  // median suspicious > median validation
};

struct ScoredCompletion {
  std::string pair_id;
  std::string pre;
  std::optional<std::string> post;  // absent on the baseline shortcut
  double baseline_score = 0.0;      // Sim(pre, ground truth)
  std::optional<double> shift_score;  // Sim(pre, post)
};

struct JobSummary {
  model::FineTuneJob job;
  model::CheckpointChoice selected;
  std::vector<std::string> pair_ids;
};

struct RunMetadata {
  model::ModelRef base_model;
  std::optional<JobSummary> suspicious_job;
  std::optional<JobSummary> validation_job;
  std::string validation_provenance;
  std::vector<std::string> suspicious_test_ids;
  std::vector<std::string> validation_test_ids;
  std::size_t dropped_suspicious = 0;
  std::size_t dropped_validation = 0;
  std::vector<std::string> warnings;
  std::string started_at;   // ISO-8601 UTC
  std::string finished_at;
  bool resumed = false;
  // "member" or "non_member" when an experiment harness knows the truth.
  std::string ground_truth;
};

struct AuditReport {
  Decision decision = Decision::kNonMember;
  DecidedBy decided_by = DecidedBy::kCatShift;
  std::optional<stats::KsResult> ks;  // absent on the baseline shortcut
  BaselineResult baseline;
  similarity::ScoreSet suspicious_scores;
  similarity::ScoreSet validation_scores;
  std::optional<double> median_shift_direction;  // median(S_v) - median(S_s)
  std::vector<ScoredCompletion> suspicious;
  std::vector<ScoredCompletion> validation;
  AuditConfig config;
  RunMetadata meta;

  // The p-value behind the decision.
  double deciding_p_value() const;
};

/// Member iff p < alpha; p == alpha fails to reject.
Decision decide(double p_value, double alpha);
Decision decide(const stats::KsResult& ks, double alpha);

/// Completes each prompt once on the base model and compares the
/// ground-truth similarity of the two datasets. Transport failures drop the
/// sample; more than cfg.max_drop_fraction drops raise Error(kInsufficientData).
BaselineResult run_baseline(model::ModelClient& client, const model::ModelRef& base,
                            const std::vector<corpus::PairRecord>& suspicious_test,
                            const std::vector<corpus::PairRecord>& validation_test,
                            const AuditConfig& cfg);

/// The full fine-tune pipeline. The baseline is still computed from the
/// pre-fine-tune completions and recorded, but only the KS test decides.
AuditReport run_catshift(model::ModelClient& client, const corpus::CorpusBundle& bundle,
                         const AuditConfig& cfg);

/// Baseline first; a baseline p below cfg.baseline_threshold in the member
/// direction decides Member without any fine-tuning. Otherwise the verdict is
/// run_catshift's alone.
AuditReport dual_test(model::ModelClient& client, const corpus::CorpusBundle& bundle,
                      const AuditConfig& cfg);

// Checks the decision invariant of a report against its own config.
bool decision_consistent(const AuditReport& report);

}  // namespace catshift::inference
