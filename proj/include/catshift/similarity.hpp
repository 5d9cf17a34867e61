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

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "catshift/completion_record.hpp"

// Output-shift similarity between two completions. All lexical metrics work on
// whitespace tokens, are symmetric and return values in [0, 1].

namespace catshift::similarity {

enum class Metric { kExact, kNgramF1, kLcsRatio, kEmbedding };

Metric parse_metric(std::string_view name);
std::string_view metric_name(Metric metric);

struct SimilarityScore {
  double value = 0.0;
  Metric metric = Metric::kNgramF1;
  // Present for the F1-style metrics; `a` is scored as the candidate.
  std::optional<double> precision;
  std::optional<double> recall;
};

enum class DatasetTag { kSuspicious, kValidation };

struct ScoreSet {
  std::vector<double> scores;
  DatasetTag dataset_tag = DatasetTag::kSuspicious;
  Metric metric = Metric::kNgramF1;
};

SimilarityScore sim_exact(std::string_view a, std::string_view b);

/// F1 over clipped n-gram multiset counts. When either side has fewer than
/// `n` tokens, n drops to the shorter length. Both empty scores 1; exactly one
/// empty scores 0.
SimilarityScore sim_ngram_f1(std::string_view a, std::string_view b,
                             std::size_t n);

/// F1 with precision = LCS/|a| and recall = LCS/|b| over token sequences.
SimilarityScore sim_lcs_ratio(std::string_view a, std::string_view b);

// Token-level longest common subsequence length, O(|a|·|b|) time.
std::size_t lcs_length(const std::vector<std::string>& a,
                       const std::vector<std::string>& b);

struct RemoteScorerOptions {
  std::string endpoint;  // http(s)://host[:port]
  std::string bearer_token;
  int timeout_seconds = 30;
};

/// Calls POST /v1/similarity {a, b} -> {score}. Scores outside [0,1] are
/// clamped and `clamped` is set. Throws Error(kTransport) if unreachable.
SimilarityScore sim_embedding(std::string_view a, std::string_view b,
                              const RemoteScorerOptions& scorer,
                              bool* clamped = nullptr);

// Metric dispatch; `ngram_n` only matters for kNgramF1.
struct Scorer {
  Metric metric = Metric::kNgramF1;
  std::size_t ngram_n = 2;
  std::optional<RemoteScorerOptions> remote;  // required for kEmbedding

  SimilarityScore operator()(std::string_view a, std::string_view b) const;
};

/// s = Sim(pre, post); lower means a larger output shift.
SimilarityScore score_shift(const CompletionRecord& rec, const Scorer& scorer);

}  // namespace catshift::similarity
