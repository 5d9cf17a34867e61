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

#include "catshift/similarity.hpp"

#include <algorithm>
#include <map>

#include "catshift/error.hpp"
#include "catshift/text.hpp"
#include "http_client.hpp"

namespace catshift::similarity {
namespace {

double f1(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

std::map<std::string, std::size_t> ngram_counts(
    const std::vector<std::string>& tokens, std::size_t n) {
  std::map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t k = 1; k < n; ++k) {
      key += '\x1f';
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

// Shared empty-input convention for the F1 metrics; nullopt means "score it".
std::optional<SimilarityScore> empty_case(std::size_t len_a, std::size_t len_b,
                                          Metric metric) {
  if (len_a == 0 && len_b == 0) return SimilarityScore{1.0, metric, 1.0, 1.0};
  if (len_a == 0 || len_b == 0) return SimilarityScore{0.0, metric, 0.0, 0.0};
  return std::nullopt;
}

}  // namespace

Metric parse_metric(std::string_view name) {
  if (name == "exact") return Metric::kExact;
  if (name == "ngram_f1") return Metric::kNgramF1;
  if (name == "lcs_ratio") return Metric::kLcsRatio;
  if (name == "embedding") return Metric::kEmbedding;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown similarity metric '" + std::string(name) + "'");
}

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::kExact: return "exact";
    case Metric::kNgramF1: return "ngram_f1";
    case Metric::kLcsRatio: return "lcs_ratio";
    case Metric::kEmbedding: return "embedding";
  }
  return "?";
}

SimilarityScore sim_exact(std::string_view a, std::string_view b) {
  return {text::normalize(a) == text::normalize(b) ? 1.0 : 0.0, Metric::kExact,
          std::nullopt, std::nullopt};
}

SimilarityScore sim_ngram_f1(std::string_view a, std::string_view b,
                             std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "n-gram order must be >= 1");
  const auto ta = text::tokenize(a);
  const auto tb = text::tokenize(b);
  if (auto e = empty_case(ta.size(), tb.size(), Metric::kNgramF1)) return *e;

  n = std::min({n, ta.size(), tb.size()});
  const auto ca = ngram_counts(ta, n);
  const auto cb = ngram_counts(tb, n);
  std::size_t overlap = 0;
  for (const auto& [gram, count] : ca) {
    if (auto it = cb.find(gram); it != cb.end()) overlap += std::min(count, it->second);
  }
  const double precision =
      static_cast<double>(overlap) / static_cast<double>(ta.size() - n + 1);
  const double recall =
      static_cast<double>(overlap) / static_cast<double>(tb.size() - n + 1);
  return {f1(precision, recall), Metric::kNgramF1, precision, recall};
}

std::size_t lcs_length(const std::vector<std::string>& a,
                       const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

SimilarityScore sim_lcs_ratio(std::string_view a, std::string_view b) {
  const auto ta = text::tokenize(a);
  const auto tb = text::tokenize(b);
  if (auto e = empty_case(ta.size(), tb.size(), Metric::kLcsRatio)) return *e;
  const auto lcs = static_cast<double>(lcs_length(ta, tb));
  const double precision = lcs / static_cast<double>(ta.size());
  const double recall = lcs / static_cast<double>(tb.size());
  return {f1(precision, recall), Metric::kLcsRatio, precision, recall};
}

SimilarityScore sim_embedding(std::string_view a, std::string_view b,
                              const RemoteScorerOptions& scorer,
                              bool* clamped) {
  http::Endpoint endpoint{scorer.endpoint, scorer.bearer_token,
                          scorer.timeout_seconds, {}};
  const nlohmann::json body = {{"a", a}, {"b", b}};
  const auto res =
      http::request_json(endpoint, http::Method::kPost, "/v1/similarity", &body);
  if (!res.is_object() || !res.contains("score") || !res["score"].is_number()) {
    throw Error(ErrorCode::kProtocol, "/v1/similarity: missing numeric 'score'");
  }
  const double raw = res["score"].get<double>();
  const double value = std::clamp(raw, 0.0, 1.0);
  if (clamped) *clamped = value != raw;
  return {value, Metric::kEmbedding, std::nullopt, std::nullopt};
}

SimilarityScore Scorer::operator()(std::string_view a, std::string_view b) const {
  switch (metric) {
    case Metric::kExact: return sim_exact(a, b);
    case Metric::kNgramF1: return sim_ngram_f1(a, b, ngram_n);
    case Metric::kLcsRatio: return sim_lcs_ratio(a, b);
    case Metric::kEmbedding:
      if (!remote) {
        throw Error(ErrorCode::kInvalidArgument,
                    "embedding metric requires a scorer endpoint");
      }
      return sim_embedding(a, b, *remote);
  }
  throw Error(ErrorCode::kInternal, "unhandled metric");
}

SimilarityScore score_shift(const CompletionRecord& rec, const Scorer& scorer) {
  return scorer(rec.pre, rec.post);
}

}  // namespace catshift::similarity
