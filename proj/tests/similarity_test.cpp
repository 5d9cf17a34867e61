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

#include <map>
#include <random>

#include "catshift/error.hpp"
#include "catshift/hashing.hpp"
#include "catshift/similarity.hpp"
#include "catshift/sim_model.hpp"
#include "catshift/text.hpp"
#include "oracles.hpp"

namespace catshift::similarity {
namespace {

std::string random_text(std::mt19937_64& rng, std::size_t max_len, int vocab) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> word(0, vocab - 1);
  std::string s;
  for (std::size_t i = 0, n = len(rng); i < n; ++i) {
    if (i) s += ' ';
    s += "w" + std::to_string(word(rng));
  }
  return s;
}

// Clipped n-gram F1 recomputed from count maps.
double ngram_f1_reference(const std::string& a, const std::string& b, std::size_t n) {
  const auto ta = text::tokenize(a), tb = text::tokenize(b);
  if (ta.empty() && tb.empty()) return 1.0;
  if (ta.empty() || tb.empty()) return 0.0;
  n = std::min({n, ta.size(), tb.size()});
  auto grams = [n](const std::vector<std::string>& t) {
    std::map<std::vector<std::string>, int> m;
    for (std::size_t i = 0; i + n <= t.size(); ++i) ++m[{t.begin() + i, t.begin() + i + n}];
    return m;
  };
  const auto ga = grams(ta), gb = grams(tb);
  int overlap = 0, total_a = 0, total_b = 0;
  for (const auto& [g, c] : ga) {
    total_a += c;
    if (auto it = gb.find(g); it != gb.end()) overlap += std::min(c, it->second);
  }
  for (const auto& [g, c] : gb) total_b += c;
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / total_a;
  const double r = static_cast<double>(overlap) / total_b;
  return 2 * p * r / (p + r);
}

TEST(Exact, Cases) {
  EXPECT_EQ(sim_exact("abc", "abc").value, 1.0);
  EXPECT_EQ(sim_exact("abc", "abd").value, 0.0);
  EXPECT_EQ(sim_exact("a  b", "a b").value, 1.0);
}

TEST(NgramF1, HandCases) {
  EXPECT_NEAR(sim_ngram_f1("the cat sat", "the cat ran", 1).value, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(sim_ngram_f1("a b", "c d", 1).value, 0.0);
  EXPECT_EQ(sim_ngram_f1("", "", 2).value, 1.0);
  EXPECT_EQ(sim_ngram_f1("a", "", 2).value, 0.0);
  // Fewer tokens than n: n falls back to the shorter length.
  EXPECT_EQ(sim_ngram_f1("a", "a b c", 3).value, sim_ngram_f1("a", "a b c", 1).value);
  // Clipping: repeating a matched token does not raise precision.
  const auto s = sim_ngram_f1("the the the the", "the cat", 1);
  EXPECT_DOUBLE_EQ(*s.precision, 0.25);
  EXPECT_DOUBLE_EQ(*s.recall, 0.5);
}

TEST(NgramF1, IdentityAndPermutation) {
  for (std::size_t n = 1; n <= 4; ++n) {
    EXPECT_EQ(sim_ngram_f1("x y z x q", "x y z x q", n).value, 1.0);
  }
  EXPECT_EQ(sim_ngram_f1("a b c d a", "d a c a b", 1).value, 1.0);
}

TEST(NgramF1, MatchesReferenceOnRandomPairs) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 500; ++t) {
    const auto a = random_text(rng, 12, 6), b = random_text(rng, 12, 6);
    for (std::size_t n : {1, 2, 3}) {
      EXPECT_NEAR(sim_ngram_f1(a, b, n).value, ngram_f1_reference(a, b, n), 1e-12);
    }
  }
}

TEST(Lcs, MatchesRecursiveOracle) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 300; ++t) {
    const auto a = text::tokenize(random_text(rng, 10, 5));
    const auto b = text::tokenize(random_text(rng, 10, 5));
    EXPECT_EQ(lcs_length(a, b), oracle::lcs(a, b));
  }
}

TEST(LcsRatio, Cases) {
  EXPECT_EQ(sim_lcs_ratio("a b c", "a b c").value, 1.0);
  EXPECT_EQ(sim_lcs_ratio("a b c", "d e f").value, 0.0);
  // LCS("a b c d", "a c") = 2: precision 1/2, recall 1, F1 2/3.
  EXPECT_NEAR(sim_lcs_ratio("a b c d", "a c").value, 2.0 / 3.0, 1e-15);
}

TEST(Properties, SymmetryIdentityRange) {
  std::mt19937_64 rng(5);
  const Scorer scorers[] = {{Metric::kExact}, {Metric::kNgramF1, 1}, {Metric::kNgramF1, 2},
                            {Metric::kNgramF1, 3}, {Metric::kLcsRatio}};
  for (int t = 0; t < 400; ++t) {
    const auto a = random_text(rng, 15, 8), b = random_text(rng, 15, 8);
    for (const auto& s : scorers) {
      const double ab = s(a, b).value, ba = s(b, a).value;
      EXPECT_DOUBLE_EQ(ab, ba);
      EXPECT_GE(ab, 0.0);
      EXPECT_LE(ab, 1.0);
      if (!a.empty()) EXPECT_EQ(s(a, a).value, 1.0);
    }
  }
}

TEST(ScoreShift, NoShiftAndFullShift) {
  const Scorer s;
  EXPECT_EQ(score_shift({"p", "x y z", "x y z"}, s).value, 1.0);
  EXPECT_EQ(score_shift({"p", "x y z", "u v w"}, s).value, 0.0);
}

TEST(ScoreShift, MatchesStandaloneMetricOnSimulatorOutput) {
  model::SimModelState state;
  state.noise_seed = 99;
  const auto docs = model::synthetic_texts(30, 10, 20, 8, "d");
  const auto pairs = corpus::make_pairs(docs, {}).pairs;
  state = model::seed_memory(state, pairs, 0.3, "c");
  const auto tuned = model::sim_finetune(state, pairs);
  for (const auto& p : pairs) {
    const CompletionRecord rec{p.id, model::sim_complete(state, p.prompt, 24),
                               model::sim_complete(tuned, p.prompt, 24)};
    EXPECT_EQ(score_shift(rec, {Metric::kNgramF1, 2}).value,
              sim_ngram_f1(rec.pre, rec.post, 2).value);
    EXPECT_EQ(score_shift(rec, {Metric::kLcsRatio}).value, sim_lcs_ratio(rec.pre, rec.post).value);
  }
}

TEST(Scorer, EmbeddingWithoutEndpointIsRejected) {
  const Scorer s{Metric::kEmbedding};
  EXPECT_THROW(s("a", "b"), Error);
}

TEST(Metric, NamesRoundTrip) {
  for (auto m : {Metric::kExact, Metric::kNgramF1, Metric::kLcsRatio, Metric::kEmbedding}) {
    EXPECT_EQ(parse_metric(metric_name(m)), m);
  }
  EXPECT_THROW(parse_metric("bleu"), Error);
}

}  // namespace
}  // namespace catshift::similarity

namespace catshift {
namespace {

TEST(Text, TokenizeAndNormalize) {
  EXPECT_EQ(text::tokenize("  a\tb \n c  "), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(text::tokenize(" \t ").empty());
  EXPECT_EQ(text::normalize(" a   b "), "a b");
  EXPECT_EQ(text::trim("  x y \n"), "x y");
}

TEST(Hashing, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(to_hex(0xdeadbeefULL), "00000000deadbeef");
}

TEST(Hashing, UnitIntervalRange) {
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const double u = unit_interval(mix64(i));
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Hashing, BoundedDrawIsUniformEnough) {
  std::mt19937_64 rng(1);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[bounded_draw(rng, 7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  EXPECT_EQ(bounded_draw(rng, 1), 0u);
}

}  // namespace
}  // namespace catshift
