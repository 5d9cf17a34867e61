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
#include <span>
#include <string_view>
#include <vector>

#include "catshift/similarity.hpp"

// Two-sample tests over similarity score sets.
//
// Exact p-values are permutation p-values: the probability, over all
// C(n+m, n) equally likely relabelings of the pooled sample, of a statistic
// at least as extreme as the observed one. Ties are handled exactly.

namespace catshift::stats {

struct EcdfStep {
  double x;
  double cdf;  // F(x), right-continuous
};

/// One step per distinct value, ascending; the last step has cdf == 1.
std::vector<EcdfStep> ecdf(std::span<const double> sample);

// Evaluates a step function produced by ecdf() at any x.
double ecdf_at(std::span<const EcdfStep> steps, double x);

enum class TestMode { kAuto, kExact, kAsymptotic };

// kFirstSmaller: the first sample is stochastically smaller, i.e. its ECDF
// lies above the second's. For audits the first sample is the suspicious set,
// where membership predicts lower similarity.
enum class Alternative { kTwoSided, kFirstSmaller };

TestMode parse_test_mode(std::string_view name);
std::string_view test_mode_name(TestMode mode);
Alternative parse_alternative(std::string_view name);
std::string_view alternative_name(Alternative alt);

// auto picks the exact route at or below this pooled size.
inline constexpr std::size_t kExactCutoff = 16;

struct KsResult {
  double d_statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;  // second sample (validation) size
  std::size_t m = 0;  // first sample (suspicious) size
  TestMode mode = TestMode::kAsymptotic;  // never kAuto once computed
  Alternative alternative = Alternative::kTwoSided;
};

/// D = sup_x |F_first(x) - F_second(x)| (or sup of F_first - F_second for the
/// one-sided alternative), evaluated at the pooled sample points. Throws
/// Error(kInvalidArgument) on an empty sample.
KsResult ks_two_sample(std::span<const double> first,
                       std::span<const double> second,
                       TestMode mode = TestMode::kAuto,
                       Alternative alternative = Alternative::kTwoSided);

KsResult ks_two_sample(const similarity::ScoreSet& suspicious,
                       const similarity::ScoreSet& validation,
                       TestMode mode = TestMode::kAuto,
                       Alternative alternative = Alternative::kTwoSided);

// Two-sided Kolmogorov limit Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} e^{-2k^2 lambda^2}.
double kolmogorov_q(double lambda);

struct MwuResult {
  double u_statistic = 0.0;  // U of the first sample, in [0, n*m]
  double p_value = 1.0;
  bool tie_corrected = false;
  TestMode mode = TestMode::kAsymptotic;
};

// The exact route is available up to this pooled size.
inline constexpr std::size_t kMwuExactLimit = 64;

/// Two-sided Mann-Whitney U with midranks. The exact route counts the
/// tie-aware rank-sum distribution; the asymptotic route is the normal
/// approximation with tie-corrected variance and continuity correction.
MwuResult mwu_two_sample(std::span<const double> first,
                         std::span<const double> second,
                         TestMode mode = TestMode::kAuto);

MwuResult mwu_two_sample(const similarity::ScoreSet& suspicious,
                         const similarity::ScoreSet& validation,
                         TestMode mode = TestMode::kAuto);

double median(std::span<const double> sample);
double mean(std::span<const double> sample);

}  // namespace catshift::stats
