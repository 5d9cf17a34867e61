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

#include "catshift/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>

#include "catshift/error.hpp"

namespace catshift::stats {
namespace {

void require_non_empty(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "two-sample test requires two non-empty samples");
  }
}

// Pooled sample sorted ascending, tagged with membership in the first sample.
struct Pooled {
  std::vector<double> values;
  std::vector<bool> from_first;
  // block_end[k] is true when the first k pooled values end a tie block.
  std::vector<bool> block_end;
};

Pooled pool(std::span<const double> first, std::span<const double> second) {
  std::vector<std::pair<double, bool>> items;
  items.reserve(first.size() + second.size());
  for (double x : first) items.emplace_back(x, true);
  for (double x : second) items.emplace_back(x, false);
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  Pooled p;
  const std::size_t total = items.size();
  p.values.reserve(total);
  p.from_first.reserve(total);
  for (const auto& [x, f] : items) {
    p.values.push_back(x);
    p.from_first.push_back(f);
  }
  p.block_end.assign(total + 1, false);
  for (std::size_t k = 1; k <= total; ++k) {
    p.block_end[k] = k == total || p.values[k - 1] < p.values[k];
  }
  return p;
}

// Scaled ECDF gap i*n2 - j*n1 is an exact integer; D = gap / (n1*n2).
std::int64_t observed_gap(const Pooled& p, std::int64_t n1, std::int64_t n2,
                          Alternative alt) {
  std::int64_t i = 0, j = 0, best = 0;
  for (std::size_t k = 1; k < p.block_end.size(); ++k) {
    (p.from_first[k - 1] ? i : j) += 1;
    if (!p.block_end[k]) continue;
    const std::int64_t gap = i * n2 - j * n1;
    best = std::max(best, alt == Alternative::kTwoSided ? std::abs(gap) : gap);
  }
  return best;
}

// Probability, under uniform relabeling, that the lattice path crosses the
// observed gap at some tie-block end. Mass that crosses is absorbed, which
// keeps small p-values free of cancellation.
double exact_ks_p(const Pooled& p, std::int64_t n1, std::int64_t n2,
                  std::int64_t gap_obs, Alternative alt) {
  const std::int64_t total = n1 + n2;
  auto crosses = [&](std::int64_t i, std::int64_t j) {
    if (!p.block_end[static_cast<std::size_t>(i + j)]) return false;
    const std::int64_t gap = i * n2 - j * n1;
    return (alt == Alternative::kTwoSided ? std::abs(gap) : gap) >= gap_obs;
  };
  std::vector<long double> mass(static_cast<std::size_t>((n1 + 1) * (n2 + 1)), 0.0L);
  auto at = [&](std::int64_t i, std::int64_t j) -> long double& {
    return mass[static_cast<std::size_t>(i * (n2 + 1) + j)];
  };
  at(0, 0) = 1.0L;
  long double absorbed = 0.0L;
  for (std::int64_t i = 0; i <= n1; ++i) {
    for (std::int64_t j = 0; j <= n2; ++j) {
      const long double here = at(i, j);
      if (here == 0.0L) continue;
      const long double remaining = static_cast<long double>(total - i - j);
      if (remaining == 0.0L) continue;
      if (i < n1) {
        const long double step = here * static_cast<long double>(n1 - i) / remaining;
        if (crosses(i + 1, j)) absorbed += step; else at(i + 1, j) += step;
      }
      if (j < n2) {
        const long double step = here * static_cast<long double>(n2 - j) / remaining;
        if (crosses(i, j + 1)) absorbed += step; else at(i, j + 1) += step;
      }
    }
  }
  return std::clamp(static_cast<double>(absorbed), 0.0, 1.0);
}

std::vector<double> midranks(const Pooled& p, std::vector<std::size_t>* tie_sizes) {
  std::vector<double> ranks(p.values.size());
  std::size_t k = 0;
  while (k < p.values.size()) {
    std::size_t end = k + 1;
    while (end < p.values.size() && p.values[end] == p.values[k]) ++end;
    const double r = 0.5 * static_cast<double>(k + 1 + end);
    for (std::size_t t = k; t < end; ++t) ranks[t] = r;
    if (tie_sizes) tie_sizes->push_back(end - k);
    k = end;
  }
  return ranks;
}

double normal_two_sided(double z) { return std::erfc(z / std::numbers::sqrt2); }

// Exact two-sided p for U via the distribution of twice the first sample's
// rank sum, built group by group over tie blocks.
double exact_mwu_p(const std::vector<std::size_t>& tie_sizes, std::int64_t n1,
                   std::int64_t n2, std::int64_t twice_u_obs) {
  const std::int64_t total = n1 + n2;
  const auto max_sum = static_cast<std::size_t>(2 * total * n1 + 1);
  // ways[c][s]: selections of c first-sample slots with doubled rank sum s.
  std::vector<std::vector<long double>> ways(
      static_cast<std::size_t>(n1 + 1), std::vector<long double>(max_sum, 0.0L));
  ways[0][0] = 1.0L;
  std::int64_t start = 1;
  for (std::size_t t : tie_sizes) {
    const auto size = static_cast<std::int64_t>(t);
    const std::int64_t twice_rank = start + (start + size - 1);
    std::vector<long double> binom(static_cast<std::size_t>(size + 1), 1.0L);
    for (std::int64_t c = 1; c <= size; ++c) {
      binom[static_cast<std::size_t>(c)] =
          binom[static_cast<std::size_t>(c - 1)] * static_cast<long double>(size - c + 1) /
          static_cast<long double>(c);
    }
    auto next = std::vector<std::vector<long double>>(
        static_cast<std::size_t>(n1 + 1), std::vector<long double>(max_sum, 0.0L));
    for (std::int64_t have = 0; have <= n1; ++have) {
      for (std::size_t s = 0; s < max_sum; ++s) {
        const long double w = ways[static_cast<std::size_t>(have)][s];
        if (w == 0.0L) continue;
        for (std::int64_t c = 0; c <= size && have + c <= n1; ++c) {
          const auto s2 = s + static_cast<std::size_t>(c * twice_rank);
          next[static_cast<std::size_t>(have + c)][s2] += w * binom[static_cast<std::size_t>(c)];
        }
      }
    }
    ways = std::move(next);
    start += size;
  }
  const std::int64_t center = n1 * n2;  // 2 * (n1*n2/2)
  const std::int64_t obs_dev = std::abs(twice_u_obs - center);
  long double hit = 0.0L, all = 0.0L;
  for (std::size_t s = 0; s < max_sum; ++s) {
    const long double w = ways[static_cast<std::size_t>(n1)][s];
    if (w == 0.0L) continue;
    all += w;
    const std::int64_t twice_u = static_cast<std::int64_t>(s) - n1 * (n1 + 1);
    if (std::abs(twice_u - center) >= obs_dev) hit += w;
  }
  return std::clamp(static_cast<double>(hit / all), 0.0, 1.0);
}

}  // namespace

std::vector<EcdfStep> ecdf(std::span<const double> sample) {
  if (sample.empty()) throw Error(ErrorCode::kInvalidArgument, "ecdf of an empty sample");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<EcdfStep> steps;
  const auto n = static_cast<double>(sorted.size());
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (k + 1 < sorted.size() && sorted[k + 1] == sorted[k]) continue;
    steps.push_back({sorted[k], static_cast<double>(k + 1) / n});
  }
  return steps;
}

double ecdf_at(std::span<const EcdfStep> steps, double x) {
  auto it = std::upper_bound(steps.begin(), steps.end(), x,
                             [](double v, const EcdfStep& s) { return v < s.x; });
  return it == steps.begin() ? 0.0 : std::prev(it)->cdf;
}

TestMode parse_test_mode(std::string_view name) {
  if (name == "auto") return TestMode::kAuto;
  if (name == "exact") return TestMode::kExact;
  if (name == "asymptotic") return TestMode::kAsymptotic;
  throw Error(ErrorCode::kInvalidArgument, "unknown test mode '" + std::string(name) + "'");
}

std::string_view test_mode_name(TestMode mode) {
  switch (mode) {
    case TestMode::kAuto: return "auto";
    case TestMode::kExact: return "exact";
    case TestMode::kAsymptotic: return "asymptotic";
  }
  return "?";
}

Alternative parse_alternative(std::string_view name) {
  if (name == "two-sided") return Alternative::kTwoSided;
  if (name == "first-smaller") return Alternative::kFirstSmaller;
  throw Error(ErrorCode::kInvalidArgument, "unknown alternative '" + std::string(name) + "'");
}

std::string_view alternative_name(Alternative alt) {
  return alt == Alternative::kTwoSided ? "two-sided" : "first-smaller";
}

double kolmogorov_q(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Jacobi-theta dual of the same function; converges fast for small lambda
    // where the alternating series does not.
    const double pi2_8l2 = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int k = 1; k < 64; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(-odd * odd * pi2_8l2);
      cdf += term;
      if (term < 1e-12) break;
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k < 1000; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1) ? term : -term;
    if (term < 1e-12) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> first,
                       std::span<const double> second, TestMode mode,
                       Alternative alternative) {
  require_non_empty(first, second);
  const auto n1 = static_cast<std::int64_t>(first.size());
  const auto n2 = static_cast<std::int64_t>(second.size());
  const Pooled p = pool(first, second);
  const std::int64_t gap = observed_gap(p, n1, n2, alternative);

  KsResult r;
  r.m = first.size();
  r.n = second.size();
  r.alternative = alternative;
  r.d_statistic = static_cast<double>(gap) / static_cast<double>(n1 * n2);
  if (mode == TestMode::kAuto) {
    mode = first.size() + second.size() <= kExactCutoff ? TestMode::kExact
                                                        : TestMode::kAsymptotic;
  }
  r.mode = mode;
  if (mode == TestMode::kExact) {
    r.p_value = exact_ks_p(p, n1, n2, gap, alternative);
  } else if (gap == 0) {
    r.p_value = 1.0;
  } else {
    const double lambda =
        std::sqrt(static_cast<double>(n1 * n2) / static_cast<double>(n1 + n2)) *
        r.d_statistic;
    r.p_value = alternative == Alternative::kTwoSided
                    ? kolmogorov_q(lambda)
                    : std::clamp(std::exp(-2.0 * lambda * lambda), 0.0, 1.0);
  }
  return r;
}

KsResult ks_two_sample(const similarity::ScoreSet& suspicious,
                       const similarity::ScoreSet& validation, TestMode mode,
                       Alternative alternative) {
  return ks_two_sample(suspicious.scores, validation.scores, mode, alternative);
}

MwuResult mwu_two_sample(std::span<const double> first,
                         std::span<const double> second, TestMode mode) {
  require_non_empty(first, second);
  const auto n1 = static_cast<std::int64_t>(first.size());
  const auto n2 = static_cast<std::int64_t>(second.size());
  const std::int64_t total = n1 + n2;
  const Pooled p = pool(first, second);
  std::vector<std::size_t> tie_sizes;
  const auto ranks = midranks(p, &tie_sizes);

  // Doubled rank sum is an exact integer even with midranks.
  std::int64_t twice_rank_sum = 0;
  for (std::size_t k = 0; k < ranks.size(); ++k) {
    if (p.from_first[k]) twice_rank_sum += static_cast<std::int64_t>(std::llround(2.0 * ranks[k]));
  }
  const std::int64_t twice_u = twice_rank_sum - n1 * (n1 + 1);

  MwuResult r;
  r.u_statistic = 0.5 * static_cast<double>(twice_u);
  r.tie_corrected = tie_sizes.size() < static_cast<std::size_t>(total);
  if (mode == TestMode::kAuto) {
    mode = static_cast<std::size_t>(total) <= kExactCutoff ? TestMode::kExact
                                                           : TestMode::kAsymptotic;
  }
  if (mode == TestMode::kExact && static_cast<std::size_t>(total) > kMwuExactLimit) {
    throw Error(ErrorCode::kInvalidArgument,
                "exact Mann-Whitney U is limited to " +
                    std::to_string(kMwuExactLimit) + " pooled observations");
  }
  r.mode = mode;
  if (mode == TestMode::kExact) {
    r.p_value = exact_mwu_p(tie_sizes, n1, n2, twice_u);
    return r;
  }

  double tie_term = 0.0;
  for (std::size_t t : tie_sizes) {
    const auto tt = static_cast<double>(t);
    tie_term += tt * tt * tt - tt;
  }
  const double nn = static_cast<double>(total);
  const double prod = static_cast<double>(n1 * n2);
  const double variance = prod / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (!(variance > 0.0)) {
    r.p_value = 1.0;
    return r;
  }
  const double dev = std::max(0.0, std::abs(r.u_statistic - 0.5 * prod) - 0.5);
  r.p_value = std::clamp(normal_two_sided(dev / std::sqrt(variance)), 0.0, 1.0);
  return r;
}

MwuResult mwu_two_sample(const similarity::ScoreSet& suspicious,
                         const similarity::ScoreSet& validation, TestMode mode) {
  return mwu_two_sample(suspicious.scores, validation.scores, mode);
}

double median(std::span<const double> sample) {
  if (sample.empty()) throw Error(ErrorCode::kInvalidArgument, "median of an empty sample");
  std::vector<double> v(sample.begin(), sample.end());
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

double mean(std::span<const double> sample) {
  if (sample.empty()) throw Error(ErrorCode::kInvalidArgument, "mean of an empty sample");
  return std::accumulate(sample.begin(), sample.end(), 0.0) /
         static_cast<double>(sample.size());
}

}  // namespace catshift::stats
