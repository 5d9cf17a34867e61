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

// Brute-force reference implementations used only by tests. They share no
// code with the library and favour obviousness over speed.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

namespace oracle {

// sup_x (F1 - F2) or sup_x |F1 - F2| scaled by n1*n2, by direct counting at
// every pooled point.
inline std::int64_t ks_gap(const std::vector<double>& a, const std::vector<double>& b,
                           bool one_sided) {
  std::vector<double> points = a;
  points.insert(points.end(), b.begin(), b.end());
  const auto n1 = static_cast<std::int64_t>(a.size());
  const auto n2 = static_cast<std::int64_t>(b.size());
  std::int64_t best = 0;
  for (double x : points) {
    std::int64_t c1 = 0, c2 = 0;
    for (double v : a) c1 += v <= x;
    for (double v : b) c2 += v <= x;
    const std::int64_t diff = c1 * n2 - c2 * n1;
    best = std::max(best, one_sided ? diff : std::abs(diff));
  }
  return best;
}

// Doubled U of the first sample by pair counting (ties count one half).
inline std::int64_t twice_u(const std::vector<double>& a, const std::vector<double>& b) {
  std::int64_t u2 = 0;
  for (double x : a) {
    for (double y : b) u2 += x > y ? 2 : (x == y ? 1 : 0);
  }
  return u2;
}

// Calls fn(first, second) for every way of choosing |a| of the pooled
// observations as the first sample.
template <typename Fn>
void for_each_relabeling(const std::vector<double>& a, const std::vector<double>& b, Fn&& fn) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t total = pooled.size();
  std::vector<bool> pick(total, false);
  std::fill(pick.begin(), pick.begin() + static_cast<long>(a.size()), true);
  std::sort(pick.begin(), pick.end());  // lexicographically first arrangement
  do {
    std::vector<double> first, second;
    for (std::size_t i = 0; i < total; ++i) (pick[i] ? first : second).push_back(pooled[i]);
    fn(first, second);
  } while (std::next_permutation(pick.begin(), pick.end()));
}

inline double ks_permutation_p(const std::vector<double>& a, const std::vector<double>& b,
                               bool one_sided = false) {
  const auto observed = ks_gap(a, b, one_sided);
  std::uint64_t hit = 0, all = 0;
  for_each_relabeling(a, b, [&](const auto& f, const auto& s) {
    ++all;
    hit += ks_gap(f, s, one_sided) >= observed;
  });
  return static_cast<double>(hit) / static_cast<double>(all);
}

inline double mwu_permutation_p(const std::vector<double>& a, const std::vector<double>& b) {
  const auto center = static_cast<std::int64_t>(a.size() * b.size());
  const auto observed = std::abs(twice_u(a, b) - center);
  std::uint64_t hit = 0, all = 0;
  for_each_relabeling(a, b, [&](const auto& f, const auto& s) {
    ++all;
    hit += std::abs(twice_u(f, s) - center) >= observed;
  });
  return static_cast<double>(hit) / static_cast<double>(all);
}

// Monte-Carlo permutation p for the two-sided KS statistic.
inline double ks_monte_carlo_p(const std::vector<double>& a, const std::vector<double>& b,
                               int rounds, std::uint64_t seed) {
  const auto observed = ks_gap(a, b, false);
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::mt19937_64 rng(seed);
  int hit = 0;
  for (int r = 0; r < rounds; ++r) {
    std::shuffle(pooled.begin(), pooled.end(), rng);
    const std::vector<double> f(pooled.begin(), pooled.begin() + static_cast<long>(a.size()));
    const std::vector<double> s(pooled.begin() + static_cast<long>(a.size()), pooled.end());
    hit += ks_gap(f, s, false) >= observed;
  }
  return static_cast<double>(hit) / rounds;
}

// P(non-member p > member p) + 1/2 P(tie), by enumerating every pair.
inline double auc_pairs(const std::vector<double>& member_p, const std::vector<double>& non_member_p) {
  double wins = 0.0;
  for (double m : member_p) {
    for (double n : non_member_p) wins += n > m ? 1.0 : (n == m ? 0.5 : 0.0);
  }
  return wins / static_cast<double>(member_p.size() * non_member_p.size());
}

// Longest common subsequence by plain recursion with memo over indices.
inline std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
  auto rec = [&](auto&& self, std::size_t i, std::size_t j) -> long {
    if (i == a.size() || j == b.size()) return 0;
    if (memo[i][j] >= 0) return memo[i][j];
    long best = std::max(self(self, i + 1, j), self(self, i, j + 1));
    if (a[i] == b[j]) best = std::max(best, 1 + self(self, i + 1, j + 1));
    return memo[i][j] = best;
  };
  return static_cast<std::size_t>(rec(rec, 0, 0));
}

}  // namespace oracle
