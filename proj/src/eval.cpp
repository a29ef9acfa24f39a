/*
 * Copyright 2026 The XStacking Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xstacking/eval.hpp"

namespace xstacking {

double Accuracy(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) {
    ThrowUsage("accuracy: length mismatch (" + std::to_string(pred.size()) +
               " vs " + std::to_string(truth.size()) + ")");
  }
  if (pred.empty()) ThrowUsage("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double Mse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    ThrowUsage("mse: length mismatch (" + std::to_string(pred.size()) + " vs " +
               std::to_string(truth.size()) + ")");
  }
  if (pred.empty()) ThrowUsage("mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    s += e * e;
  }
  return s / static_cast<double>(pred.size());
}

namespace {

// Ranks with ties averaged are multiples of one half; doubling makes them
// integers for the subset-sum count.
std::vector<long long> DoubledRanks(std::span<const double> ranks) {
  std::vector<long long> out(ranks.size());
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    out[i] = std::llround(2.0 * ranks[i]);
  }
  return out;
}

}  // namespace

double WilcoxonExactP(std::span<const double> ranks, double statistic) {
  const auto r2 = DoubledRanks(ranks);
  const long long total = std::accumulate(r2.begin(), r2.end(), 0LL);
  // count[s] = number of sign patterns with doubled W+ equal to s.
  std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
  count[0] = 1.0;
  long long reach = 0;
  for (long long r : r2) {
    for (long long s = reach; s >= 0; --s) {
      if (count[static_cast<std::size_t>(s)] != 0.0) {
        count[static_cast<std::size_t>(s + r)] += count[static_cast<std::size_t>(s)];
      }
    }
    reach += r;
  }
  const long long w2 = std::llround(2.0 * statistic);
  double hits = 0.0;
  for (long long s = 0; s <= total; ++s) {
    if (s <= w2 || total - s <= w2) hits += count[static_cast<std::size_t>(s)];
  }
  const double p = hits / std::ldexp(1.0, static_cast<int>(ranks.size()));
  return std::min(1.0, p);
}

double WilcoxonNormalP(std::span<const double> ranks, double statistic) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double r : ranks) {
    sum += r;
    sum_sq += r * r;
  }
  // Under the null each rank enters W+ with probability 1/2, so the mean is
  // sum/2 and the variance sum(r^2)/4, which equals the tie-corrected
  // n(n+1)(2n+1)/24 - sum(t^3 - t)/48.
  const double mean = sum / 2.0;
  const double sd = std::sqrt(sum_sq / 4.0);
  if (sd == 0.0) return 1.0;
  const double z = std::max(0.0, std::abs(statistic - mean) - 0.5) / sd;
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

WilcoxonResult WilcoxonSignedRank(std::span<const double> differences) {
  std::vector<double> nz;
  for (double d : differences) {
    if (!std::isfinite(d)) ThrowData("wilcoxon: non-finite difference");
    if (d != 0.0) nz.push_back(d);
  }
  if (nz.empty()) {
    throw NoDifferencesError("wilcoxon: all paired differences are zero");
  }
  const std::size_t n = nz.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(nz[a]) < std::abs(nz[b]);
  });

  WilcoxonResult res;
  res.n_effective = n;
  res.ranks.assign(n, 0.0);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(nz[order[j + 1]]) == std::abs(nz[order[i]])) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) res.ranks[order[t]] = avg;
    i = j + 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    (nz[i] > 0 ? res.w_plus : res.w_minus) += res.ranks[i];
  }
  res.statistic = std::min(res.w_plus, res.w_minus);
  res.exact = n <= kWilcoxonExactMaxN;
  res.p_two_sided = res.exact ? WilcoxonExactP(res.ranks, res.statistic)
                              : WilcoxonNormalP(res.ranks, res.statistic);
  return res;
}

WilcoxonResult WilcoxonSignedRank(std::span<const double> a,
                                  std::span<const double> b) {
  if (a.size() != b.size()) {
    ThrowUsage("wilcoxon: length mismatch (" + std::to_string(a.size()) + " vs " +
               std::to_string(b.size()) + ")");
  }
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return WilcoxonSignedRank(d);
}

}  // namespace xstacking
