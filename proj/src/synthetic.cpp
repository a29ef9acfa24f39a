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

// Synthetic binary tasks with complementary structure. Features are uniform
// on [-1, 1] and split into four groups:
//
//   block   step functions of single features (easy for trees)
//   linear  a linear trend (easy for logistic regression)
//   smooth  sin(2 pi x) terms (easy for a small MLP)
//   noise   features the label ignores
//
// Each group term is scaled to unit variance, and the label is the sign of
// their sum plus Gaussian noise.

#include <cmath>
#include <numbers>

#include "xstacking/eval.hpp"

namespace xstacking {

namespace {

struct Variant {
  int n_block;
  int n_linear;
  int n_smooth;
  int n_noise;
};

constexpr Variant kVariants[kSyntheticVariants] = {
    {1, 2, 1, 2}, {2, 1, 1, 2}, {1, 1, 1, 3},
    {2, 2, 1, 1}, {1, 3, 1, 1}, {3, 1, 1, 1},
};

constexpr double kLabelNoise = 0.2;

}  // namespace

Dataset MakeSyntheticDataset(int variant, std::size_t m, std::uint64_t seed) {
  if (variant < 0 || variant >= kSyntheticVariants) {
    ThrowUsage("synthetic variant must be in [0, " +
               std::to_string(kSyntheticVariants) + ")");
  }
  if (m < 2) ThrowUsage("synthetic dataset needs at least 2 rows");
  const Variant& v = kVariants[variant];
  const int d = v.n_block + v.n_linear + v.n_smooth + v.n_noise;
  Rng rng(DeriveSeed(seed, {static_cast<std::uint64_t>(variant)}));

  std::vector<double> thresholds(static_cast<std::size_t>(v.n_block));
  for (auto& t : thresholds) t = rng.uniform(-0.4, 0.4);
  std::vector<double> coef(static_cast<std::size_t>(v.n_linear));
  for (auto& c : coef) c = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.6, 1.4);

  // Moments of the raw group terms under uniform inputs.
  double block_mean = 0.0;
  double block_var = 0.0;
  for (double t : thresholds) {
    const double p = (1.0 - t) / 2.0;  // P(x > t)
    block_mean += 2.0 * p - 1.0;
    block_var += 4.0 * p * (1.0 - p);
  }
  double lin_var = 0.0;
  for (double c : coef) lin_var += c * c / 3.0;
  const double smooth_var = v.n_smooth / 2.0;

  Dataset ds;
  ds.features = Matrix(m, static_cast<std::size_t>(d));
  ds.targets.resize(m);
  ds.task = TaskKind::Classification(2);
  ds.class_labels = {"0", "1"};
  ds.target_name = "y";
  auto name = [&](const char* prefix, int n) {
    for (int j = 0; j < n; ++j) ds.feature_names.push_back(prefix + std::to_string(j));
  };
  name("block", v.n_block);
  name("lin", v.n_linear);
  name("smooth", v.n_smooth);
  name("noise", v.n_noise);

  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i < m; ++i) {
    auto x = ds.features.row(i);
    for (auto& xi : x) xi = rng.uniform(-1.0, 1.0);
    std::size_t col = 0;
    double block = 0.0;
    for (int j = 0; j < v.n_block; ++j, ++col) {
      block += x[col] > thresholds[static_cast<std::size_t>(j)] ? 1.0 : -1.0;
    }
    double lin = 0.0;
    for (int j = 0; j < v.n_linear; ++j, ++col) {
      lin += coef[static_cast<std::size_t>(j)] * x[col];
    }
    double smooth = 0.0;
    for (int j = 0; j < v.n_smooth; ++j, ++col) smooth += std::sin(2.0 * pi * x[col]);
    double score = kLabelNoise * rng.normal();
    if (v.n_block) score += (block - block_mean) / std::sqrt(block_var);
    if (v.n_linear) score += lin / std::sqrt(lin_var);
    if (v.n_smooth) score += smooth / std::sqrt(smooth_var);
    ds.targets[i] = score > 0.0 ? 1.0 : 0.0;
  }
  return ds;
}

}  // namespace xstacking
