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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "xstacking/shapley.hpp"
#include "xstacking/learners.hpp"

namespace xstacking {
namespace {

// Oracle: marginal contributions averaged over all d! feature orderings, with
// its own value function (mean over background rows of f at the composite).
std::vector<double> PermutationShapley(const ScoreFn& f, std::span<const double> x,
                                       const Matrix& bg) {
  const std::size_t d = x.size();
  auto value = [&](const std::vector<bool>& in) {
    double s = 0.0;
    std::vector<double> z(d);
    for (std::size_t r = 0; r < bg.rows(); ++r) {
      for (std::size_t j = 0; j < d; ++j) z[j] = in[j] ? x[j] : bg(r, j);
      s += f(z);
    }
    return s / static_cast<double>(bg.rows());
  };
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> phi(d, 0.0);
  double count = 0.0;
  do {
    std::vector<bool> in(d, false);
    double prev = value(in);
    for (std::size_t j : order) {
      in[j] = true;
      const double cur = value(in);
      phi[j] += cur - prev;
      prev = cur;
    }
    count += 1.0;
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& p : phi) p /= count;
  return phi;
}

Matrix RandomMatrix(std::size_t m, std::size_t d, Rng& rng) {
  Matrix x(m, d);
  for (auto& v : x.data()) v = rng.normal();
  return x;
}

// A fitted tree or MLP on random data, plus an instance and a background.
struct RandomCase {
  ModelPtr model;
  std::vector<double> x;
  BackgroundSet background;
  ScoreFn f;
};

RandomCase MakeCase(std::size_t d, std::uint64_t seed, bool mlp) {
  Rng rng(seed);
  Dataset ds;
  ds.features = RandomMatrix(60, d, rng);
  ds.targets.resize(60);
  for (std::size_t i = 0; i < 60; ++i) {
    ds.targets[i] = std::sin(ds.features(i, 0)) * ds.features(i, d - 1) + rng.normal() * 0.1;
  }
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  RandomCase c;
  c.model = Fit(mlp ? LearnerSpec(Family::kMlp, {{"hidden_units", 6}, {"epochs", 20}}, seed)
                    : LearnerSpec(Family::kDecisionTree, {{"max_depth", 5}}),
                ds);
  c.background = BackgroundSet::FromRows(RandomMatrix(5, d, rng));
  c.x = std::vector<double>(d);
  for (auto& v : c.x) v = rng.normal();
  c.f = ExplanationTarget(*c.model, c.x);
  return c;
}

ScoreFn WorkedLinear() {
  return [](std::span<const double> v) { return 2.0 * v[0] - v[1] + 1.0; };
}

BackgroundSet Origin() {
  Matrix b(1, 2);
  return BackgroundSet::FromRows(b);
}

TEST(ValueFunction, WorkedLinearExample) {
  const std::vector<double> x = {1.0, 3.0};
  const auto f = WorkedLinear();
  EXPECT_DOUBLE_EQ(ValueFunction(f, x, {0, 0}, Origin()), 1.0);
  EXPECT_DOUBLE_EQ(ValueFunction(f, x, {1, 0}, Origin()), 3.0);
  EXPECT_DOUBLE_EQ(ValueFunction(f, x, {0, 1}, Origin()), -2.0);
  EXPECT_DOUBLE_EQ(ValueFunction(f, x, {1, 1}, Origin()), 0.0);
}

TEST(ValueFunction, FullCoalitionAndSelfBackground) {
  Rng rng(2);
  const auto c = MakeCase(4, 5, false);
  const Coalition all(4, 1), none(4, 0);
  EXPECT_DOUBLE_EQ(ValueFunction(c.f, c.x, all, c.background), c.f(c.x));
  Matrix self(1, 4);
  std::copy(c.x.begin(), c.x.end(), self.row(0).begin());
  EXPECT_DOUBLE_EQ(ValueFunction(c.f, c.x, none, BackgroundSet::FromRows(self)), c.f(c.x));
}

TEST(ExactShapley, WorkedLinearExample) {
  const std::vector<double> x = {1.0, 3.0};
  const auto a = ExactShapley(WorkedLinear(), x, Origin());
  EXPECT_NEAR(a.phi[0], 2.0, 1e-12);
  EXPECT_NEAR(a.phi[1], -3.0, 1e-12);
  EXPECT_NEAR(a.base_value, 1.0, 1e-12);
  EXPECT_NEAR(a.fx, 0.0, 1e-12);
}

TEST(ExactShapley, MatchesPermutationOracle) {
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    const std::size_t d = 2 + seed % 5;
    const auto c = MakeCase(d, seed, seed % 2 == 1);
    const auto a = ExactShapley(c.f, c.x, c.background);
    const auto oracle = PermutationShapley(c.f, c.x, c.background.rows);
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(a.phi[j], oracle[j], 1e-10);
  }
}

TEST(ExactShapley, ConstantModelIsNullPlayer) {
  Rng rng(1);
  const ScoreFn f = [](std::span<const double>) { return 4.25; };
  const std::vector<double> x = {1, 2, 3};
  const auto a = ExactShapley(f, x, BackgroundSet::FromRows(RandomMatrix(7, 3, rng)));
  for (double p : a.phi) EXPECT_EQ(p, 0.0);
  EXPECT_DOUBLE_EQ(a.base_value, 4.25);
}

TEST(ExactShapley, Symmetry) {
  const ScoreFn f = [](std::span<const double> v) {
    return std::tanh(v[0] + v[1]) + v[0] * v[1] + 0.3 * v[2];
  };
  Matrix bg(4, 3);
  const double rows[4][3] = {{0.1, 0.7, 1}, {0.7, 0.1, -1}, {-2, 0.5, 0}, {0.5, -2, 3}};
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) bg(i, j) = rows[i][j];
  }
  const std::vector<double> x = {0.9, 0.9, -0.4};
  const auto a = ExactShapley(f, x, BackgroundSet::FromRows(bg));
  EXPECT_NEAR(a.phi[0], a.phi[1], 1e-9);
}

TEST(ExactShapley, DummyFeatures) {
  Rng rng(12);
  // Linear model with a zero weight.
  const ScoreFn lin = [](std::span<const double> v) { return 1.5 * v[0] + 0.0 * v[1] - v[2]; };
  const std::vector<double> x = {0.2, -1.0, 0.5};
  const auto bg = BackgroundSet::FromRows(RandomMatrix(6, 3, rng));
  EXPECT_NEAR(ExactShapley(lin, x, bg).phi[1], 0.0, 1e-9);
  // Tree features that no split uses.
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto c = MakeCase(6, 100 + seed, false);
    const auto& tree = dynamic_cast<const DecisionTreeModel&>(*c.model).tree();
    const auto used = tree.used_features(6);
    const auto a = ExactShapley(c.f, c.x, c.background);
    for (std::size_t j = 0; j < 6; ++j) {
      if (!used[j]) {
        EXPECT_NEAR(a.phi[j], 0.0, 1e-9);
      }
    }
  }
}

TEST(ExactShapley, Linearity) {
  Rng rng(21);
  const auto bg = BackgroundSet::FromRows(RandomMatrix(8, 4, rng));
  const ScoreFn f = [](std::span<const double> v) { return v[0] - 2 * v[1] + 0.5 * v[3] + 1; };
  const ScoreFn g = [](std::span<const double> v) { return 3 * v[1] + v[2] - v[3]; };
  const double alpha = 0.7, beta = -1.9;
  const ScoreFn h = [&](std::span<const double> v) { return alpha * f(v) + beta * g(v); };
  const std::vector<double> x = {0.3, -0.2, 1.1, 2.0};
  const auto pf = ExactShapley(f, x, bg).phi;
  const auto pg = ExactShapley(g, x, bg).phi;
  const auto ph = ExactShapley(h, x, bg).phi;
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(ph[j], alpha * pf[j] + beta * pg[j], 1e-8);
}

// Property: phi_j = w_j (x_j - mean(B_j)) and efficiency for random linear
// models.
TEST(ExactShapley, LinearClosedFormProperty) {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 1 + rng.below(8);
    std::vector<double> w(d);
    for (auto& v : w) v = rng.normal() * 3;
    const double c = rng.normal();
    const ScoreFn f = [&](std::span<const double> v) {
      double s = c;
      for (std::size_t j = 0; j < d; ++j) s += w[j] * v[j];
      return s;
    };
    const Matrix bg = RandomMatrix(1 + rng.below(10), d, rng);
    std::vector<double> x(d);
    for (auto& v : x) v = rng.normal() * 2;
    const auto a = ExactShapley(f, x, BackgroundSet::FromRows(bg));
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t r = 0; r < bg.rows(); ++r) mean += bg(r, j) / static_cast<double>(bg.rows());
      EXPECT_NEAR(a.phi[j], w[j] * (x[j] - mean), 1e-8);
    }
    EXPECT_LE(a.efficiency_gap(), 1e-6);
  }
}

TEST(KernelShap, KernelWeight) {
  EXPECT_NEAR(ShapleyKernelWeight(3, 1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(ShapleyKernelWeight(3, 2), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(ShapleyKernelWeight(4, 2), 3.0 / (6.0 * 2.0 * 2.0), 1e-15);
}

TEST(KernelShap, SingleFeatureEfficiency) {
  const ScoreFn f = [](std::span<const double> v) { return v[0] * v[0]; };
  Matrix bg(3, 1);
  bg(0, 0) = 1;
  bg(1, 0) = 2;
  bg(2, 0) = -1;
  const std::vector<double> x = {3.0};
  const auto a = KernelShap(f, x, BackgroundSet::FromRows(bg), {});
  EXPECT_DOUBLE_EQ(a.phi[0], a.fx - a.base_value);
}

TEST(KernelShap, EnumerationOnWorkedExample) {
  const std::vector<double> x = {1.0, 3.0};
  const auto a = KernelShap(WorkedLinear(), x, Origin(), {});
  EXPECT_NEAR(a.phi[0], 2.0, 1e-6);
  EXPECT_NEAR(a.phi[1], -3.0, 1e-6);
}

TEST(KernelShap, EnumerationMatchesExact) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const std::size_t d = 2 + seed % 7;
    const auto c = MakeCase(d, 500 + seed, seed % 2 == 0);
    const auto exact = ExactShapley(c.f, c.x, c.background);
    KernelOptions opt;
    opt.n_samples = std::size_t{1} << d;
    const auto k = KernelShap(c.f, c.x, c.background, opt);
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(k.phi[j], exact.phi[j], 1e-6);
  }
}

TEST(KernelShap, SamplingIsCloseAndEfficient) {
  int good = 0;
  const int trials = 40;
  for (int t = 0; t < trials; ++t) {
    const std::size_t d = 3 + static_cast<std::size_t>(t % 6);
    const auto c = MakeCase(d, 900 + static_cast<std::uint64_t>(t), t % 2 == 0);
    const auto exact = ExactShapley(c.f, c.x, c.background);
    KernelOptions opt;
    opt.n_samples = 200 * d;
    opt.seed = static_cast<std::uint64_t>(t);
    opt.enumerate_when_possible = false;
    const auto k = KernelShap(c.f, c.x, c.background, opt);
    EXPECT_LE(k.efficiency_gap(), 1e-6);
    double dev = 0.0;
    for (std::size_t j = 0; j < d; ++j) dev = std::max(dev, std::abs(k.phi[j] - exact.phi[j]));
    good += dev <= 5e-2;
  }
  EXPECT_GE(good, trials * 95 / 100);
}

TEST(KernelShap, SameSeedSameResult) {
  const auto c = MakeCase(7, 3, true);
  KernelOptions opt;
  opt.n_samples = 300;
  opt.seed = 5;
  opt.enumerate_when_possible = false;
  EXPECT_EQ(KernelShap(c.f, c.x, c.background, opt).phi,
            KernelShap(c.f, c.x, c.background, opt).phi);
}

TEST(ExplainDataset, BatchingAndEfficiency) {
  Rng rng(44);
  const auto c = MakeCase(5, 8, true);
  const Matrix x = RandomMatrix(12, 5, rng);
  ShapConfig cfg;
  std::vector<Attribution> details;
  const Matrix phi = ExplainDataset(*c.model, x, c.background, cfg, 9, &details);
  ASSERT_EQ(phi.rows(), 12u);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_LE(details[i].efficiency_gap(), 1e-6);
    const auto single = ExplainInstance(*c.model, x.row(i), c.background, cfg, DeriveSeed(9, {i}));
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(phi(i, j), single.phi[j]);
  }
  Matrix one(1, 5);
  std::copy(x.row(0).begin(), x.row(0).end(), one.row(0).begin());
  const Matrix p1 = ExplainDataset(*c.model, one, c.background, cfg, 9);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(p1(0, j), phi(0, j));
}

TEST(ExplainDataset, ConstantModelGivesZeros) {
  Rng rng(6);
  Dataset ds;
  ds.features = RandomMatrix(10, 3, rng);
  ds.targets.assign(10, 2.5);
  ds.feature_names = {"a", "b", "c"};
  const auto model = Fit(LearnerSpec(Family::kDecisionTree), ds);
  ShapConfig cfg;
  cfg.estimator = EstimatorKind::kKernel;
  const Matrix phi = ExplainDataset(*model, ds.features, BackgroundSet::FromRows(ds.features), cfg, 1);
  for (double v : phi.data()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(ExplainDataset, IndependentOfThreadCount) {
  Rng rng(45);
  const auto c = MakeCase(6, 19, false);
  const Matrix x = RandomMatrix(30, 6, rng);
  ShapConfig cfg;
  cfg.estimator = EstimatorKind::kKernel;
  cfg.n_samples = 100;
  SetNumThreads(1);
  const Matrix a = ExplainDataset(*c.model, x, c.background, cfg, 3);
  SetNumThreads(4);
  const Matrix b = ExplainDataset(*c.model, x, c.background, cfg, 3);
  SetNumThreads(0);
  EXPECT_EQ(a, b);
}

TEST(ShapConfig, AutoThreshold) {
  ShapConfig cfg;
  EXPECT_EQ(cfg.resolve(12), EstimatorKind::kExact);
  EXPECT_EQ(cfg.resolve(13), EstimatorKind::kKernel);
  EXPECT_EQ(cfg.samples_for(10), 2048u + 20u);
}

TEST(BackgroundSet, SampleWithoutReplacement) {
  Matrix src(50, 1);
  for (std::size_t i = 0; i < 50; ++i) src(i, 0) = static_cast<double>(i);
  const auto b = BackgroundSet::Sample(src, 20, 4);
  std::set<double> seen;
  for (std::size_t i = 0; i < b.size(); ++i) seen.insert(b.rows(i, 0));
  EXPECT_EQ(seen.size(), 20u);
  EXPECT_EQ(BackgroundSet::Sample(src, 100, 4).size(), 50u);
}

}  // namespace
}  // namespace xstacking
