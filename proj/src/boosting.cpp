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

#include "xstacking/learners.hpp"

namespace xstacking {

namespace {

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double LogLoss(double raw, double t) {
  // log(1 + exp(raw)) - t * raw
  const double sp =
      raw > 0 ? raw + std::log1p(std::exp(-raw)) : std::log1p(std::exp(raw));
  return sp - t * raw;
}

// Upper bound of the logistic loss curvature. Leaf values use it in place
// of the Hessian, so every round is a majorize-minimize step and the
// training loss cannot increase for learning rates up to 1.
constexpr double kLogisticCurvatureBound = 0.25;

}  // namespace

BoostedTreesModel::BoostedTreesModel(LearnerSpec spec, TaskKind task,
                                     std::size_t d,
                                     std::vector<double> base_scores,
                                     std::vector<std::vector<Tree>> trees,
                                     std::vector<double> loss_history)
    : Model(std::move(spec), task, d, true),
      learning_rate_(this->spec().get("learning_rate")),
      base_scores_(std::move(base_scores)),
      trees_(std::move(trees)),
      loss_history_(std::move(loss_history)) {
  const std::size_t expected =
      task.is_regression() ? 1 : (task.num_classes() == 2 ? 1 : n_outputs());
  if (trees_.size() != expected || base_scores_.size() != expected) {
    ThrowData("boosted trees: booster count does not match task");
  }
}

double BoostedTreesModel::raw_score(std::size_t booster,
                                    std::span<const double> x) const {
  double s = 0.0;
  for (const Tree& t : trees_[booster]) s += *t.leaf_values(x);
  return base_scores_[booster] + learning_rate_ * s;
}

void BoostedTreesModel::predict_into(std::span<const double> x,
                                     std::span<double> out) const {
  if (task().is_regression()) {
    out[0] = raw_score(0, x);
    return;
  }
  if (trees_.size() == 1) {
    const double p = Sigmoid(raw_score(0, x));
    out[0] = 1.0 - p;
    out[1] = p;
    return;
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < trees_.size(); ++c) {
    out[c] = Sigmoid(raw_score(c, x));
    sum += out[c];
  }
  for (double& v : out) v /= sum;
}

nlohmann::json BoostedTreesModel::params_json() const {
  nlohmann::json boosters = nlohmann::json::array();
  for (const auto& ts : trees_) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : ts) arr.push_back(t.to_json());
    boosters.push_back(arr);
  }
  return {{"base_scores", DoublesToJson(base_scores_)},
          {"boosters", boosters},
          {"loss_history", DoublesToJson(loss_history_)}};
}

ModelPtr FitGradientBoostedTrees(const LearnerSpec& spec, const Dataset& ds) {
  const std::size_t m = ds.m();
  const int rounds = spec.get_int("n_rounds");
  const double lr = spec.get("learning_rate");
  const TreeParams params{spec.get_int("max_depth"),
                          spec.get_int("min_samples_leaf")};
  TreeBuilder builder(ds.features);

  const bool regression = ds.task.is_regression();
  const std::size_t n_boosters =
      regression || ds.task.num_classes() == 2
          ? 1
          : static_cast<std::size_t>(ds.task.num_classes());

  // Per booster targets: the regression value or a 0/1 indicator.
  std::vector<std::vector<double>> targets(n_boosters, std::vector<double>(m));
  for (std::size_t k = 0; k < n_boosters; ++k) {
    const int positive = n_boosters == 1 ? 1 : static_cast<int>(k);
    for (std::size_t i = 0; i < m; ++i) {
      targets[k][i] = regression ? ds.targets[i]
                                 : (ds.label(i) == positive ? 1.0 : 0.0);
    }
  }

  std::vector<double> base(n_boosters);
  std::vector<std::vector<double>> raw(n_boosters);
  for (std::size_t k = 0; k < n_boosters; ++k) {
    const double mean = std::accumulate(targets[k].begin(), targets[k].end(), 0.0) /
                        static_cast<double>(m);
    if (regression) {
      base[k] = mean;
    } else {
      const double p = std::clamp(mean, 1e-6, 1.0 - 1e-6);
      base[k] = std::log(p / (1.0 - p));
    }
    raw[k].assign(m, base[k]);
  }

  auto training_loss = [&]() {
    double total = 0.0;
    for (std::size_t k = 0; k < n_boosters; ++k) {
      for (std::size_t i = 0; i < m; ++i) {
        if (regression) {
          const double r = targets[k][i] - raw[k][i];
          total += r * r;
        } else {
          total += LogLoss(raw[k][i], targets[k][i]);
        }
      }
    }
    return total / static_cast<double>(m);
  };

  std::vector<std::vector<Tree>> trees(n_boosters);
  std::vector<double> history{training_loss()};
  std::vector<double> residual(m);
  for (int round = 0; round < rounds; ++round) {
    for (std::size_t k = 0; k < n_boosters; ++k) {
      for (std::size_t i = 0; i < m; ++i) {
        residual[i] = regression ? targets[k][i] - raw[k][i]
                                 : targets[k][i] - Sigmoid(raw[k][i]);
      }
      Tree tree = builder.fit_regression(residual, params);
      if (!regression) {
        for (double& v : tree.values) v /= kLogisticCurvatureBound;
      }
      for (std::size_t i = 0; i < m; ++i) {
        raw[k][i] += lr * *tree.leaf_values(ds.features.row(i));
      }
      trees[k].push_back(std::move(tree));
    }
    history.push_back(training_loss());
  }
  return std::make_shared<BoostedTreesModel>(spec, ds.task, ds.d(),
                                             std::move(base), std::move(trees),
                                             std::move(history));
}

}  // namespace xstacking
