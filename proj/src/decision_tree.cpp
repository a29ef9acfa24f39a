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

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(
      nodes.begin(), nodes.end(), [](const Node& n) { return n.feature < 0; }));
}

std::vector<bool> Tree::used_features(std::size_t d) const {
  std::vector<bool> used(d, false);
  for (const auto& n : nodes) {
    if (n.feature >= 0) used[static_cast<std::size_t>(n.feature)] = true;
  }
  return used;
}

nlohmann::json Tree::to_json() const {
  nlohmann::json feature = nlohmann::json::array();
  nlohmann::json left = nlohmann::json::array();
  nlohmann::json right = nlohmann::json::array();
  nlohmann::json offset = nlohmann::json::array();
  std::vector<double> thresholds;
  for (const auto& n : nodes) {
    feature.push_back(n.feature);
    left.push_back(n.left);
    right.push_back(n.right);
    offset.push_back(n.value_offset);
    thresholds.push_back(n.threshold);
  }
  return {{"feature", feature},   {"threshold", DoublesToJson(thresholds)},
          {"left", left},         {"right", right},
          {"value_offset", offset}, {"values", DoublesToJson(values)},
          {"value_width", value_width}};
}

Tree Tree::FromJson(const nlohmann::json& j) {
  Tree t;
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto thresholds = DoublesFromJson(j.at("threshold"));
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto offset = j.at("value_offset").get<std::vector<std::size_t>>();
  t.values = DoublesFromJson(j.at("values"));
  t.value_width = j.at("value_width").get<std::size_t>();
  const std::size_t n = feature.size();
  if (thresholds.size() != n || left.size() != n || right.size() != n ||
      offset.size() != n || n == 0) {
    ThrowData("malformed tree document");
  }
  for (std::size_t i = 0; i < n; ++i) {
    Node node{feature[i], thresholds[i], left[i], right[i], offset[i]};
    const bool leaf = node.feature < 0;
    const auto in_range = [n](int c) {
      return c > 0 && static_cast<std::size_t>(c) < n;
    };
    if (leaf ? node.value_offset + t.value_width > t.values.size()
             : !(in_range(node.left) && in_range(node.right))) {
      ThrowData("malformed tree node " + std::to_string(i));
    }
    t.nodes.push_back(node);
  }
  return t;
}

// ---------------------------------------------------------------------------

TreeBuilder::TreeBuilder(const Matrix& features)
    : features_(features), sorted_(features.cols()) {
  const std::size_t m = features.rows();
  for (std::size_t f = 0; f < features.cols(); ++f) {
    auto& order = sorted_[f];
    order.resize(m);
    std::iota(order.begin(), order.end(), std::uint32_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) {
                       return features(a, f) < features(b, f);
                     });
  }
}

struct TreeBuilder::Impl {
  const Matrix& x;
  TreeParams params;
  bool classification;
  std::span<const int> labels;
  int num_classes;
  std::span<const double> targets;
  Tree tree;
  std::vector<char> goes_left;

  using Lists = std::vector<std::vector<std::uint32_t>>;

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  void add_leaf_values(std::span<const std::uint32_t> rows, Tree::Node& node) {
    node.value_offset = tree.values.size();
    if (classification) {
      std::vector<double> counts(static_cast<std::size_t>(num_classes), 0.0);
      for (auto r : rows) counts[static_cast<std::size_t>(labels[r])] += 1.0;
      for (double c : counts) {
        tree.values.push_back(c / static_cast<double>(rows.size()));
      }
    } else {
      double sum = 0.0;
      for (auto r : rows) sum += targets[r];
      tree.values.push_back(sum / static_cast<double>(rows.size()));
    }
  }

  bool is_pure(std::span<const std::uint32_t> rows) const {
    if (classification) {
      const int first = labels[rows[0]];
      return std::all_of(rows.begin(), rows.end(),
                         [&](std::uint32_t r) { return labels[r] == first; });
    }
    const double first = targets[rows[0]];
    return std::all_of(rows.begin(), rows.end(),
                       [&](std::uint32_t r) { return targets[r] == first; });
  }

  Split find_split(const Lists& lists) const {
    const std::size_t n = lists[0].size();
    const auto min_leaf = static_cast<std::size_t>(params.min_samples_leaf);
    Split best;

    double parent_score = 0.0;
    double scale = 1.0;
    std::vector<double> total_counts;
    double total_sum = 0.0;
    if (classification) {
      total_counts.assign(static_cast<std::size_t>(num_classes), 0.0);
      for (auto r : lists[0]) total_counts[static_cast<std::size_t>(labels[r])] += 1;
      double sq = 0.0;
      for (double c : total_counts) sq += c * c;
      parent_score = sq / static_cast<double>(n);
    } else {
      double ss = 0.0;
      for (auto r : lists[0]) {
        total_sum += targets[r];
        ss += targets[r] * targets[r];
      }
      parent_score = total_sum * total_sum / static_cast<double>(n);
      scale = std::max(1.0, ss);
    }
    // Minimum gain to accept a split; also the tolerance under which two
    // gains count as equal (the earlier candidate wins).
    const double eps = 1e-12 * scale;
    best.gain = eps;

    std::vector<double> left_counts(total_counts.size());
    for (std::size_t f = 0; f < lists.size(); ++f) {
      const auto& order = lists[f];
      std::fill(left_counts.begin(), left_counts.end(), 0.0);
      double left_sq = 0.0;
      double right_sq = parent_score * static_cast<double>(n);
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::uint32_t r = order[i];
        if (classification) {
          const auto k = static_cast<std::size_t>(labels[r]);
          const double cl = left_counts[k];
          const double cr = total_counts[k] - cl;
          left_sq += 2.0 * cl + 1.0;
          right_sq -= 2.0 * cr - 1.0;
          left_counts[k] = cl + 1.0;
        } else {
          left_sum += targets[r];
        }
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double a = x(r, f);
        const double b = x(order[i + 1], f);
        if (!(a < b)) continue;
        double score;
        if (classification) {
          score = left_sq / static_cast<double>(nl) +
                  right_sq / static_cast<double>(nr);
        } else {
          const double right_sum = total_sum - left_sum;
          score = left_sum * left_sum / static_cast<double>(nl) +
                  right_sum * right_sum / static_cast<double>(nr);
        }
        const double gain = score - parent_score;
        if (gain > best.gain + eps) {
          double t = a + (b - a) * 0.5;
          if (!(t >= a && t < b)) t = a;
          best = Split{static_cast<int>(f), t, gain};
        }
      }
    }
    return best;
  }

  int build(const Lists& lists, int depth) {
    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    const auto& rows = lists[0];
    const std::size_t n = rows.size();

    const bool stop =
        depth >= params.max_depth ||
        n < 2 * static_cast<std::size_t>(params.min_samples_leaf) ||
        is_pure(rows);
    Split split;
    if (!stop) split = find_split(lists);
    if (split.feature < 0) {
      add_leaf_values(rows, tree.nodes[static_cast<std::size_t>(index)]);
      return index;
    }

    const auto f = static_cast<std::size_t>(split.feature);
    for (auto r : rows) goes_left[r] = x(r, f) <= split.threshold ? 1 : 0;
    Lists left(lists.size());
    Lists right(lists.size());
    for (std::size_t g = 0; g < lists.size(); ++g) {
      for (auto r : lists[g]) (goes_left[r] ? left[g] : right[g]).push_back(r);
    }
    const int l = build(left, depth + 1);
    const int rr = build(right, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(index)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = rr;
    return index;
  }
};

Tree TreeBuilder::fit_classification(std::span<const int> labels,
                                     int num_classes,
                                     const TreeParams& params) const {
  Impl impl{features_, params, true, labels, num_classes, {}, {}, {}};
  impl.tree.value_width = static_cast<std::size_t>(num_classes);
  impl.goes_left.assign(features_.rows(), 0);
  impl.build(sorted_, 0);
  return std::move(impl.tree);
}

Tree TreeBuilder::fit_regression(std::span<const double> targets,
                                 const TreeParams& params) const {
  Impl impl{features_, params, false, {}, 0, targets, {}, {}};
  impl.tree.value_width = 1;
  impl.goes_left.assign(features_.rows(), 0);
  impl.build(sorted_, 0);
  return std::move(impl.tree);
}

// ---------------------------------------------------------------------------

DecisionTreeModel::DecisionTreeModel(LearnerSpec spec, TaskKind task,
                                     std::size_t d, Tree tree)
    : Model(std::move(spec), task, d, true), tree_(std::move(tree)) {}

void DecisionTreeModel::predict_into(std::span<const double> x,
                                     std::span<double> out) const {
  const double* v = tree_.leaf_values(x);
  std::copy(v, v + out.size(), out.begin());
}

nlohmann::json DecisionTreeModel::params_json() const {
  return {{"tree", tree_.to_json()}};
}

ModelPtr FitDecisionTree(const LearnerSpec& spec, const Dataset& ds) {
  const TreeParams params{spec.get_int("max_depth"),
                          spec.get_int("min_samples_leaf")};
  TreeBuilder builder(ds.features);
  Tree tree;
  if (ds.task.is_classification()) {
    const auto labels = ds.labels();
    tree = builder.fit_classification(labels, ds.task.num_classes(), params);
  } else {
    tree = builder.fit_regression(ds.targets, params);
  }
  return std::make_shared<DecisionTreeModel>(spec, ds.task, ds.d(),
                                             std::move(tree));
}

}  // namespace xstacking
