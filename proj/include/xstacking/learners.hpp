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

// Base and meta learners behind a single Model interface.
//
// Every model maps a d-vector to a score vector: one real value for
// regression, class probabilities (summing to one) for classification.
// Models are immutable after fitting and safe to share between threads.

#ifndef XSTACKING_LEARNERS_HPP_
#define XSTACKING_LEARNERS_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "xstacking/common.hpp"
#include "xstacking/dataset.hpp"

namespace xstacking {

enum class Family {
  kDecisionTree,
  kLinearRegression,
  kLogisticRegression,
  kMlp,
  kLinearSvm,
  kLinearSvr,
  kGradientBoostedTrees,
};

std::string FamilyName(Family f);
/// Accepts canonical names and short aliases (tree, linear, logistic, mlp,
/// svm, svr, gbt).
Family ParseFamily(std::string_view name);

struct LearnerSpec {
  Family family = Family::kDecisionTree;
  /// Family-specific hyperparameters. Missing keys take defaults.
  std::map<std::string, double> hyperparameters;
  std::uint64_t seed = 0;

  LearnerSpec() = default;
  explicit LearnerSpec(Family f, std::map<std::string, double> hp = {},
                       std::uint64_t s = 0)
      : family(f), hyperparameters(std::move(hp)), seed(s) {}

  /// Parses "family[:key=value,...]".
  static LearnerSpec Parse(std::string_view text);

  /// Copy with every default filled in. Throws a usage error on unknown keys
  /// or out-of-range values.
  LearnerSpec resolved() const;

  double get(const std::string& key) const;
  int get_int(const std::string& key) const;

  /// Canonical "family:key=value,..." form (resolved hyperparameters).
  std::string to_string() const;

  nlohmann::json to_json() const;
  static LearnerSpec FromJson(const nlohmann::json& j);

  friend bool operator==(const LearnerSpec&, const LearnerSpec&) = default;
};

/// Default hyperparameters for a family.
std::map<std::string, double> DefaultHyperparameters(Family f);

class Model {
 public:
  virtual ~Model() = default;

  const LearnerSpec& spec() const noexcept { return spec_; }
  const TaskKind& task() const noexcept { return task_; }
  std::size_t n_features() const noexcept { return n_features_; }
  /// 1 for regression, num_classes for classification.
  std::size_t n_outputs() const noexcept {
    return task_.is_classification()
               ? static_cast<std::size_t>(task_.num_classes())
               : 1;
  }
  bool converged() const noexcept { return converged_; }

  /// Writes n_outputs() scores for x. No dimension check; hot path.
  virtual void predict_into(std::span<const double> x,
                            std::span<double> out) const = 0;

  /// Checked scoring.
  std::vector<double> predict_score(std::span<const double> x) const;
  /// Class index with the highest score (first wins ties).
  int predict_label(std::span<const double> x) const;
  /// Regression value, or predicted class index as a double.
  double predict_value(std::span<const double> x) const;

  /// Versioned JSON document. Parameters are stored as decimal strings with
  /// 17 significant digits so reloading scores bit-identically.
  nlohmann::json to_json() const;

 protected:
  Model(LearnerSpec spec, TaskKind task, std::size_t n_features,
        bool converged)
      : spec_(std::move(spec)),
        task_(task),
        n_features_(n_features),
        converged_(converged) {}

  virtual nlohmann::json params_json() const = 0;

 private:
  LearnerSpec spec_;
  TaskKind task_;
  std::size_t n_features_;
  bool converged_;
};

using ModelPtr = std::shared_ptr<const Model>;

/// Fits a model. Deterministic given (spec, ds), including spec.seed.
ModelPtr Fit(const LearnerSpec& spec, const Dataset& ds);
ModelPtr ModelFromJson(const nlohmann::json& j);

/// Throws a usage error if the family cannot handle the task.
void CheckFamilySupportsTask(Family f, const TaskKind& task);

// ---------------------------------------------------------------------------
// Concrete models. Exposed for tests and for hand-built models.

/// Binary axis-aligned tree. Leaves hold class frequencies (classification)
/// or a single mean value (regression). x[feature] <= threshold goes left.
struct Tree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::size_t value_offset = 0;
  };
  std::vector<Node> nodes;
  std::vector<double> values;
  std::size_t value_width = 1;

  const double* leaf_values(std::span<const double> x) const {
    int n = 0;
    while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
      const Node& node = nodes[static_cast<std::size_t>(n)];
      n = x[static_cast<std::size_t>(node.feature)] <= node.threshold
              ? node.left
              : node.right;
    }
    return values.data() + nodes[static_cast<std::size_t>(n)].value_offset;
  }
  std::size_t leaf_count() const;
  /// Features used by at least one split.
  std::vector<bool> used_features(std::size_t d) const;

  nlohmann::json to_json() const;
  static Tree FromJson(const nlohmann::json& j);
};

struct TreeParams {
  int max_depth = 8;
  int min_samples_leaf = 2;
};

/// Builds CART trees over a fixed feature matrix. Column orderings are
/// computed once so repeated fits on new targets (boosting) are cheap.
/// Split ties go to the lowest feature index, then the lowest threshold.
class TreeBuilder {
 public:
  explicit TreeBuilder(const Matrix& features);

  /// Gini impurity, leaves store class frequencies.
  Tree fit_classification(std::span<const int> labels, int num_classes,
                          const TreeParams& params) const;
  /// Variance reduction, leaves store the mean target.
  Tree fit_regression(std::span<const double> targets,
                      const TreeParams& params) const;

 private:
  struct Impl;
  const Matrix& features_;
  std::vector<std::vector<std::uint32_t>> sorted_;
};

class DecisionTreeModel final : public Model {
 public:
  DecisionTreeModel(LearnerSpec spec, TaskKind task, std::size_t d, Tree tree);
  void predict_into(std::span<const double> x,
                    std::span<double> out) const override;
  const Tree& tree() const noexcept { return tree_; }

 protected:
  nlohmann::json params_json() const override;

 private:
  Tree tree_;
};

/// Output link of a linear model.
enum class LinearLink {
  kIdentity,      // regression: w.x + b
  kSigmoid,       // binary: one row, p1 = sigmoid(w.x + b)
  kSoftmax,       // multiclass logistic: one row per class
  kOvrSigmoid,    // multiclass one-vs-rest: normalized per-row sigmoids
};

/// Shared representation of linear regression, logistic regression, linear
/// SVM and linear SVR.
class LinearModel final : public Model {
 public:
  LinearModel(LearnerSpec spec, TaskKind task, Matrix weights,
              std::vector<double> bias, LinearLink link, bool converged);
  void predict_into(std::span<const double> x,
                    std::span<double> out) const override;

  const Matrix& weights() const noexcept { return weights_; }
  const std::vector<double>& bias() const noexcept { return bias_; }
  LinearLink link() const noexcept { return link_; }

 protected:
  nlohmann::json params_json() const override;

 private:
  Matrix weights_;
  std::vector<double> bias_;
  LinearLink link_;
};

enum class MlpLoss { kSquared, kSoftmaxCrossEntropy };

/// Fully connected tanh network with a linear output layer. Parameters are
/// one flat vector: per layer the weight matrix (out x in, row-major)
/// followed by the bias.
class MlpNetwork {
 public:
  MlpNetwork() = default;
  explicit MlpNetwork(std::vector<int> layer_sizes);

  const std::vector<int>& layer_sizes() const noexcept { return sizes_; }
  std::size_t n_params() const noexcept { return params_.size(); }
  std::vector<double>& params() noexcept { return params_; }
  const std::vector<double>& params() const noexcept { return params_; }

  /// Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)), zero bias.
  void initialize(Rng& rng);

  /// Raw outputs (pre-softmax).
  void forward(std::span<const double> x, std::span<double> out) const;

  /// Mean loss over the given rows and its gradient with respect to every
  /// parameter (grad is overwritten). Squared loss is 0.5 * (y - yhat)^2;
  /// cross-entropy targets are class indices.
  double loss_and_gradient(const Matrix& x, std::span<const double> targets,
                           std::span<const std::size_t> rows, MlpLoss loss,
                           std::span<double> grad) const;
  double loss(const Matrix& x, std::span<const double> targets,
              std::span<const std::size_t> rows, MlpLoss loss) const;

 private:
  std::vector<int> sizes_;
  std::vector<double> params_;
};

class MlpModel final : public Model {
 public:
  MlpModel(LearnerSpec spec, TaskKind task, std::size_t d, MlpNetwork net,
           double target_mean, double target_scale, bool converged);
  void predict_into(std::span<const double> x,
                    std::span<double> out) const override;
  const MlpNetwork& network() const noexcept { return net_; }

 protected:
  nlohmann::json params_json() const override;

 private:
  MlpNetwork net_;
  double target_mean_;
  double target_scale_;
};

/// Additive ensemble of regression trees. Regression: squared loss.
/// Classification: one logistic booster per class (a single booster for the
/// binary case), probabilities normalized to sum to one.
class BoostedTreesModel final : public Model {
 public:
  BoostedTreesModel(LearnerSpec spec, TaskKind task, std::size_t d,
                    std::vector<double> base_scores,
                    std::vector<std::vector<Tree>> trees,
                    std::vector<double> loss_history);
  void predict_into(std::span<const double> x,
                    std::span<double> out) const override;

  /// Training loss before any tree and after each round.
  const std::vector<double>& loss_history() const noexcept {
    return loss_history_;
  }
  std::size_t n_boosters() const noexcept { return trees_.size(); }

 protected:
  nlohmann::json params_json() const override;

 private:
  double raw_score(std::size_t booster, std::span<const double> x) const;

  double learning_rate_;
  std::vector<double> base_scores_;
  std::vector<std::vector<Tree>> trees_;
  std::vector<double> loss_history_;
};

// Family-level fitting entry points (Fit dispatches here).
ModelPtr FitDecisionTree(const LearnerSpec& spec, const Dataset& ds);
ModelPtr FitLinearRegression(const LearnerSpec& spec, const Dataset& ds);
ModelPtr FitLogisticRegression(const LearnerSpec& spec, const Dataset& ds);
ModelPtr FitMlp(const LearnerSpec& spec, const Dataset& ds);
ModelPtr FitLinearSvm(const LearnerSpec& spec, const Dataset& ds);
ModelPtr FitLinearSvr(const LearnerSpec& spec, const Dataset& ds);
ModelPtr FitGradientBoostedTrees(const LearnerSpec& spec, const Dataset& ds);

// JSON helpers for parameter arrays.
nlohmann::json DoublesToJson(std::span<const double> values);
std::vector<double> DoublesFromJson(const nlohmann::json& j);

}  // namespace xstacking

#endif  // XSTACKING_LEARNERS_HPP_
