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

// Two-stage stacked ensembles.
//
// Prediction mode is classic stacking: the meta-learner sees the base
// learners' scores. Attribution mode (XStacking) feeds it the concatenated
// per-learner Shapley vectors instead, K * d columns ordered learner-major,
// feature-minor.
//
// Training rows receive out-of-fold meta-features: for fold t the base
// learners are fit without fold t and only then explain (or score) fold t.
// Inference uses base learners refit on all training rows. The naive switch
// skips the folds and builds the meta-features from the full-data models.

#ifndef XSTACKING_ENSEMBLE_HPP_
#define XSTACKING_ENSEMBLE_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xstacking/dataset.hpp"
#include "xstacking/learners.hpp"
#include "xstacking/shapley.hpp"

namespace xstacking {

enum class MetaMode { kAttribution, kPrediction };

std::string MetaModeName(MetaMode mode);
MetaMode ParseMetaMode(std::string_view name);

struct ColumnProvenance {
  std::size_t learner = 0;
  std::string learner_name;
  /// Source feature name (attribution columns) or empty.
  std::string feature;
  /// Class index for prediction columns of classification tasks, else -1.
  int class_index = -1;
  /// Attribution column vs appended prediction column.
  bool is_attribution = true;

  /// Column header, e.g. "b0_decision_tree:x3" or "b1_mlp:p1".
  std::string column_name() const;

  friend bool operator==(const ColumnProvenance&,
                         const ColumnProvenance&) = default;
};

struct MetaDataset {
  Matrix features;
  std::vector<double> targets;
  TaskKind task = TaskKind::Regression();
  std::vector<ColumnProvenance> provenance;
  MetaMode mode = MetaMode::kAttribution;

  std::size_t width() const noexcept { return features.cols(); }
  std::vector<std::string> column_names() const;
  Dataset as_dataset() const;
};

struct EnsembleConfig {
  std::vector<LearnerSpec> base_specs;
  LearnerSpec meta_spec{Family::kLinearSvm};
  MetaMode mode = MetaMode::kAttribution;
  int n_folds = 5;
  std::uint64_t seed = 42;
  ShapConfig shap;
  /// Build meta-features from full-data models (no out-of-fold step).
  bool naive = false;
  /// Attribution mode: append base predictions after the attributions.
  bool append_predictions = false;
  /// Standardize raw inputs before the base learners.
  bool standardize_inputs = true;
  /// Standardize meta-features before the meta-learner.
  bool standardize_meta = true;

  nlohmann::json to_json() const;
  static EnsembleConfig FromJson(const nlohmann::json& j);
};

/// Called once per base-learner fit with the training rows it saw.
/// fold == -1 marks the full-data refit.
using FitObserver = std::function<void(int fold, std::size_t learner,
                                       std::span<const std::size_t> rows)>;

struct PhaseTimings {
  double base_fit_seconds = 0.0;
  double explanation_seconds = 0.0;
  double meta_fit_seconds = 0.0;
  double total() const {
    return base_fit_seconds + explanation_seconds + meta_fit_seconds;
  }
};

/// Everything computed before meta-features: input standardization, fold
/// assignment, fold models and full-data models. Shared between stacking and
/// XStacking so paired comparisons use identical base models.
struct BaseStage {
  Dataset data;  // standardized training data
  Standardizer input_standardizer;
  std::vector<LearnerSpec> base_specs;
  FoldAssignment folds;
  std::vector<std::vector<ModelPtr>> fold_models;  // [fold][learner]
  std::vector<BackgroundSet> fold_backgrounds;     // [fold]
  std::vector<ModelPtr> full_models;               // [learner]
  BackgroundSet full_background;
  double fit_seconds = 0.0;
};

BaseStage FitBaseStage(const Dataset& raw, const EnsembleConfig& config,
                       const FitObserver& observer = nullptr);

/// Stage-2 learning space for `mode`, with its build time.
MetaDataset BuildMetaFeatures(const BaseStage& base, MetaMode mode,
                              const EnsembleConfig& config,
                              double* seconds = nullptr);

/// Direct form: fits the fold models for `folds` and builds the meta
/// features of `ds` (no input standardization).
MetaDataset BuildMetaFeatures(const Dataset& ds,
                              const std::vector<LearnerSpec>& base_specs,
                              const FoldAssignment& folds, MetaMode mode,
                              const ShapConfig& shap, std::uint64_t seed);

struct TrainingSummary {
  std::size_t n_rows = 0;
  std::size_t n_features = 0;
  std::size_t n_learners = 0;
  std::size_t meta_width = 0;
  std::vector<std::pair<std::string, bool>> convergence;
  /// Accuracy (classification) or MSE (regression) of the inference path on
  /// the training rows.
  double training_metric = 0.0;
  std::string training_metric_name;
  std::vector<std::string> warnings;
  PhaseTimings timings;

  nlohmann::json to_json(bool include_timings) const;
};

class Ensemble {
 public:
  Ensemble() = default;

  EnsembleConfig config;
  TaskKind task = TaskKind::Regression();
  std::vector<std::string> feature_names;
  std::vector<std::string> class_labels;
  std::string target_name;
  Standardizer input_standardizer;
  std::vector<ModelPtr> base_models;
  std::vector<std::vector<ModelPtr>> fold_models;
  BackgroundSet background;
  std::vector<ColumnProvenance> provenance;
  Standardizer meta_standardizer;
  ModelPtr meta_model;
  /// Sample of training meta-features; background for stage-2 explanations.
  BackgroundSet meta_background;
  /// Out-of-fold (or naive) meta-features the meta-learner was trained on.
  MetaDataset training_meta;
  TrainingSummary summary;

  std::size_t n_learners() const noexcept { return base_models.size(); }
  std::size_t meta_width() const noexcept { return provenance.size(); }
  MetaMode mode() const noexcept { return config.mode; }

  /// Inference-path meta-features of one raw (unstandardized) instance.
  std::vector<double> meta_features(std::span<const double> x) const;
  Matrix meta_features(const Matrix& raw) const;

  /// Meta-model scores (class probabilities or the regression value).
  std::vector<double> predict_scores(std::span<const double> x) const;
  /// Predicted class index, or regression value.
  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& raw) const;
  /// Prediction from already computed meta-features.
  double predict_meta(std::span<const double> z) const;
  std::vector<double> meta_scores(std::span<const double> z) const;

  /// Score function of the meta-model over raw meta-features (meta
  /// standardization included) for the instance with meta-features z.
  ScoreFn meta_explanation_target(std::span<const double> z) const;

  void save(const std::string& dir) const;
  static Ensemble Load(const std::string& dir);
};

/// Fits the meta-learner on prepared meta-features.
Ensemble AssembleEnsemble(const Dataset& raw, const BaseStage& base,
                          const MetaDataset& meta, const LearnerSpec& meta_spec,
                          const EnsembleConfig& config);

Ensemble Train(const Dataset& raw, const EnsembleConfig& config,
               const FitObserver& observer = nullptr);

Ensemble TrainXStacking(const Dataset& ds,
                        const std::vector<LearnerSpec>& base_specs,
                        const LearnerSpec& meta_spec, int n_folds,
                        std::uint64_t seed, const ShapConfig& shap);

Ensemble TrainStackingBaseline(const Dataset& ds,
                               const std::vector<LearnerSpec>& base_specs,
                               const LearnerSpec& meta_spec, int n_folds,
                               std::uint64_t seed);

/// Default base learners per task (tree, linear or logistic, MLP).
std::vector<LearnerSpec> DefaultBaseSpecs(const TaskKind& task);
LearnerSpec DefaultMetaSpec(const TaskKind& task);

}  // namespace xstacking

#endif  // XSTACKING_ENSEMBLE_HPP_
