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

#include "xstacking/ensemble.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "xstacking/eval.hpp"

namespace xstacking {

namespace {

// Seed stream tags. Learner streams are keyed by the spec seed rather than
// the learner's position, so identical specs fit identical models and
// reordering the learners only reorders the meta-feature blocks.
enum : std::uint64_t {
  kSeedFolds = 1,
  kSeedFoldModel = 2,
  kSeedFullModel = 3,
  kSeedFoldBackground = 4,
  kSeedFullBackground = 5,
  kSeedTrainExplain = 6,
  kSeedInferExplain = 7,
  kSeedMetaModel = 8,
  kSeedMetaBackground = 9,
};

constexpr std::uint64_t kNaiveFold = 0xFFFFFFFFULL;

double SecondsSince(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

std::size_t PredictionWidth(const TaskKind& task) {
  if (task.is_regression() || task.num_classes() == 2) return 1;
  return static_cast<std::size_t>(task.num_classes());
}

// Prediction-mode columns of one learner: the regression value, the class-1
// probability (binary) or every class probability (multiclass).
void PredictionColumns(const Model& model, std::span<const double> x,
                       std::span<double> out) {
  thread_local std::vector<double> buf;
  buf.resize(model.n_outputs());
  model.predict_into(x, buf);
  if (model.task().is_regression()) {
    out[0] = buf[0];
  } else if (model.task().num_classes() == 2) {
    out[0] = buf[1];
  } else {
    std::copy(buf.begin(), buf.end(), out.begin());
  }
}

std::vector<ColumnProvenance> MakeProvenance(
    const std::vector<LearnerSpec>& specs,
    const std::vector<std::string>& feature_names, const TaskKind& task,
    MetaMode mode, bool append_predictions) {
  std::vector<ColumnProvenance> cols;
  const std::size_t pw = PredictionWidth(task);
  auto add_prediction_cols = [&](std::size_t k) {
    for (std::size_t c = 0; c < pw; ++c) {
      ColumnProvenance p;
      p.learner = k;
      p.learner_name = FamilyName(specs[k].family);
      p.is_attribution = false;
      if (task.is_classification()) {
        p.class_index = task.num_classes() == 2 ? 1 : static_cast<int>(c);
      }
      cols.push_back(std::move(p));
    }
  };
  for (std::size_t k = 0; k < specs.size(); ++k) {
    if (mode == MetaMode::kPrediction) {
      add_prediction_cols(k);
      continue;
    }
    for (const auto& f : feature_names) {
      ColumnProvenance p;
      p.learner = k;
      p.learner_name = FamilyName(specs[k].family);
      p.feature = f;
      cols.push_back(std::move(p));
    }
  }
  if (mode == MetaMode::kAttribution && append_predictions) {
    for (std::size_t k = 0; k < specs.size(); ++k) add_prediction_cols(k);
  }
  return cols;
}

LearnerSpec WithSeed(const LearnerSpec& spec, std::uint64_t seed) {
  LearnerSpec s = spec.resolved();
  s.seed = seed;
  return s;
}

// Fills the meta-feature block of `rows` (indices into `features`) for
// learner k into `out` at the given column offset.
void FillLearnerBlock(const Model& model, const Matrix& features,
                      std::span<const std::size_t> rows,
                      const BackgroundSet& background, MetaMode mode,
                      const ShapConfig& shap, std::uint64_t seed,
                      std::size_t col_offset, Matrix& out) {
  const Matrix sub = features.select_rows(rows);
  if (mode == MetaMode::kAttribution) {
    const Matrix phi = ExplainDataset(model, sub, background, shap, seed);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy(phi.row(i).begin(), phi.row(i).end(),
                out.row(rows[i]).begin() + static_cast<std::ptrdiff_t>(col_offset));
    }
  } else {
    const std::size_t pw = PredictionWidth(model.task());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      PredictionColumns(model, sub.row(i),
                        out.row(rows[i]).subspan(col_offset, pw));
    }
  }
}

}  // namespace

std::string MetaModeName(MetaMode mode) {
  return mode == MetaMode::kAttribution ? "attribution" : "prediction";
}

MetaMode ParseMetaMode(std::string_view name) {
  const std::string n = Trim(name);
  if (n == "attribution" || n == "xstacking") return MetaMode::kAttribution;
  if (n == "prediction" || n == "stacking") return MetaMode::kPrediction;
  ThrowUsage("unknown mode '" + n + "' (expected xstacking|stacking)");
}

std::string ColumnProvenance::column_name() const {
  std::string base = "b" + std::to_string(learner) + "_" + learner_name + ":";
  if (is_attribution) return base + feature;
  if (class_index >= 0) return base + "p" + std::to_string(class_index);
  return base + "pred";
}

std::vector<std::string> MetaDataset::column_names() const {
  std::vector<std::string> names;
  names.reserve(provenance.size());
  for (const auto& p : provenance) names.push_back(p.column_name());
  return names;
}

Dataset MetaDataset::as_dataset() const {
  Dataset ds;
  ds.features = features;
  ds.targets = targets;
  ds.task = task;
  ds.feature_names = column_names();
  return ds;
}

// ---------------------------------------------------------------------------

nlohmann::json EnsembleConfig::to_json() const {
  nlohmann::json base = nlohmann::json::array();
  for (const auto& s : base_specs) base.push_back(s.to_string());
  return {{"base", base},
          {"meta", meta_spec.to_string()},
          {"mode", mode == MetaMode::kAttribution ? "xstacking" : "stacking"},
          {"folds", n_folds},
          {"seed", seed},
          {"shap_estimator", EstimatorName(shap.estimator)},
          {"shap_samples", shap.n_samples},
          {"shap_auto_exact_max_features", shap.auto_exact_max_features},
          {"background_size", shap.background_size},
          {"naive", naive},
          {"append_predictions", append_predictions},
          {"standardize_inputs", standardize_inputs},
          {"standardize_meta", standardize_meta}};
}

EnsembleConfig EnsembleConfig::FromJson(const nlohmann::json& j) {
  EnsembleConfig c;
  auto parse_spec = [](const nlohmann::json& v) {
    return v.is_string() ? LearnerSpec::Parse(v.get<std::string>())
                         : LearnerSpec::FromJson(v);
  };
  try {
    if (j.contains("base")) {
      for (const auto& s : j.at("base")) c.base_specs.push_back(parse_spec(s));
    }
    if (j.contains("meta")) c.meta_spec = parse_spec(j.at("meta"));
    if (j.contains("mode")) c.mode = ParseMetaMode(j.at("mode").get<std::string>());
    if (j.contains("folds")) c.n_folds = j.at("folds").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("shap_estimator")) {
      c.shap.estimator = ParseEstimator(j.at("shap_estimator").get<std::string>());
    }
    if (j.contains("shap_samples")) {
      c.shap.n_samples = j.at("shap_samples").get<std::size_t>();
    }
    if (j.contains("shap_auto_exact_max_features")) {
      c.shap.auto_exact_max_features =
          j.at("shap_auto_exact_max_features").get<int>();
    }
    if (j.contains("background_size")) {
      c.shap.background_size = j.at("background_size").get<std::size_t>();
    }
    if (j.contains("naive")) c.naive = j.at("naive").get<bool>();
    if (j.contains("append_predictions")) {
      c.append_predictions = j.at("append_predictions").get<bool>();
    }
    if (j.contains("standardize_inputs")) {
      c.standardize_inputs = j.at("standardize_inputs").get<bool>();
    }
    if (j.contains("standardize_meta")) {
      c.standardize_meta = j.at("standardize_meta").get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    ThrowUsage(std::string("invalid ensemble config: ") + e.what());
  }
  if (c.shap.background_size < 1) ThrowUsage("background_size must be >= 1");
  return c;
}

nlohmann::json TrainingSummary::to_json(bool include_timings) const {
  nlohmann::json conv = nlohmann::json::array();
  for (const auto& [name, ok] : convergence) {
    conv.push_back({{"model", name}, {"converged", ok}});
  }
  nlohmann::json j = {{"n_rows", n_rows},
                      {"n_features", n_features},
                      {"n_learners", n_learners},
                      {"meta_width", meta_width},
                      {"convergence", conv},
                      {"training_metric", {{"name", training_metric_name},
                                           {"value", training_metric}}},
                      {"warnings", warnings}};
  if (include_timings) {
    j["timings"] = {{"base_fit_seconds", timings.base_fit_seconds},
                    {"explanation_seconds", timings.explanation_seconds},
                    {"meta_fit_seconds", timings.meta_fit_seconds},
                    {"total_seconds", timings.total()}};
  }
  return j;
}

// ---------------------------------------------------------------------------

BaseStage FitBaseStage(const Dataset& raw, const EnsembleConfig& config,
                       const FitObserver& observer) {
  raw.validate();
  if (config.base_specs.empty()) ThrowUsage("at least one base learner required");
  for (const auto& s : config.base_specs) {
    CheckFamilySupportsTask(s.family, raw.task);
  }
  CheckFamilySupportsTask(config.meta_spec.family, raw.task);
  const auto start = std::chrono::steady_clock::now();

  BaseStage base;
  base.base_specs.reserve(config.base_specs.size());
  for (const auto& s : config.base_specs) base.base_specs.push_back(s.resolved());
  base.input_standardizer = config.standardize_inputs
                                ? Standardizer::Fit(raw.features)
                                : Standardizer::Identity(raw.d());
  base.data = base.input_standardizer.apply(raw);
  const std::size_t k_count = base.base_specs.size();
  const auto& data = base.data;

  if (!config.naive) {
    if (config.n_folds < 2) ThrowUsage("folds must be >= 2");
    std::vector<int> strata;
    if (data.task.is_classification()) strata = data.labels();
    base.folds = KFoldSplit(data.m(), config.n_folds,
                            DeriveSeed(config.seed, {kSeedFolds}),
                            data.task.is_classification() ? &strata : nullptr);
    const auto n_folds = static_cast<std::size_t>(config.n_folds);
    base.fold_models.assign(n_folds, std::vector<ModelPtr>(k_count));
    std::vector<std::vector<std::size_t>> train_rows(n_folds);
    for (std::size_t t = 0; t < n_folds; ++t) {
      train_rows[t] = base.folds.train_indices(static_cast<int>(t));
      base.fold_backgrounds.push_back(BackgroundSet::Sample(
          data.features.select_rows(train_rows[t]), config.shap.background_size,
          DeriveSeed(config.seed, {kSeedFoldBackground, t})));
    }
    // Subsets keep the full class count even if a class is absent.
    std::vector<Dataset> fold_data(n_folds);
    for (std::size_t t = 0; t < n_folds; ++t) {
      fold_data[t] = data.subset(train_rows[t]);
    }
    ParallelFor(n_folds * k_count, [&](std::size_t job) {
      const std::size_t t = job / k_count;
      const std::size_t k = job % k_count;
      const auto& spec = base.base_specs[k];
      base.fold_models[t][k] = Fit(
          WithSeed(spec, DeriveSeed(config.seed, {kSeedFoldModel, t, spec.seed})),
          fold_data[t]);
    });
    if (observer) {
      for (std::size_t t = 0; t < n_folds; ++t) {
        for (std::size_t k = 0; k < k_count; ++k) {
          observer(static_cast<int>(t), k, train_rows[t]);
        }
      }
    }
  }

  base.full_models.resize(k_count);
  ParallelFor(k_count, [&](std::size_t k) {
    const auto& spec = base.base_specs[k];
    base.full_models[k] = Fit(
        WithSeed(spec, DeriveSeed(config.seed, {kSeedFullModel, spec.seed})),
        data);
  });
  if (observer) {
    std::vector<std::size_t> all(data.m());
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (std::size_t k = 0; k < k_count; ++k) observer(-1, k, all);
  }
  base.full_background =
      BackgroundSet::Sample(data.features, config.shap.background_size,
                            DeriveSeed(config.seed, {kSeedFullBackground}));
  base.fit_seconds = SecondsSince(start);
  return base;
}

MetaDataset BuildMetaFeatures(const BaseStage& base, MetaMode mode,
                              const EnsembleConfig& config, double* seconds) {
  const auto start = std::chrono::steady_clock::now();
  const Dataset& data = base.data;
  const std::size_t k_count = base.base_specs.size();
  const bool append = mode == MetaMode::kAttribution && config.append_predictions;

  MetaDataset meta;
  meta.mode = mode;
  meta.task = data.task;
  meta.targets = data.targets;
  meta.provenance = MakeProvenance(base.base_specs, data.feature_names,
                                   data.task, mode, append);
  meta.features = Matrix(data.m(), meta.provenance.size());

  const std::size_t block =
      mode == MetaMode::kAttribution ? data.d() : PredictionWidth(data.task);
  const std::size_t pred_offset = k_count * block;
  const std::size_t pw = PredictionWidth(data.task);

  auto fill = [&](const Model& model, std::size_t k,
                  std::span<const std::size_t> rows,
                  const BackgroundSet& background, std::uint64_t fold_tag) {
    FillLearnerBlock(model, data.features, rows, background, mode, config.shap,
                     DeriveSeed(config.seed, {kSeedTrainExplain, base.base_specs[k].seed, fold_tag}),
                     k * block, meta.features);
    if (append) {
      FillLearnerBlock(model, data.features, rows, background,
                       MetaMode::kPrediction, config.shap, 0,
                       pred_offset + k * pw, meta.features);
    }
  };

  if (config.naive) {
    std::vector<std::size_t> all(data.m());
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (std::size_t k = 0; k < k_count; ++k) {
      fill(*base.full_models[k], k, all, base.full_background, kNaiveFold);
    }
  } else {
    for (int t = 0; t < base.folds.n_folds; ++t) {
      const auto rows = base.folds.test_indices(t);
      const auto tu = static_cast<std::size_t>(t);
      for (std::size_t k = 0; k < k_count; ++k) {
        fill(*base.fold_models[tu][k], k, rows, base.fold_backgrounds[tu], tu);
      }
    }
  }
  if (mode == MetaMode::kAttribution &&
      meta.width() != k_count * data.d() + (append ? k_count * pw : 0)) {
    ThrowTraining("meta-feature width mismatch");
  }
  if (seconds) *seconds = SecondsSince(start);
  return meta;
}

MetaDataset BuildMetaFeatures(const Dataset& ds,
                              const std::vector<LearnerSpec>& base_specs,
                              const FoldAssignment& folds, MetaMode mode,
                              const ShapConfig& shap, std::uint64_t seed) {
  if (folds.fold_of.size() != ds.m()) {
    ThrowUsage("fold assignment does not cover the dataset");
  }
  EnsembleConfig config;
  config.base_specs = base_specs;
  config.mode = mode;
  config.n_folds = folds.n_folds;
  config.seed = seed;
  config.shap = shap;
  config.standardize_inputs = false;
  config.meta_spec = DefaultMetaSpec(ds.task);

  // Same construction as FitBaseStage, with the caller's folds.
  BaseStage base;
  base.data = ds;
  base.input_standardizer = Standardizer::Identity(ds.d());
  for (const auto& s : base_specs) base.base_specs.push_back(s.resolved());
  base.folds = folds;
  const auto n_folds = static_cast<std::size_t>(folds.n_folds);
  const std::size_t k_count = base.base_specs.size();
  base.fold_models.assign(n_folds, std::vector<ModelPtr>(k_count));
  for (std::size_t t = 0; t < n_folds; ++t) {
    const auto rows = folds.train_indices(static_cast<int>(t));
    Dataset sub = ds.subset(rows);
    base.fold_backgrounds.push_back(BackgroundSet::Sample(
        sub.features, shap.background_size,
        DeriveSeed(seed, {kSeedFoldBackground, t})));
    for (std::size_t k = 0; k < k_count; ++k) {
      const auto& spec = base.base_specs[k];
      base.fold_models[t][k] = Fit(
          WithSeed(spec, DeriveSeed(seed, {kSeedFoldModel, t, spec.seed})), sub);
    }
  }
  return BuildMetaFeatures(base, mode, config);
}

// ---------------------------------------------------------------------------

Ensemble AssembleEnsemble(const Dataset& raw, const BaseStage& base,
                          const MetaDataset& meta, const LearnerSpec& meta_spec,
                          const EnsembleConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  Ensemble e;
  e.config = config;
  e.config.meta_spec = meta_spec.resolved();
  e.config.mode = meta.mode;
  e.config.base_specs = base.base_specs;
  e.task = raw.task;
  e.feature_names = raw.feature_names;
  e.class_labels = raw.class_labels;
  e.target_name = raw.target_name;
  e.input_standardizer = base.input_standardizer;
  e.base_models = base.full_models;
  e.fold_models = base.fold_models;
  e.background = base.full_background;
  e.provenance = meta.provenance;
  e.training_meta = meta;

  const std::size_t expected =
      meta.mode == MetaMode::kAttribution
          ? base.base_specs.size() * raw.d() +
                (config.append_predictions ? base.base_specs.size() *
                                                 PredictionWidth(raw.task)
                                           : 0)
          : base.base_specs.size() * PredictionWidth(raw.task);
  if (meta.width() != expected) {
    ThrowTraining("meta-learner input width " + std::to_string(meta.width()) +
                  " does not match expected " + std::to_string(expected));
  }

  e.meta_standardizer = config.standardize_meta
                            ? Standardizer::Fit(meta.features)
                            : Standardizer::Identity(meta.width());
  Dataset meta_ds = meta.as_dataset();
  meta_ds.features = e.meta_standardizer.apply(meta.features);
  const LearnerSpec ms = e.config.meta_spec;
  e.meta_model = Fit(
      WithSeed(ms, DeriveSeed(config.seed, {kSeedMetaModel, ms.seed})), meta_ds);
  e.config.meta_spec = ms;
  e.meta_background =
      BackgroundSet::Sample(meta.features, config.shap.background_size,
                            DeriveSeed(config.seed, {kSeedMetaBackground}));

  auto& s = e.summary;
  s.n_rows = raw.m();
  s.n_features = raw.d();
  s.n_learners = base.base_specs.size();
  s.meta_width = meta.width();
  for (std::size_t k = 0; k < base.full_models.size(); ++k) {
    s.convergence.emplace_back(
        "base_" + std::to_string(k) + "_" + FamilyName(base.base_specs[k].family),
        base.full_models[k]->converged());
  }
  for (std::size_t t = 0; t < base.fold_models.size(); ++t) {
    for (std::size_t k = 0; k < base.fold_models[t].size(); ++k) {
      s.convergence.emplace_back("fold_" + std::to_string(t) + "_base_" +
                                     std::to_string(k) + "_" +
                                     FamilyName(base.base_specs[k].family),
                                 base.fold_models[t][k]->converged());
    }
  }
  s.convergence.emplace_back("meta_" + FamilyName(ms.family),
                             e.meta_model->converged());
  if (base.base_specs.size() == 1) {
    s.warnings.push_back(
        "ensemble has a single base learner; stacking is degenerate");
  }
  s.timings.base_fit_seconds = base.fit_seconds;
  s.timings.meta_fit_seconds = SecondsSince(start);
  return e;
}

Ensemble Train(const Dataset& raw, const EnsembleConfig& config,
               const FitObserver& observer) {
  BaseStage base = FitBaseStage(raw, config, observer);
  double explain_seconds = 0.0;
  MetaDataset meta = BuildMetaFeatures(base, config.mode, config, &explain_seconds);
  Ensemble e = AssembleEnsemble(raw, base, meta, config.meta_spec, config);
  e.summary.timings.explanation_seconds = explain_seconds;

  // Inference-path metric on the training rows.
  const std::vector<double> pred = e.predict(raw.features);
  if (raw.task.is_classification()) {
    std::vector<int> labels(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) labels[i] = static_cast<int>(pred[i]);
    e.summary.training_metric = Accuracy(labels, raw.labels());
    e.summary.training_metric_name = "accuracy";
  } else {
    e.summary.training_metric = Mse(pred, raw.targets);
    e.summary.training_metric_name = "mse";
  }
  return e;
}

Ensemble TrainXStacking(const Dataset& ds,
                        const std::vector<LearnerSpec>& base_specs,
                        const LearnerSpec& meta_spec, int n_folds,
                        std::uint64_t seed, const ShapConfig& shap) {
  EnsembleConfig c;
  c.base_specs = base_specs;
  c.meta_spec = meta_spec;
  c.mode = MetaMode::kAttribution;
  c.n_folds = n_folds;
  c.seed = seed;
  c.shap = shap;
  return Train(ds, c);
}

Ensemble TrainStackingBaseline(const Dataset& ds,
                               const std::vector<LearnerSpec>& base_specs,
                               const LearnerSpec& meta_spec, int n_folds,
                               std::uint64_t seed) {
  EnsembleConfig c;
  c.base_specs = base_specs;
  c.meta_spec = meta_spec;
  c.mode = MetaMode::kPrediction;
  c.n_folds = n_folds;
  c.seed = seed;
  return Train(ds, c);
}

std::vector<LearnerSpec> DefaultBaseSpecs(const TaskKind& task) {
  if (task.is_classification()) {
    return {LearnerSpec(Family::kDecisionTree).resolved(),
            LearnerSpec(Family::kLogisticRegression).resolved(),
            LearnerSpec(Family::kMlp).resolved()};
  }
  return {LearnerSpec(Family::kDecisionTree).resolved(),
          LearnerSpec(Family::kLinearRegression).resolved(),
          LearnerSpec(Family::kMlp).resolved()};
}

LearnerSpec DefaultMetaSpec(const TaskKind& task) {
  return LearnerSpec(task.is_classification() ? Family::kLinearSvm
                                              : Family::kLinearSvr)
      .resolved();
}

// ---------------------------------------------------------------------------
// Inference

std::vector<double> Ensemble::meta_features(std::span<const double> x) const {
  if (x.size() != feature_names.size()) {
    ThrowData("input has " + std::to_string(x.size()) + " features, ensemble expects " +
              std::to_string(feature_names.size()));
  }
  std::vector<double> xs(x.size());
  input_standardizer.apply_row(x, xs);
  std::vector<double> z(provenance.size());
  const std::size_t k_count = base_models.size();
  const std::size_t pw = PredictionWidth(task);
  std::size_t col = 0;
  for (std::size_t k = 0; k < k_count; ++k) {
    const Model& model = *base_models[k];
    if (config.mode == MetaMode::kAttribution) {
      const Attribution a =
          ExplainInstance(model, xs, background, config.shap,
                          DeriveSeed(config.seed, {kSeedInferExplain, config.base_specs[k].seed}));
      std::copy(a.phi.begin(), a.phi.end(), z.begin() + static_cast<std::ptrdiff_t>(col));
      col += a.phi.size();
    } else {
      PredictionColumns(model, xs, std::span<double>(z).subspan(col, pw));
      col += pw;
    }
  }
  if (config.mode == MetaMode::kAttribution && config.append_predictions) {
    for (std::size_t k = 0; k < k_count; ++k) {
      PredictionColumns(*base_models[k], xs, std::span<double>(z).subspan(col, pw));
      col += pw;
    }
  }
  return z;
}

Matrix Ensemble::meta_features(const Matrix& raw) const {
  Matrix out(raw.rows(), provenance.size());
  ParallelFor(raw.rows(), [&](std::size_t i) {
    const auto z = meta_features(raw.row(i));
    std::copy(z.begin(), z.end(), out.row(i).begin());
  });
  return out;
}

std::vector<double> Ensemble::meta_scores(std::span<const double> z) const {
  std::vector<double> zs(z.size());
  meta_standardizer.apply_row(z, zs);
  return meta_model->predict_score(zs);
}

std::vector<double> Ensemble::predict_scores(std::span<const double> x) const {
  return meta_scores(meta_features(x));
}

double Ensemble::predict(std::span<const double> x) const {
  return predict_meta(meta_features(x));
}

double Ensemble::predict_meta(std::span<const double> z) const {
  const auto scores = meta_scores(z);
  if (task.is_regression()) return scores[0];
  return static_cast<double>(std::max_element(scores.begin(), scores.end()) -
                             scores.begin());
}

std::vector<double> Ensemble::predict(const Matrix& raw) const {
  std::vector<double> out(raw.rows());
  ParallelFor(raw.rows(), [&](std::size_t i) { out[i] = predict(raw.row(i)); });
  return out;
}

ScoreFn Ensemble::meta_explanation_target(std::span<const double> z) const {
  std::size_t cls = 0;
  if (task.is_classification()) {
    if (task.num_classes() == 2) {
      cls = 1;
    } else {
      const auto s = meta_scores(z);
      cls = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
    }
  }
  return [this, cls](std::span<const double> v) {
    thread_local std::vector<double> zs;
    thread_local std::vector<double> out;
    zs.resize(v.size());
    out.resize(meta_model->n_outputs());
    meta_standardizer.apply_row(v, zs);
    meta_model->predict_into(zs, out);
    return out[cls];
  };
}

}  // namespace xstacking
