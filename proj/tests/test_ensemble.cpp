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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "xstacking/ensemble.hpp"

namespace xstacking {
namespace {

namespace fs = std::filesystem;

Dataset Toy(std::size_t m, std::size_t d, bool classification, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.features = Matrix(m, d);
  ds.targets.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      ds.features(i, j) = rng.uniform(-1.0, 1.0) * (1.0 + static_cast<double>(j));
      s += (j % 2 ? -0.8 : 1.0) * ds.features(i, j);
    }
    s += std::sin(3.0 * ds.features(i, 0)) + 0.2 * rng.normal();
    ds.targets[i] = classification ? (s > 0 ? 1.0 : 0.0) : s;
  }
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  if (classification) {
    ds.task = TaskKind::Classification(2);
    ds.class_labels = {"0", "1"};
  } else {
    ds.task = TaskKind::Regression();
  }
  ds.target_name = "y";
  return ds;
}

EnsembleConfig Quick(const TaskKind& task) {
  EnsembleConfig c;
  c.base_specs = {LearnerSpec::Parse("decision_tree:max_depth=4"),
                  task.is_classification() ? LearnerSpec::Parse("logistic_regression:epochs=100")
                                           : LearnerSpec::Parse("linear_regression"),
                  LearnerSpec::Parse("mlp:hidden_units=6,epochs=20")};
  c.meta_spec = DefaultMetaSpec(task);
  c.n_folds = 3;
  c.shap.background_size = 20;
  return c;
}

std::string ReadAll(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(MetaFeatures, WidthIsKTimesD) {
  const Dataset ds = Toy(90, 4, true, 1);
  const Ensemble e = Train(ds, Quick(ds.task));
  EXPECT_EQ(e.meta_width(), 12u);
  EXPECT_EQ(e.training_meta.width(), 12u);
  EXPECT_EQ(e.summary.meta_width, 12u);
  EXPECT_EQ(e.meta_features(ds.features).cols(), 12u);
  // Learner-major, feature-minor.
  EXPECT_EQ(e.provenance[5].learner, 1u);
  EXPECT_EQ(e.provenance[5].feature, "f1");
}

TEST(MetaFeatures, PredictionModeRegressionWidthIsK) {
  const Dataset ds = Toy(60, 4, false, 2);
  EnsembleConfig c = Quick(ds.task);
  c.mode = MetaMode::kPrediction;
  const Ensemble e = Train(ds, c);
  EXPECT_EQ(e.meta_width(), 3u);
}

TEST(MetaFeatures, AppendPredictionsAddsColumns) {
  const Dataset ds = Toy(60, 4, true, 2);
  EnsembleConfig c = Quick(ds.task);
  c.append_predictions = true;
  const Ensemble e = Train(ds, c);
  EXPECT_GT(e.meta_width(), 12u);
  EXPECT_FALSE(e.provenance.back().is_attribution);
}

TEST(MetaFeatures, ConstantBaseLearnersGiveZeros) {
  const Dataset ds = Toy(60, 3, false, 3);
  EnsembleConfig c = Quick(ds.task);
  c.base_specs = {LearnerSpec::Parse("decision_tree:max_depth=0"),
                  LearnerSpec::Parse("gbt:n_rounds=1,max_depth=0,learning_rate=1")};
  const Ensemble e = Train(ds, c);
  for (double v : e.training_meta.features.data()) EXPECT_EQ(v, 0.0);
  // Zero meta input: the prediction is the meta model at the zero vector.
  const std::vector<double> zero(e.meta_width(), 0.0);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(e.predict(ds.features.row(i)), e.predict_meta(zero));
  }
}

// Linear base learners with exact attribution: every stored row equals
// w_kj (x_j - mean(B_j)) for the fold model that produced it.
TEST(MetaFeatures, LinearClosedFormPerFoldModel) {
  const Dataset ds = Toy(45, 3, false, 4);
  EnsembleConfig c;
  c.base_specs = {LearnerSpec::Parse("linear_regression"), LearnerSpec::Parse("svr:epochs=50")};
  c.meta_spec = LearnerSpec::Parse("linear_regression");
  c.n_folds = 3;
  c.shap.estimator = EstimatorKind::kExact;
  c.shap.background_size = 10;
  const BaseStage base = FitBaseStage(ds, c);
  const MetaDataset meta = BuildMetaFeatures(base, MetaMode::kAttribution, c);
  for (std::size_t i = 0; i < ds.m(); ++i) {
    const auto t = static_cast<std::size_t>(base.folds.fold_of[i]);
    const Matrix& bg = base.fold_backgrounds[t].rows;
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& lin = dynamic_cast<const LinearModel&>(*base.fold_models[t][k]);
      for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (std::size_t r = 0; r < bg.rows(); ++r) mean += bg(r, j) / static_cast<double>(bg.rows());
        EXPECT_NEAR(meta.features(i, k * 3 + j),
                    lin.weights()(0, j) * (base.data.features(i, j) - mean), 1e-8);
      }
    }
  }
}

TEST(OutOfFold, RowsNeverExplainedByModelsTrainedOnThem) {
  const Dataset ds = Toy(70, 3, true, 5);
  const EnsembleConfig c = Quick(ds.task);
  std::mutex mu;
  std::map<std::pair<int, std::size_t>, std::set<std::size_t>> seen;
  const FitObserver obs = [&](int fold, std::size_t learner, std::span<const std::size_t> rows) {
    std::lock_guard<std::mutex> lock(mu);
    seen[{fold, learner}] = std::set<std::size_t>(rows.begin(), rows.end());
  };
  const BaseStage base = FitBaseStage(ds, c, obs);
  for (int t = 0; t < c.n_folds; ++t) {
    for (std::size_t k = 0; k < 3; ++k) {
      const auto& rows = seen.at({t, k});
      for (std::size_t i : base.folds.test_indices(t)) EXPECT_EQ(rows.count(i), 0u);
      EXPECT_EQ(rows.size(), base.folds.train_indices(t).size());
    }
  }
  EXPECT_EQ(seen.at({-1, 0}).size(), ds.m());
}

TEST(OutOfFold, InferencePathDiffersFromStoredRows) {
  const Dataset ds = Toy(80, 3, true, 6);
  const Ensemble e = Train(ds, Quick(ds.task));
  const Matrix infer = e.meta_features(ds.features);
  double diff = 0.0;
  for (std::size_t i = 0; i < infer.data().size(); ++i) {
    diff = std::max(diff, std::abs(infer.data()[i] - e.training_meta.features.data()[i]));
  }
  EXPECT_GT(diff, 1e-6);
}

TEST(Naive, MetaFeaturesComeFromFullModels) {
  const Dataset ds = Toy(50, 3, true, 7);
  EnsembleConfig c = Quick(ds.task);
  c.naive = true;
  const Ensemble e = Train(ds, c);
  EXPECT_TRUE(e.fold_models.empty());
  const Matrix infer = e.meta_features(ds.features);
  for (std::size_t i = 0; i < infer.data().size(); ++i) {
    EXPECT_NEAR(infer.data()[i], e.training_meta.features.data()[i], 1e-12);
  }
}

TEST(Provenance, StableBetweenTrainingAndInference) {
  const Dataset ds = Toy(50, 4, true, 8);
  const Ensemble e = Train(ds, Quick(ds.task));
  EXPECT_EQ(e.training_meta.provenance, e.provenance);
  EXPECT_EQ(e.training_meta.column_names().front(), "b0_decision_tree:f0");
}

TEST(Stacking, BinaryProbabilitiesInUnitInterval) {
  const Dataset ds = Toy(60, 3, true, 9);
  const EnsembleConfig c = Quick(ds.task);
  const Ensemble e = TrainStackingBaseline(ds, c.base_specs, c.meta_spec, 3, 42);
  EXPECT_EQ(e.meta_width(), 3u);
  for (double v : e.training_meta.features.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Stacking, SharesFoldsAndBaseModelsWithXStacking) {
  const Dataset ds = Toy(60, 3, true, 10);
  const EnsembleConfig c = Quick(ds.task);
  const Ensemble st = TrainStackingBaseline(ds, c.base_specs, c.meta_spec, 3, 42);
  const Ensemble xs = TrainXStacking(ds, c.base_specs, c.meta_spec, 3, 42, c.shap);
  ASSERT_EQ(st.fold_models.size(), xs.fold_models.size());
  for (std::size_t t = 0; t < st.fold_models.size(); ++t) {
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_EQ(st.fold_models[t][k]->to_json(), xs.fold_models[t][k]->to_json());
    }
  }
}

TEST(Stacking, DuplicatedRegressionLearnersGiveEqualColumns) {
  const Dataset ds = Toy(40, 3, false, 11);
  const LearnerSpec spec = LearnerSpec::Parse("mlp:hidden_units=4,epochs=10");
  const Ensemble e = TrainStackingBaseline(ds, {spec, spec}, LearnerSpec::Parse("linear_regression"),
                                           4, 3);
  for (std::size_t i = 0; i < ds.m(); ++i) {
    EXPECT_EQ(e.training_meta.features(i, 0), e.training_meta.features(i, 1));
  }
}

TEST(Predict, IdentityMetaReproducesFirstLearner) {
  const Dataset ds = Toy(50, 3, false, 12);
  EnsembleConfig c = Quick(ds.task);
  c.mode = MetaMode::kPrediction;
  c.standardize_meta = false;
  Ensemble e = Train(ds, c);
  Matrix w(1, 3);
  w(0, 0) = 1.0;
  e.meta_model = std::make_shared<LinearModel>(LearnerSpec(Family::kLinearRegression),
                                               TaskKind::Regression(), w, std::vector<double>{0.0},
                                               LinearLink::kIdentity, true);
  const Standardizer& s = e.input_standardizer;
  for (std::size_t i = 0; i < ds.m(); ++i) {
    std::vector<double> z(3);
    s.apply_row(ds.features.row(i), z);
    EXPECT_DOUBLE_EQ(e.predict(ds.features.row(i)), e.base_models[0]->predict_value(z));
  }
}

TEST(Predict, BatchEqualsRowByRow) {
  const Dataset ds = Toy(40, 3, true, 13);
  const Ensemble e = Train(ds, Quick(ds.task));
  const auto batch = e.predict(ds.features);
  for (std::size_t i = 0; i < ds.m(); ++i) EXPECT_EQ(batch[i], e.predict(ds.features.row(i)));
}

TEST(Permutation, BaseOrderPermutesColumnBlocks) {
  const Dataset ds = Toy(50, 3, true, 14);
  EnsembleConfig a = Quick(ds.task);
  EnsembleConfig b = a;
  std::swap(b.base_specs[0], b.base_specs[2]);
  const BaseStage sa = FitBaseStage(ds, a);
  const BaseStage sb = FitBaseStage(ds, b);
  const MetaDataset ma = BuildMetaFeatures(sa, MetaMode::kAttribution, a);
  const MetaDataset mb = BuildMetaFeatures(sb, MetaMode::kAttribution, b);
  const std::size_t where[3] = {2, 1, 0};
  for (std::size_t i = 0; i < ds.m(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(ma.features(i, k * 3 + j), mb.features(i, where[k] * 3 + j));
      }
    }
  }
  EXPECT_EQ(mb.provenance[6].learner_name, "decision_tree");
}

TEST(Serialization, TwoRunsAreByteIdentical) {
  const Dataset ds = Toy(50, 3, true, 15);
  const fs::path root = fs::temp_directory_path() / "xstk_ens_test";
  fs::remove_all(root);
  Train(ds, Quick(ds.task)).save((root / "a").string());
  Train(ds, Quick(ds.task)).save((root / "b").string());
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), root / "a");
    EXPECT_EQ(ReadAll(entry.path()), ReadAll(root / "b" / rel)) << rel;
    ++files;
  }
  EXPECT_GT(files, 5u);
  fs::remove_all(root);
}

TEST(Serialization, LoadReproducesPredictions) {
  const fs::path dir = fs::temp_directory_path() / "xstk_ens_load";
  fs::remove_all(dir);
  for (bool cls : {true, false}) {
    const Dataset ds = Toy(50, 3, cls, 16);
    const Ensemble e = Train(ds, Quick(ds.task));
    e.save(dir.string());
    const Ensemble back = Ensemble::Load(dir.string());
    EXPECT_EQ(back.provenance, e.provenance);
    for (std::size_t i = 0; i < ds.m(); ++i) {
      EXPECT_EQ(back.predict_scores(ds.features.row(i)), e.predict_scores(ds.features.row(i)));
    }
    fs::remove_all(dir);
  }
}

TEST(Serialization, CorruptManifestIsDataError) {
  const fs::path dir = fs::temp_directory_path() / "xstk_ens_bad";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "ensemble.json") << "{\"format\": \"something-else\"}";
  try {
    Ensemble::Load(dir.string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
  }
  fs::remove_all(dir);
}

TEST(Train, ThreadCountDoesNotChangeResult) {
  const Dataset ds = Toy(60, 4, true, 17);
  SetNumThreads(1);
  const Ensemble a = Train(ds, Quick(ds.task));
  SetNumThreads(4);
  const Ensemble b = Train(ds, Quick(ds.task));
  SetNumThreads(0);
  EXPECT_EQ(a.training_meta.features, b.training_meta.features);
  EXPECT_EQ(a.meta_model->to_json(), b.meta_model->to_json());
}

TEST(Train, RejectsEmptyBaseList) {
  const Dataset ds = Toy(20, 2, true, 18);
  EnsembleConfig c = Quick(ds.task);
  c.base_specs.clear();
  EXPECT_THROW(Train(ds, c), Error);
}

}  // namespace
}  // namespace xstacking
