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
#include <filesystem>
#include <set>

#include "xstacking/dataset.hpp"

namespace xstacking {
namespace {

TEST(LoadCsv, RegressionThreeRows) {
  const Dataset ds = ParseCsv("a,b,y\n1,2,3\n4,5,6\n7,8,9\n", std::string("y"),
                              TaskType::kRegression);
  EXPECT_EQ(ds.m(), 3u);
  EXPECT_EQ(ds.d(), 2u);
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_DOUBLE_EQ(ds.features(2, 1), 8.0);
  EXPECT_DOUBLE_EQ(ds.targets[1], 6.0);
  EXPECT_TRUE(ds.task.is_regression());
}

TEST(LoadCsv, FirstSeenLabelEncoding) {
  const Dataset ds = ParseCsv("x,y\n1,cat\n2,dog\n3,cat\n", std::string("y"),
                              TaskType::kClassification);
  EXPECT_EQ(ds.targets, (std::vector<double>{0, 1, 0}));
  EXPECT_EQ(ds.task.num_classes(), 2);
  EXPECT_EQ(ds.class_labels, (std::vector<std::string>{"cat", "dog"}));
}

TEST(LoadCsv, IntegerLabelsKeepTheirValues) {
  const Dataset ds = ParseCsv("x,y\n1,1\n2,0\n3,2\n", std::string("y"),
                              TaskType::kClassification);
  EXPECT_EQ(ds.targets, (std::vector<double>{1, 0, 2}));
}

TEST(LoadCsv, TargetByIndex) {
  const Dataset ds = ParseCsv("y,a\n1,2\n3,4\n", std::size_t{0}, TaskType::kRegression);
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"a"}));
  EXPECT_DOUBLE_EQ(ds.targets[1], 3.0);
}

TEST(LoadCsv, NanCellNamesRowAndColumn) {
  try {
    ParseCsv("a,b,y\n1,2,3\n4,NaN,6\n", std::string("y"), TaskType::kRegression);
    FAIL() << "expected a data error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("NaN"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'b'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
  }
}

TEST(LoadCsv, MissingTargetNamesColumn) {
  try {
    ParseCsv("a,b\n1,2\n", std::string("label"), TaskType::kRegression);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
    EXPECT_NE(std::string(e.what()).find("label"), std::string::npos);
  }
}

TEST(LoadCsv, RaggedRowIsDataError) {
  EXPECT_THROW(ParseCsv("a,y\n1,2,3\n", std::string("y"), TaskType::kRegression), Error);
}

TEST(LoadCsv, WriteThenLoadIsIdentity) {
  Rng rng(3);
  Dataset ds;
  ds.features = Matrix(25, 3);
  for (auto& v : ds.features.data()) v = rng.normal() * 1e3 / 7.0;
  ds.targets.resize(25);
  for (auto& t : ds.targets) t = rng.uniform() < 0.5 ? 0.0 : 1.0;
  ds.task = TaskKind::Classification(2);
  ds.feature_names = {"p", "q", "r"};
  ds.class_labels = {"0", "1"};
  ds.target_name = "t";
  const auto path = std::filesystem::temp_directory_path() / "xstk_roundtrip.csv";
  WriteCsv(ds, path.string());
  const Dataset back = LoadCsv(path.string(), std::string("t"), TaskType::kClassification);
  EXPECT_EQ(back.features, ds.features);
  EXPECT_EQ(back.targets, ds.targets);
  EXPECT_EQ(back.feature_names, ds.feature_names);
  std::filesystem::remove(path);
}

TEST(KFold, EvenSplit) {
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    const auto f = KFoldSplit(10, 5, seed);
    EXPECT_EQ(f.fold_sizes(), (std::vector<std::size_t>(5, 2)));
  }
}

TEST(KFold, RemainderIsBalanced) {
  auto sizes = KFoldSplit(7, 3, 11).fold_sizes();
  std::sort(sizes.begin(), sizes.end());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{2, 2, 3}));
}

TEST(KFold, Deterministic) {
  EXPECT_EQ(KFoldSplit(50, 4, 5), KFoldSplit(50, 4, 5));
  EXPECT_NE(KFoldSplit(50, 4, 5).fold_of, KFoldSplit(50, 4, 6).fold_of);
}

TEST(KFold, TrainAndTestPartitionRows) {
  const auto f = KFoldSplit(23, 4, 2);
  for (int k = 0; k < 4; ++k) {
    auto tr = f.train_indices(k);
    auto te = f.test_indices(k);
    std::set<std::size_t> all(tr.begin(), tr.end());
    for (auto i : te) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), 23u);
  }
}

// Property: per-class counts differ by at most one between any two folds.
TEST(KFold, StratifiedCountsBalanced) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 20 + rng.below(200);
    const int folds = 2 + static_cast<int>(rng.below(6));
    const int classes = 2 + static_cast<int>(rng.below(3));
    std::vector<int> strata(m);
    for (auto& s : strata) s = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    const auto f = KFoldSplit(m, folds, rng.next_u64(), &strata);
    for (int c = 0; c < classes; ++c) {
      std::vector<int> count(static_cast<std::size_t>(folds), 0);
      for (std::size_t i = 0; i < m; ++i) {
        if (strata[i] == c) ++count[static_cast<std::size_t>(f.fold_of[i])];
      }
      const auto [lo, hi] = std::minmax_element(count.begin(), count.end());
      EXPECT_LE(*hi - *lo, 1);
    }
  }
}

Dataset Balanced(std::size_t m) {
  Dataset ds;
  ds.features = Matrix(m, 1);
  ds.targets.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    ds.features(i, 0) = static_cast<double>(i);
    ds.targets[i] = static_cast<double>(i % 2);
  }
  ds.task = TaskKind::Classification(2);
  ds.feature_names = {"x"};
  ds.class_labels = {"0", "1"};
  return ds;
}

TEST(TrainTestSplit, ExactFraction) {
  const auto [tr, te] = TrainTestSplit(Balanced(100), 0.2, 4, false);
  EXPECT_EQ(tr.m(), 80u);
  EXPECT_EQ(te.m(), 20u);
}

TEST(TrainTestSplit, StratifiedAndPartition) {
  const auto [tr, te] = TrainTestSplit(Balanced(100), 0.2, 4, true);
  int ones = 0;
  for (double t : te.targets) ones += t == 1.0;
  EXPECT_EQ(ones, 10);
  std::set<double> seen;
  for (std::size_t i = 0; i < tr.m(); ++i) seen.insert(tr.features(i, 0));
  for (std::size_t i = 0; i < te.m(); ++i) EXPECT_TRUE(seen.insert(te.features(i, 0)).second);
  EXPECT_EQ(seen.size(), 100u);
}

TEST(Standardizer, UnitColumn) {
  Matrix x(3, 2);
  for (std::size_t i = 0; i < 3; ++i) {
    x(i, 0) = static_cast<double>(i + 1);
    x(i, 1) = 5.0;
  }
  const auto s = Standardizer::Fit(x);
  const Matrix z = s.apply(x);
  double mean = 0.0, var = 0.0;
  for (std::size_t i = 0; i < 3; ++i) mean += z(i, 0) / 3.0;
  for (std::size_t i = 0; i < 3; ++i) var += (z(i, 0) - mean) * (z(i, 0) - mean) / 3.0;
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(var, 1.0, 1e-12);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(z(i, 1), 0.0);
}

TEST(Standardizer, InverseRecoversInputs) {
  Rng rng(8);
  Matrix x(40, 4);
  for (auto& v : x.data()) v = rng.normal() * 30.0 + 7.0;
  const auto s = Standardizer::Fit(x);
  const Matrix back = s.inverse(s.apply(x));
  for (std::size_t i = 0; i < x.data().size(); ++i) {
    EXPECT_NEAR(back.data()[i], x.data()[i], 1e-10);
  }
}

}  // namespace
}  // namespace xstacking
