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

// Exercises the shared library through its C header only.

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "xstacking/xstacking.h"

namespace {

namespace fs = std::filesystem;

const std::string kDemo = std::string(XSTK_DATA_DIR) + "/demo.csv";

TEST(CApi, NullArgumentsAreUsageErrors) {
  EXPECT_EQ(xstk_train(nullptr, nullptr, nullptr), XSTK_USAGE);
  EXPECT_NE(std::strlen(xstk_last_error()), 0u);
  EXPECT_EQ(xstk_dataset_load_csv(nullptr, "y", 0, "classification", nullptr), XSTK_USAGE);
  EXPECT_EQ(xstk_ensemble_meta_width(nullptr), 0u);
}

TEST(CApi, LoadErrorsAreDataErrors) {
  xstk_dataset* ds = nullptr;
  EXPECT_EQ(xstk_dataset_load_csv("/nonexistent.csv", "y", 0, "classification", &ds), XSTK_DATA);
  EXPECT_EQ(ds, nullptr);
  EXPECT_EQ(xstk_dataset_load_csv(kDemo.c_str(), "nope", 0, "classification", &ds), XSTK_DATA);
  EXPECT_NE(std::string(xstk_last_error()).find("nope"), std::string::npos);
  EXPECT_EQ(xstk_dataset_load_csv(kDemo.c_str(), "churn", 0, "sideways", &ds), XSTK_USAGE);
  xstk_ensemble* e = nullptr;
  EXPECT_EQ(xstk_ensemble_load("/nonexistent_model_dir", &e), XSTK_DATA);
}

TEST(CApi, TrainPredictSaveLoad) {
  xstk_dataset* ds = nullptr;
  ASSERT_EQ(xstk_dataset_load_csv(kDemo.c_str(), "churn", 0, "classification", &ds), XSTK_OK)
      << xstk_last_error();
  EXPECT_EQ(xstk_dataset_cols(ds), 4u);
  xstk_ensemble* e = nullptr;
  ASSERT_EQ(xstk_train(ds, R"({"folds": 3, "background_size": 20,
                               "base": ["tree", "logistic", "mlp:epochs=20"]})", &e),
            XSTK_OK)
      << xstk_last_error();
  EXPECT_EQ(xstk_ensemble_meta_width(e), 12u);

  char* summary = nullptr;
  ASSERT_EQ(xstk_ensemble_summary_json(e, 0, &summary), XSTK_OK);
  EXPECT_NE(std::string(summary).find("\"meta_width\": 12"), std::string::npos);
  EXPECT_EQ(std::string(summary).find("seconds"), std::string::npos);
  xstk_string_free(summary);

  const std::vector<double> x = {0.1, -0.2, 0.3, 0.0, -0.5, 0.5, -0.1, 0.9};
  std::vector<double> p1(2), p2(2);
  ASSERT_EQ(xstk_predict(e, x.data(), 2, 4, p1.data()), XSTK_OK);
  EXPECT_EQ(xstk_predict(e, x.data(), 2, 3, p1.data()), XSTK_DATA);

  const fs::path dir = fs::temp_directory_path() / "xstk_capi_model";
  fs::remove_all(dir);
  ASSERT_EQ(xstk_ensemble_save(e, dir.string().c_str()), XSTK_OK) << xstk_last_error();
  xstk_ensemble* back = nullptr;
  ASSERT_EQ(xstk_ensemble_load(dir.string().c_str(), &back), XSTK_OK) << xstk_last_error();
  ASSERT_EQ(xstk_predict(back, x.data(), 2, 4, p2.data()), XSTK_OK);
  EXPECT_EQ(p1, p2);

  double gap = -1.0;
  const fs::path out = fs::temp_directory_path() / "xstk_capi_explain";
  ASSERT_EQ(xstk_explain_csv(back, kDemo.c_str(), out.string().c_str(), &gap), XSTK_OK)
      << xstk_last_error();
  EXPECT_GE(gap, 0.0);
  EXPECT_LE(gap, 1e-6);
  EXPECT_TRUE(fs::exists(out / "stage1.csv"));
  EXPECT_TRUE(fs::exists(out / "explanation.json"));

  xstk_ensemble_free(back);
  xstk_ensemble_free(e);
  xstk_dataset_free(ds);
  fs::remove_all(dir);
  fs::remove_all(out);
}

TEST(CApi, BadConfigJson) {
  xstk_dataset* ds = nullptr;
  ASSERT_EQ(xstk_dataset_load_csv(kDemo.c_str(), "churn", 0, "classification", &ds), XSTK_OK);
  xstk_ensemble* e = nullptr;
  EXPECT_EQ(xstk_train(ds, "{not json", &e), XSTK_USAGE);
  EXPECT_EQ(xstk_train(ds, R"({"base": ["linear_regression"]})", &e), XSTK_USAGE);
  EXPECT_EQ(e, nullptr);
  xstk_dataset_free(ds);
}

TEST(CApi, TargetByIndex) {
  xstk_dataset* ds = nullptr;
  ASSERT_EQ(xstk_dataset_load_csv(kDemo.c_str(), "4", 1, "classification", &ds), XSTK_OK);
  EXPECT_EQ(xstk_dataset_cols(ds), 4u);
  EXPECT_EQ(xstk_dataset_rows(ds), 300u);
  xstk_dataset_free(ds);
  EXPECT_EQ(xstk_dataset_load_csv(kDemo.c_str(), "-1", 1, "classification", &ds), XSTK_USAGE);
}

}  // namespace
