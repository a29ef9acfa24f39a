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

// Metrics, the Wilcoxon signed-rank test and the stacking-vs-XStacking
// benchmark harness.

#ifndef XSTACKING_EVAL_HPP_
#define XSTACKING_EVAL_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xstacking/dataset.hpp"
#include "xstacking/ensemble.hpp"

namespace xstacking {

double Accuracy(std::span<const int> pred, std::span<const int> truth);
double Mse(std::span<const double> pred, std::span<const double> truth);

/// Raised when every paired difference is zero.
class NoDifferencesError : public Error {
 public:
  explicit NoDifferencesError(const std::string& msg)
      : Error(ErrorKind::kData, msg) {}
};

struct WilcoxonResult {
  double statistic = 0.0;  // W = min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  double p_two_sided = 1.0;
  std::size_t n_effective = 0;
  bool exact = true;
  /// Average ranks of |d| over the nonzero differences, in input order.
  std::vector<double> ranks;
};

inline constexpr std::size_t kWilcoxonExactMaxN = 20;

WilcoxonResult WilcoxonSignedRank(std::span<const double> a,
                                  std::span<const double> b);
/// Same test on precomputed differences a - b.
WilcoxonResult WilcoxonSignedRank(std::span<const double> differences);

/// Two-sided p-values for W = min(W+, W-) given the ranks of the nonzero
/// differences. Exact: P(min(W+, W-) <= W) over all 2^n sign patterns.
double WilcoxonExactP(std::span<const double> ranks, double statistic);
double WilcoxonNormalP(std::span<const double> ranks, double statistic);

// ---------------------------------------------------------------------------
// Benchmark

struct BenchmarkDataset {
  std::string name;
  std::string path;  // resolved against the config file directory
  std::string target;
  TaskType task = TaskType::kClassification;
};

struct BenchmarkConfig {
  std::vector<BenchmarkDataset> datasets;
  std::vector<MetaMode> methods{MetaMode::kPrediction, MetaMode::kAttribution};
  /// Empty means the task defaults.
  std::vector<LearnerSpec> base_specs;
  std::vector<LearnerSpec> meta_specs;
  /// Inner folds for the out-of-fold meta-features.
  int n_folds = 5;
  /// Outer cross-validation folds for held-out metrics.
  int eval_folds = 5;
  std::vector<std::uint64_t> seeds{42};
  ShapConfig shap;
  bool naive = false;
  bool standardize_inputs = true;
  bool standardize_meta = true;

  nlohmann::json to_json() const;
  /// Relative dataset paths are resolved against base_dir.
  static BenchmarkConfig FromJson(const nlohmann::json& j,
                                  const std::string& base_dir = "");
  static BenchmarkConfig Load(const std::string& path);
};

struct MethodResult {
  MetaMode method = MetaMode::kPrediction;
  LearnerSpec meta_spec;
  std::string metric;  // accuracy | mse
  /// One value per seed: the metric averaged over outer folds.
  std::vector<double> values;
  PhaseTimings timings;
  double predict_seconds = 0.0;
  std::size_t meta_width = 0;
  /// Digest of the outer fold assignment of each seed.
  std::vector<std::string> fold_digests;

  std::string id() const;  // method + "/" + resolved meta spec
  double mean() const;
  double stddev() const;
  double total_seconds() const { return timings.total() + predict_seconds; }
};

struct Comparison {
  std::string meta;  // resolved meta-learner spec
  /// Per-seed xstacking - stacking.
  std::vector<double> deltas;
  /// Seeds where xstacking is at least as good as stacking.
  std::size_t xstacking_not_worse = 0;
  double overhead_ratio = 0.0;
};

struct DatasetResult {
  std::string name;
  std::string path;
  std::optional<std::string> error;
  std::size_t rows = 0;
  std::size_t features = 0;
  std::string task;
  /// Per seed: digest of the outer fold assignment shared by all methods.
  std::vector<std::string> fold_digests;
  std::vector<MethodResult> methods;
  std::vector<Comparison> comparisons;
  double base_fit_seconds = 0.0;

  const MethodResult* find(MetaMode mode, const std::string& meta) const;
};

struct AcrossDatasetTest {
  std::string meta;
  std::string metric;
  std::vector<std::string> datasets;
  std::optional<WilcoxonResult> result;
  std::string note;
};

struct ExperimentReport {
  BenchmarkConfig config;
  std::vector<DatasetResult> datasets;
  std::vector<AcrossDatasetTest> tests;
  bool partial = false;

  /// Timing fields live under "timings" keys only.
  nlohmann::json to_json(bool include_timings = true) const;
  std::string summary_csv() const;
  /// Human-readable table.
  std::string summary_table() const;
};

inline constexpr std::size_t kMinDatasetsForWilcoxon = 6;

ExperimentReport RunBenchmark(const BenchmarkConfig& config);

// ---------------------------------------------------------------------------
// Synthetic suite

/// Binary classification data labelled by the sign of a noisy sum of an
/// axis-aligned block term, a linear trend and a smooth nonlinearity over
/// disjoint feature groups, plus features the label ignores. variant in
/// [0, 6) changes the group sizes.
Dataset MakeSyntheticDataset(int variant, std::size_t m, std::uint64_t seed);
inline constexpr int kSyntheticVariants = 6;

}  // namespace xstacking

#endif  // XSTACKING_EVAL_HPP_
