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

// Shapley attributions for arbitrary score functions.
//
// The value of a coalition S is interventional: the mean score over the
// background rows with the features in S replaced by the explained
// instance's values,
//
//   v(S) = 1/b * sum_r f(z_r),   z_r[j] = x[j] if j in S else r[j].
//
// Two estimators are provided: exact subset enumeration, and the
// kernel-weighted least squares estimator over sampled coalitions with the
// empty and full coalitions imposed as constraints.

#ifndef XSTACKING_SHAPLEY_HPP_
#define XSTACKING_SHAPLEY_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xstacking/common.hpp"
#include "xstacking/learners.hpp"

namespace xstacking {

using ScoreFn = std::function<double(std::span<const double>)>;

enum class BackgroundOrigin { kTrainingSample, kUserSupplied };

struct BackgroundSet {
  Matrix rows;
  BackgroundOrigin origin = BackgroundOrigin::kUserSupplied;
  std::uint64_t seed = 0;

  /// Up to `size` rows drawn uniformly without replacement (all rows, in
  /// order, when the source is not larger).
  static BackgroundSet Sample(const Matrix& source, std::size_t size,
                              std::uint64_t seed);
  static BackgroundSet FromRows(Matrix rows);

  std::size_t size() const noexcept { return rows.rows(); }
  std::size_t dim() const noexcept { return rows.cols(); }
};

enum class EstimatorKind { kExact, kKernel, kAuto };

std::string EstimatorName(EstimatorKind e);
EstimatorKind ParseEstimator(std::string_view name);

struct Attribution {
  std::vector<double> phi;
  double base_value = 0.0;
  double fx = 0.0;
  EstimatorKind estimator = EstimatorKind::kExact;
  /// Coalitions used by the kernel estimator (0 for exact).
  std::size_t n_samples = 0;

  /// |base_value + sum(phi) - fx|
  double efficiency_gap() const;
};

/// Raised when sampled coalitions do not determine the attribution; retry
/// with more samples.
class SingularDesignError : public Error {
 public:
  explicit SingularDesignError(const std::string& msg)
      : Error(ErrorKind::kTraining, msg) {}
};

/// Feature membership flags, one per feature.
using Coalition = std::vector<char>;

double ValueFunction(const ScoreFn& f, std::span<const double> x,
                     const Coalition& subset, const BackgroundSet& background);

inline constexpr int kMaxExactFeatures = 20;

/// Exact Shapley values by enumeration of all 2^d coalitions. d <= 20.
Attribution ExactShapley(const ScoreFn& f, std::span<const double> x,
                         const BackgroundSet& background);

/// Shapley kernel weight (d-1) / (C(d,s) * s * (d-s)) for 1 <= s <= d-1.
double ShapleyKernelWeight(int d, int s);

struct KernelOptions {
  std::size_t n_samples = 2048;
  std::uint64_t seed = 0;
  /// Enumerate every proper coalition at its kernel weight when the budget
  /// covers all 2^d - 2 of them. Disable to force the sampling path.
  bool enumerate_when_possible = true;
};

Attribution KernelShap(const ScoreFn& f, std::span<const double> x,
                       const BackgroundSet& background,
                       const KernelOptions& options);

struct ShapConfig {
  EstimatorKind estimator = EstimatorKind::kAuto;
  /// Kernel coalition budget; 0 means 2 * d + 2048.
  std::size_t n_samples = 0;
  /// Auto picks Exact when d <= auto_exact_max_features.
  int auto_exact_max_features = 12;
  std::size_t background_size = 100;

  EstimatorKind resolve(std::size_t d) const;
  std::size_t samples_for(std::size_t d) const;

  nlohmann::json to_json() const;
  static ShapConfig FromJson(const nlohmann::json& j);
};

/// Score the attribution explains for one instance: the regression value,
/// the class-1 probability for binary tasks, or the probability of the class
/// the model predicts at x for multiclass tasks.
ScoreFn ExplanationTarget(const Model& model, std::span<const double> x);

/// Single-instance attribution with the configured estimator. Kernel
/// estimation retries with a doubled budget on a singular design.
Attribution Explain(const ScoreFn& f, std::span<const double> x,
                    const BackgroundSet& background, const ShapConfig& config,
                    std::uint64_t seed);
Attribution ExplainInstance(const Model& model, std::span<const double> x,
                            const BackgroundSet& background,
                            const ShapConfig& config, std::uint64_t seed);

/// Row i holds the attribution of features.row(i). Instance i uses the seed
/// DeriveSeed(seed, {i}), so the result does not depend on thread count.
Matrix ExplainDataset(const Model& model, const Matrix& features,
                      const BackgroundSet& background,
                      const ShapConfig& config, std::uint64_t seed,
                      std::vector<Attribution>* details = nullptr);

}  // namespace xstacking

#endif  // XSTACKING_SHAPLEY_HPP_
