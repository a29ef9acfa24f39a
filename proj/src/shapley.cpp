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

#include "xstacking/shapley.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace xstacking {

BackgroundSet BackgroundSet::Sample(const Matrix& source, std::size_t size,
                                    std::uint64_t seed) {
  if (source.rows() == 0) ThrowData("background source has no rows");
  if (size == 0) ThrowUsage("background size must be at least 1");
  BackgroundSet bg;
  bg.origin = BackgroundOrigin::kTrainingSample;
  bg.seed = seed;
  if (source.rows() <= size) {
    bg.rows = source;
    return bg;
  }
  std::vector<std::size_t> idx(source.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(size);
  bg.rows = source.select_rows(idx);
  return bg;
}

BackgroundSet BackgroundSet::FromRows(Matrix rows) {
  if (rows.rows() == 0) ThrowData("background has no rows");
  for (double v : rows.data()) {
    if (!std::isfinite(v)) ThrowData("background contains non-finite values");
  }
  BackgroundSet bg;
  bg.rows = std::move(rows);
  bg.origin = BackgroundOrigin::kUserSupplied;
  return bg;
}

std::string EstimatorName(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::kExact:
      return "exact";
    case EstimatorKind::kKernel:
      return "kernel";
    case EstimatorKind::kAuto:
      return "auto";
  }
  return "auto";
}

EstimatorKind ParseEstimator(std::string_view name) {
  const std::string n = Trim(name);
  if (n == "exact") return EstimatorKind::kExact;
  if (n == "kernel") return EstimatorKind::kKernel;
  if (n == "auto") return EstimatorKind::kAuto;
  ThrowUsage("unknown shap estimator '" + n + "' (expected exact|kernel|auto)");
}

double Attribution::efficiency_gap() const {
  double s = base_value;
  for (double p : phi) s += p;
  return std::abs(s - fx);
}

namespace {

void CheckDims(std::span<const double> x, const BackgroundSet& background) {
  if (background.size() == 0) ThrowData("background has no rows");
  if (x.size() != background.dim()) {
    ThrowData("instance has " + std::to_string(x.size()) +
              " features, background has " + std::to_string(background.dim()));
  }
}

// v(S) with S given by per-feature flags; `z` is a scratch row.
double Evaluate(const ScoreFn& f, std::span<const double> x,
                const char* member, const BackgroundSet& background,
                std::vector<double>& z) {
  const std::size_t d = x.size();
  const std::size_t b = background.size();
  // Deviations from the first evaluation are averaged, so a score that does
  // not change across rows comes back exactly.
  double anchor = 0.0;
  double sum = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    const auto row = background.rows.row(r);
    for (std::size_t j = 0; j < d; ++j) z[j] = member[j] ? x[j] : row[j];
    const double v = f(z);
    if (r == 0) anchor = v;
    sum += v - anchor;
  }
  return anchor + sum / static_cast<double>(b);
}

double Binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

double ValueFunction(const ScoreFn& f, std::span<const double> x,
                     const Coalition& subset, const BackgroundSet& background) {
  CheckDims(x, background);
  if (subset.size() != x.size()) {
    ThrowData("coalition size does not match feature count");
  }
  if (std::all_of(subset.begin(), subset.end(), [](char c) { return c != 0; })) {
    return f(x);
  }
  std::vector<double> z(x.size());
  return Evaluate(f, x, subset.data(), background, z);
}

Attribution ExactShapley(const ScoreFn& f, std::span<const double> x,
                         const BackgroundSet& background) {
  CheckDims(x, background);
  const std::size_t d = x.size();
  if (d == 0) ThrowData("cannot explain a zero-dimensional instance");
  if (d > static_cast<std::size_t>(kMaxExactFeatures)) {
    ThrowUsage("exact Shapley supports at most " +
               std::to_string(kMaxExactFeatures) + " features, got " +
               std::to_string(d));
  }
  const std::size_t n_masks = std::size_t{1} << d;
  const std::size_t full = n_masks - 1;

  std::vector<double> v(n_masks);
  std::vector<double> z(d);
  std::vector<char> member(d);
  for (std::size_t mask = 0; mask < full; ++mask) {
    for (std::size_t j = 0; j < d; ++j) member[j] = (mask >> j) & 1U;
    v[mask] = Evaluate(f, x, member.data(), background, z);
  }
  v[full] = f(x);

  // Weight of a coalition of size s not containing j: s!(d-s-1)!/d!.
  std::vector<double> weight(d);
  for (std::size_t s = 0; s < d; ++s) {
    weight[s] = 1.0 / (static_cast<double>(d) *
                       Binomial(static_cast<int>(d) - 1, static_cast<int>(s)));
  }

  Attribution out;
  out.phi.assign(d, 0.0);
  out.base_value = v[0];
  out.fx = v[full];
  out.estimator = EstimatorKind::kExact;
  for (std::size_t j = 0; j < d; ++j) {
    const std::size_t bit = std::size_t{1} << j;
    double acc = 0.0;
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
      if (mask & bit) continue;
      const auto s = static_cast<std::size_t>(std::popcount(mask));
      acc += weight[s] * (v[mask | bit] - v[mask]);
    }
    out.phi[j] = acc;
  }
  return out;
}

double ShapleyKernelWeight(int d, int s) {
  if (s <= 0 || s >= d) {
    throw std::invalid_argument("kernel weight defined for 1 <= s <= d-1");
  }
  return static_cast<double>(d - 1) /
         (Binomial(d, s) * static_cast<double>(s) * static_cast<double>(d - s));
}

Attribution KernelShap(const ScoreFn& f, std::span<const double> x,
                       const BackgroundSet& background,
                       const KernelOptions& options) {
  CheckDims(x, background);
  const std::size_t d = x.size();
  if (d == 0) ThrowData("cannot explain a zero-dimensional instance");
  if (options.n_samples < 2) ThrowUsage("kernel SHAP needs n_samples >= 2");

  std::vector<double> z(d);
  std::vector<char> member(d, 0);
  Attribution out;
  out.estimator = EstimatorKind::kKernel;
  out.base_value = Evaluate(f, x, member.data(), background, z);
  out.fx = f(x);
  const double delta = out.fx - out.base_value;
  out.phi.assign(d, 0.0);
  if (d == 1) {
    out.phi[0] = delta;
    out.n_samples = 0;
    return out;
  }

  // Coalition -> accumulated regression weight.
  std::map<std::vector<char>, double> coalitions;
  const int di = static_cast<int>(d);
  const bool enumerate =
      options.enumerate_when_possible && d < 63 &&
      static_cast<double>(options.n_samples) >= std::ldexp(1.0, di) - 2.0;
  if (enumerate) {
    const std::size_t full = (std::size_t{1} << d) - 1;
    for (std::size_t mask = 1; mask < full; ++mask) {
      std::vector<char> c(d);
      for (std::size_t j = 0; j < d; ++j) c[j] = (mask >> j) & 1U;
      coalitions.emplace(std::move(c),
                         ShapleyKernelWeight(di, std::popcount(mask)));
    }
  } else {
    // Sizes are drawn in proportion to the kernel mass per size,
    // C(d,s) * weight(s) = (d-1) / (s (d-s)); each coalition is paired with
    // its complement and gets unit weight.
    std::vector<double> cdf(d - 1);
    double total = 0.0;
    for (int s = 1; s < di; ++s) {
      total += static_cast<double>(di - 1) / (s * (di - s));
      cdf[static_cast<std::size_t>(s - 1)] = total;
    }
    Rng rng(options.seed);
    std::vector<std::size_t> perm(d);
    const std::size_t pairs = options.n_samples / 2;
    for (std::size_t p = 0; p < pairs; ++p) {
      const double u = rng.uniform() * total;
      const auto s = static_cast<std::size_t>(
          std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()) + 1;
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      for (std::size_t i = 0; i < std::min(s, d - 1); ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(d - i));
        std::swap(perm[i], perm[j]);
      }
      std::vector<char> c(d, 0);
      for (std::size_t i = 0; i < std::min(s, d - 1); ++i) c[perm[i]] = 1;
      std::vector<char> comp(d);
      for (std::size_t j = 0; j < d; ++j) comp[j] = c[j] ? 0 : 1;
      coalitions[std::move(c)] += 1.0;
      coalitions[std::move(comp)] += 1.0;
    }
  }
  out.n_samples = coalitions.size();

  // Eliminate the last feature through the efficiency constraint:
  //   phi_last = delta - sum_{j<last} phi_j
  // so each coalition contributes the row a_j = z_j - z_last with target
  // v(z) - base - z_last * delta.
  const std::size_t p = d - 1;
  Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p),
                                              static_cast<Eigen::Index>(p));
  Eigen::VectorXd atb = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  std::vector<double> a(p);
  for (const auto& [c, w] : coalitions) {
    const double value = Evaluate(f, x, c.data(), background, z);
    const double last = c[d - 1] ? 1.0 : 0.0;
    const double target = value - out.base_value - last * delta;
    for (std::size_t j = 0; j < p; ++j) a[j] = (c[j] ? 1.0 : 0.0) - last;
    for (std::size_t r = 0; r < p; ++r) {
      if (a[r] == 0.0) continue;
      atb(static_cast<Eigen::Index>(r)) += w * a[r] * target;
      for (std::size_t k = 0; k < p; ++k) {
        ata(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) +=
            w * a[r] * a[k];
      }
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ata,
                                                     Eigen::EigenvaluesOnly);
  const double max_ev = eig.eigenvalues().maxCoeff();
  const double min_ev = eig.eigenvalues().minCoeff();
  if (!(max_ev > 0.0) || min_ev <= 1e-10 * max_ev) {
    throw SingularDesignError(
        "kernel SHAP design is singular with " +
        std::to_string(coalitions.size()) +
        " distinct coalitions; increase n_samples");
  }
  Eigen::MatrixXd reg = ata;
  reg.diagonal().array() += 1e-10;
  const Eigen::VectorXd beta = reg.ldlt().solve(atb);
  double rest = delta;
  for (std::size_t j = 0; j < p; ++j) {
    out.phi[j] = beta(static_cast<Eigen::Index>(j));
    rest -= out.phi[j];
  }
  out.phi[d - 1] = rest;
  return out;
}

// ---------------------------------------------------------------------------

EstimatorKind ShapConfig::resolve(std::size_t d) const {
  if (estimator != EstimatorKind::kAuto) return estimator;
  return d <= static_cast<std::size_t>(auto_exact_max_features)
             ? EstimatorKind::kExact
             : EstimatorKind::kKernel;
}

std::size_t ShapConfig::samples_for(std::size_t d) const {
  return n_samples > 0 ? n_samples : 2 * d + 2048;
}

nlohmann::json ShapConfig::to_json() const {
  return {{"estimator", EstimatorName(estimator)},
          {"n_samples", n_samples},
          {"auto_exact_max_features", auto_exact_max_features},
          {"background_size", background_size}};
}

ShapConfig ShapConfig::FromJson(const nlohmann::json& j) {
  ShapConfig c;
  if (j.contains("estimator")) {
    c.estimator = ParseEstimator(j.at("estimator").get<std::string>());
  }
  if (j.contains("n_samples")) c.n_samples = j.at("n_samples").get<std::size_t>();
  if (j.contains("auto_exact_max_features")) {
    c.auto_exact_max_features = j.at("auto_exact_max_features").get<int>();
  }
  if (j.contains("background_size")) {
    c.background_size = j.at("background_size").get<std::size_t>();
  }
  if (c.background_size < 1) ThrowUsage("background_size must be >= 1");
  return c;
}

ScoreFn ExplanationTarget(const Model& model, std::span<const double> x) {
  std::size_t cls = 0;
  if (model.task().is_classification()) {
    cls = model.task().num_classes() == 2
              ? 1
              : static_cast<std::size_t>(model.predict_label(x));
  }
  const std::size_t width = model.n_outputs();
  return [&model, cls, width](std::span<const double> z) {
    thread_local std::vector<double> buf;
    buf.resize(width);
    model.predict_into(z, buf);
    return buf[cls];
  };
}

Attribution Explain(const ScoreFn& f, std::span<const double> x,
                    const BackgroundSet& background, const ShapConfig& config,
                    std::uint64_t seed) {
  if (config.resolve(x.size()) == EstimatorKind::kExact) {
    return ExactShapley(f, x, background);
  }
  KernelOptions opts;
  opts.n_samples = config.samples_for(x.size());
  opts.seed = seed;
  for (int attempt = 0;; ++attempt) {
    try {
      return KernelShap(f, x, background, opts);
    } catch (const SingularDesignError&) {
      if (attempt >= 10) throw;
      opts.n_samples *= 2;
    }
  }
}

Attribution ExplainInstance(const Model& model, std::span<const double> x,
                            const BackgroundSet& background,
                            const ShapConfig& config, std::uint64_t seed) {
  if (x.size() != model.n_features()) {
    ThrowData("instance has " + std::to_string(x.size()) +
              " features, model expects " + std::to_string(model.n_features()));
  }
  return Explain(ExplanationTarget(model, x), x, background, config, seed);
}

Matrix ExplainDataset(const Model& model, const Matrix& features,
                      const BackgroundSet& background,
                      const ShapConfig& config, std::uint64_t seed,
                      std::vector<Attribution>* details) {
  if (features.cols() != model.n_features()) {
    ThrowData("dataset has " + std::to_string(features.cols()) +
              " features, model expects " + std::to_string(model.n_features()));
  }
  Matrix out(features.rows(), features.cols());
  if (details) details->assign(features.rows(), Attribution{});
  ParallelFor(features.rows(), [&](std::size_t i) {
    Attribution a = ExplainInstance(model, features.row(i), background, config,
                                     DeriveSeed(seed, {i}));
    std::copy(a.phi.begin(), a.phi.end(), out.row(i).begin());
    if (details) (*details)[i] = std::move(a);
  });
  return out;
}

}  // namespace xstacking
