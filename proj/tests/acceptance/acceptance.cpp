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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "xstacking/ensemble.hpp"
#include "xstacking/eval.hpp"

namespace xstacking {
namespace {

const std::string kData = XSTK_DATA_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
};

char buf[512];

template <typename... Args>
std::string Fmt(const char* fmt, Args... args) {
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

Dataset RandomData(std::size_t m, std::size_t d, bool classification, Rng& rng) {
  Dataset ds;
  ds.features = Matrix(m, d);
  ds.targets.resize(m);
  std::vector<double> w(d);
  for (auto& v : w) v = rng.normal();
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      ds.features(i, j) = rng.normal();
      s += w[j] * ds.features(i, j);
    }
    s += std::sin(2.0 * ds.features(i, 0)) + 0.3 * rng.normal();
    ds.targets[i] = classification ? (s > 0 ? 1.0 : 0.0) : s;
  }
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  ds.task = classification ? TaskKind::Classification(2) : TaskKind::Regression();
  if (classification) ds.class_labels = {"0", "1"};
  return ds;
}

// A fitted model from a random family on random data.
ModelPtr RandomModel(std::size_t d, Rng& rng, std::uint64_t seed) {
  static const char* kSpecs[] = {"decision_tree:max_depth=6", "mlp:hidden_units=8,epochs=20",
                                 "gbt:n_rounds=20", "logistic_regression:epochs=100",
                                 "linear_svm:epochs=20"};
  const LearnerSpec spec = LearnerSpec::Parse(kSpecs[seed % 5]);
  const bool cls = rng.uniform() < 0.7 || spec.family == Family::kLogisticRegression ||
                   spec.family == Family::kLinearSvm;
  return Fit(LearnerSpec(spec.family, spec.hyperparameters, seed), RandomData(80, d, cls, rng));
}

Matrix RandomRows(std::size_t m, std::size_t d, Rng& rng) {
  Matrix x(m, d);
  for (auto& v : x.data()) v = rng.normal();
  return x;
}

// 1. Exact Shapley: efficiency and the linear closed form.
Outcome ShapleyExactness() {
  Rng rng(101);
  double max_gap = 0.0, max_closed = 0.0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    const std::size_t d = 1 + rng.below(8);
    const ModelPtr model = RandomModel(d, rng, t);
    const auto bg = BackgroundSet::FromRows(RandomRows(10, d, rng));
    for (int i = 0; i < 5; ++i) {
      const Matrix x = RandomRows(1, d, rng);
      const auto a = ExactShapley(ExplanationTarget(*model, x.row(0)), x.row(0), bg);
      max_gap = std::max(max_gap, a.efficiency_gap());
    }
  }
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 1 + rng.below(8);
    std::vector<double> w(d);
    for (auto& v : w) v = 3.0 * rng.normal();
    const double c = rng.normal();
    const ScoreFn f = [&](std::span<const double> v) {
      return std::inner_product(w.begin(), w.end(), v.begin(), c);
    };
    const Matrix bg = RandomRows(1 + rng.below(20), d, rng);
    const Matrix x = RandomRows(1, d, rng);
    const auto a = ExactShapley(f, x.row(0), BackgroundSet::FromRows(bg));
    max_gap = std::max(max_gap, a.efficiency_gap());
    for (std::size_t j = 0; j < d; ++j) {
      const auto col = bg.column(j);
      const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
      max_closed = std::max(max_closed, std::abs(a.phi[j] - w[j] * (x(0, j) - mean)));
    }
  }
  return {max_gap <= 1e-6 && max_closed <= 1e-8,
          Fmt("50 fitted + 50 linear models, max efficiency gap %.1e, max closed-form error %.1e",
              max_gap, max_closed)};
}

// 2. Kernel estimation against exact values.
Outcome KernelVsExact() {
  const ScoreFn lin = [](std::span<const double> v) { return 2.0 * v[0] - v[1] + 1.0; };
  const std::vector<double> x0 = {1.0, 3.0};
  const auto worked = KernelShap(lin, x0, BackgroundSet::FromRows(Matrix(1, 2)), {});
  const double worked_err = std::max(std::abs(worked.phi[0] - 2.0), std::abs(worked.phi[1] + 3.0));

  Rng rng(202);
  double enum_err = 0.0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    const std::size_t d = 2 + rng.below(9);
    const ModelPtr model = RandomModel(d, rng, t);
    const auto bg = BackgroundSet::FromRows(RandomRows(8, d, rng));
    const Matrix x = RandomRows(1, d, rng);
    const ScoreFn f = ExplanationTarget(*model, x.row(0));
    const auto exact = ExactShapley(f, x.row(0), bg);
    KernelOptions opt;
    opt.n_samples = std::size_t{1} << d;
    const auto k = KernelShap(f, x.row(0), bg, opt);
    for (std::size_t j = 0; j < d; ++j) enum_err = std::max(enum_err, std::abs(k.phi[j] - exact.phi[j]));
  }

  int close = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const std::size_t d = 2 + rng.below(9);
    const ModelPtr model = RandomModel(d, rng, 1000 + t);
    const auto bg = BackgroundSet::FromRows(RandomRows(8, d, rng));
    const Matrix x = RandomRows(1, d, rng);
    const ScoreFn f = ExplanationTarget(*model, x.row(0));
    const auto exact = ExactShapley(f, x.row(0), bg);
    KernelOptions opt;
    opt.n_samples = 200 * d;
    opt.seed = t;
    opt.enumerate_when_possible = false;
    const auto k = KernelShap(f, x.row(0), bg, opt);
    double dev = 0.0;
    for (std::size_t j = 0; j < d; ++j) dev = std::max(dev, std::abs(k.phi[j] - exact.phi[j]));
    close += dev <= 5e-2;
  }
  return {worked_err <= 1e-6 && enum_err <= 1e-6 && close >= 95,
          Fmt("worked example error %.1e, enumeration max error %.1e over 20 models, "
              "sampling within 5e-2 on %d/100",
              worked_err, enum_err, close)};
}

// 3. Meta-feature width on the shipped demo.
Outcome MetaWidth() {
  const Dataset ds = LoadCsv(kData + "/demo.csv", std::string("churn"), TaskType::kClassification);
  EnsembleConfig c;
  c.base_specs = DefaultBaseSpecs(ds.task);
  c.meta_spec = DefaultMetaSpec(ds.task);
  const Ensemble e = Train(ds, c);
  const bool ok = ds.d() == 4 && e.n_learners() == 3 && e.meta_width() == 12 &&
                  e.training_meta.width() == 12 && e.summary.meta_width == 12;
  return {ok, Fmt("K=%zu, d=%zu, meta width %zu", e.n_learners(), ds.d(), e.meta_width())};
}

// 4. Synthetic suite: XStacking against stacking with a linear SVM meta.
Outcome SyntheticSuite() {
  const auto report = RunBenchmark(BenchmarkConfig::Load(kData + "/benchmark_synthetic.json"));
  bool ok = !report.partial && report.datasets.size() >= 6;
  std::string wins;
  for (const auto& d : report.datasets) {
    if (d.comparisons.empty()) {
      ok = false;
      continue;
    }
    const auto& c = d.comparisons.front();
    ok = ok && c.deltas.size() == 10 && c.xstacking_not_worse >= 8;
    wins += (wins.empty() ? "" : " ") + std::to_string(c.xstacking_not_worse);
  }
  bool exact = false;
  double p = 1.0;
  for (const auto& t : report.tests) {
    if (t.result) {
      exact = t.result->exact;
      p = t.result->p_two_sided;
    }
  }
  ok = ok && exact;
  return {ok, Fmt("seeds with xstacking >= stacking per dataset: %s of 10; wilcoxon %s, p=%.4g",
                  wins.c_str(), exact ? "exact" : "not exact", p)};
}

// 5. Wilcoxon exact path against brute-force enumeration.
Outcome WilcoxonOracle() {
  Rng rng(505);
  double max_err = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> diffs(n);
    for (auto& v : diffs) v = t % 2 ? rng.normal() : static_cast<double>(static_cast<int>(rng.below(7)) - 3);
    if (std::all_of(diffs.begin(), diffs.end(), [](double v) { return v == 0.0; })) diffs[0] = 2.0;
    const auto r = WilcoxonSignedRank(diffs);
    // Brute force over 2^n sign patterns of the library's ranks.
    const std::size_t k = r.ranks.size();
    const double total = std::accumulate(r.ranks.begin(), r.ranks.end(), 0.0);
    double hits = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        if (mask >> i & 1U) s += r.ranks[i];
      }
      hits += std::min(s, total - s) <= r.statistic + 1e-9;
    }
    max_err = std::max(max_err, std::abs(hits / std::ldexp(1.0, static_cast<int>(k)) - r.p_two_sided));
    if (!r.exact) max_err = 1.0;
  }
  const auto ex = WilcoxonSignedRank(std::vector<double>{1, 2, 3, -1, 4});
  const bool example = ex.ranks == std::vector<double>{1.5, 3, 4, 1.5, 5} && ex.statistic == 1.5;
  return {max_err <= 1e-12 && example,
          Fmt("200 inputs n<=12, max p error %.1e; example ranks %s, W=%g", max_err,
              example ? "match" : "differ", ex.statistic)};
}

// 6. Report timings and overhead ratio under kernel estimation.
Outcome OverheadReport() {
  const auto report = RunBenchmark(BenchmarkConfig::Load(kData + "/benchmark_kernel.json"));
  const auto j = report.to_json(true);
  bool ok = !report.partial;
  double ratio = 0.0, expl = 0.0, meta = 0.0;
  for (const auto& d : report.datasets) {
    for (const auto& c : d.comparisons) {
      ratio = c.overhead_ratio;
      ok = ok && std::isfinite(c.overhead_ratio) && c.overhead_ratio > 0.0;
      const MethodResult* xs = d.find(MetaMode::kAttribution, c.meta);
      ok = ok && xs != nullptr && xs->timings.explanation_seconds > xs->timings.meta_fit_seconds;
      if (xs) {
        expl = xs->timings.explanation_seconds;
        meta = xs->timings.meta_fit_seconds;
      }
    }
  }
  const auto& t = j["datasets"][0]["methods"][0]["timings"];
  ok = ok && t.contains("base_fit_seconds") && t.contains("explanation_seconds") &&
       t.contains("meta_fit_seconds") && t.contains("predict_seconds") &&
       j["datasets"][0]["comparisons"][0]["timings"].contains("overhead_ratio");
  return {ok, Fmt("overhead ratio %.2f, explanation %.3f s vs meta fit %.4f s (last dataset)",
                  ratio, expl, meta)};
}

// 7. Two-stage explanation of 100 rows.
Outcome TwoStageExplain() {
  const Dataset ds = LoadCsv(kData + "/demo.csv", std::string("churn"), TaskType::kClassification);
  EnsembleConfig c;
  c.base_specs = DefaultBaseSpecs(ds.task);
  c.meta_spec = DefaultMetaSpec(ds.task);
  const Ensemble e = Train(ds, c);
  const std::size_t k_d = e.n_learners() * ds.d();
  std::set<std::string> headers;
  bool ok = e.provenance.size() == k_d;
  for (const auto& p : e.provenance) {
    headers.insert(p.column_name());
    ok = ok && p.is_attribution && !p.feature.empty() &&
         p.column_name() == "b" + std::to_string(p.learner) + "_" + p.learner_name + ":" + p.feature;
  }
  ok = ok && headers.size() == k_d;
  double max_gap = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    const auto z = e.meta_features(ds.features.row(i));
    ok = ok && z.size() == k_d;
    const auto a = Explain(e.meta_explanation_target(z), z, e.meta_background, e.config.shap, i);
    ok = ok && a.phi.size() == k_d;
    max_gap = std::max(max_gap, a.efficiency_gap());
  }
  ok = ok && max_gap <= 1e-6;
  return {ok, Fmt("stage 1 width %zu with unique provenance headers, stage 2 max efficiency gap "
                  "%.1e over 100 rows",
                  k_d, max_gap)};
}

// 8. Reports do not depend on the thread count.
Outcome Determinism() {
  const auto config = BenchmarkConfig::Load(kData + "/benchmark_small.json");
  SetNumThreads(1);
  const std::string a = RunBenchmark(config).to_json(false).dump(2);
  SetNumThreads(8);
  const std::string b = RunBenchmark(config).to_json(false).dump(2);
  SetNumThreads(0);
  return {a == b && a.find("seconds") == std::string::npos,
          Fmt("report without timings: %zu bytes, identical at 1 and 8 threads: %s", a.size(),
              a == b ? "yes" : "no")};
}

// 9. MLP gradients and boosted-tree training loss.
Outcome LearnerChecks() {
  Rng rng(909);
  double worst = 0.0;
  for (int t = 0; t < 30; ++t) {
    const int d = 1 + static_cast<int>(rng.below(5));
    const int h = 1 + static_cast<int>(rng.below(16));
    const bool ce = t % 2 == 0;
    MlpNetwork net({d, h, ce ? 3 : 1});
    net.initialize(rng);
    for (auto& p : net.params()) p += 0.1 * rng.normal();
    const Matrix x = RandomRows(6, static_cast<std::size_t>(d), rng);
    std::vector<double> y(6);
    for (auto& v : y) v = ce ? static_cast<double>(rng.below(3)) : rng.normal();
    std::vector<std::size_t> rows(6);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const MlpLoss loss = ce ? MlpLoss::kSoftmaxCrossEntropy : MlpLoss::kSquared;
    std::vector<double> g(net.n_params());
    net.loss_and_gradient(x, y, rows, loss, g);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double saved = net.params()[k];
      net.params()[k] = saved + 1e-5;
      const double up = net.loss(x, y, rows, loss);
      net.params()[k] = saved - 1e-5;
      const double down = net.loss(x, y, rows, loss);
      net.params()[k] = saved;
      const double fd = (up - down) / 2e-5;
      worst = std::max(worst, std::abs(fd - g[k]) / std::max({std::abs(fd), std::abs(g[k]), 1e-6}));
    }
  }
  bool monotone = true;
  for (std::uint64_t t = 0; t < 6; ++t) {
    const Dataset ds = RandomData(150, 4, t % 2 == 0, rng);
    const auto model = Fit(LearnerSpec::Parse("gbt:n_rounds=50,learning_rate=0.3"), ds);
    const auto& h = dynamic_cast<const BoostedTreesModel&>(*model).loss_history();
    for (std::size_t r = 1; r < h.size(); ++r) monotone = monotone && h[r] <= h[r - 1];
  }
  return {worst <= 1e-4 && monotone,
          Fmt("30 networks, max relative gradient error %.1e; boosted loss non-increasing: %s",
              worst, monotone ? "yes" : "no")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace xstacking

int main(int argc, char** argv) {
  using namespace xstacking;
  const std::vector<Criterion> criteria = {
      {1, "shapley exactness", 30, ShapleyExactness},
      {2, "kernel vs exact", 120, KernelVsExact},
      {3, "meta width", 60, MetaWidth},
      {4, "synthetic suite", 600, SyntheticSuite},
      {5, "wilcoxon oracle", 10, WilcoxonOracle},
      {6, "overhead report", 120, OverheadReport},
      {7, "two-stage explain", 60, TwoStageExplain},
      {8, "thread determinism", 300, Determinism},
      {9, "learner gradients", 60, LearnerChecks},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("%s %d %s: %s [%.1f s of %.0f s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_seconds);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
