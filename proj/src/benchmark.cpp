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

// Paired benchmark: for every dataset, seed and outer fold the base stage
// (input standardization, inner folds, fold models, full-data models) is
// built once and shared by every method and meta-learner.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "xstacking/eval.hpp"

namespace xstacking {

namespace {

constexpr std::uint64_t kSeedOuterFolds = 101;
constexpr std::uint64_t kSeedOuterStage = 102;

double SecondsSince(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

std::string MethodName(MetaMode m) {
  return m == MetaMode::kAttribution ? "xstacking" : "stacking";
}

std::string FoldDigest(const FoldAssignment& f) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  auto mix = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xFF;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<std::uint64_t>(f.n_folds));
  for (int v : f.fold_of) mix(static_cast<std::uint64_t>(v));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool LowerIsBetter(const std::string& metric) { return metric == "mse"; }

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct Slot {
  MetaMode mode;
  std::size_t meta;
};

DatasetResult RunDataset(const BenchmarkConfig& config,
                         const BenchmarkDataset& spec) {
  DatasetResult res;
  res.name = spec.name;
  res.path = spec.path;
  Dataset data;
  try {
    data = LoadCsv(spec.path, spec.target, spec.task);
  } catch (const Error& e) {
    res.error = e.what();
    return res;
  }
  res.rows = data.m();
  res.features = data.d();
  res.task = data.task.to_string();
  const bool classification = data.task.is_classification();
  const std::string metric = classification ? "accuracy" : "mse";

  std::vector<LearnerSpec> base_specs =
      config.base_specs.empty() ? DefaultBaseSpecs(data.task) : config.base_specs;
  std::vector<LearnerSpec> meta_specs =
      config.meta_specs.empty() ? std::vector<LearnerSpec>{DefaultMetaSpec(data.task)}
                                : config.meta_specs;

  std::vector<Slot> slots;
  for (MetaMode mode : config.methods) {
    for (std::size_t j = 0; j < meta_specs.size(); ++j) slots.push_back({mode, j});
  }
  res.methods.resize(slots.size());
  for (std::size_t s = 0; s < slots.size(); ++s) {
    res.methods[s].method = slots[s].mode;
    res.methods[s].meta_spec = meta_specs[slots[s].meta].resolved();
    res.methods[s].metric = metric;
  }

  try {
    for (std::uint64_t seed : config.seeds) {
      std::vector<int> strata;
      if (classification) strata = data.labels();
      const FoldAssignment outer =
          KFoldSplit(data.m(), config.eval_folds,
                     DeriveSeed(seed, {kSeedOuterFolds}),
                     classification ? &strata : nullptr);
      const std::string digest = FoldDigest(outer);
      res.fold_digests.push_back(digest);

      std::vector<double> fold_metric_sum(slots.size(), 0.0);
      for (int f = 0; f < outer.n_folds; ++f) {
        const auto train_rows = outer.train_indices(f);
        const auto test_rows = outer.test_indices(f);
        const Dataset train = data.subset(train_rows);
        const Dataset test = data.subset(test_rows);

        EnsembleConfig ec;
        ec.base_specs = base_specs;
        ec.meta_spec = meta_specs.front();
        ec.n_folds = config.n_folds;
        ec.seed = DeriveSeed(seed, {kSeedOuterStage, static_cast<std::uint64_t>(f)});
        ec.shap = config.shap;
        ec.naive = config.naive;
        ec.standardize_inputs = config.standardize_inputs;
        ec.standardize_meta = config.standardize_meta;
        const BaseStage base = FitBaseStage(train, ec);
        res.base_fit_seconds += base.fit_seconds;

        for (MetaMode mode : config.methods) {
          ec.mode = mode;
          double build_seconds = 0.0;
          const MetaDataset meta = BuildMetaFeatures(base, mode, ec, &build_seconds);
          Matrix test_meta;
          double test_meta_seconds = 0.0;
          for (std::size_t s = 0; s < slots.size(); ++s) {
            if (slots[s].mode != mode) continue;
            MethodResult& mr = res.methods[s];
            const Ensemble ens =
                AssembleEnsemble(train, base, meta, meta_specs[slots[s].meta], ec);
            // Test meta-features depend only on the base stage and mode, so
            // they are computed once and charged to every meta-learner.
            if (test_meta.empty()) {
              const auto mstart = std::chrono::steady_clock::now();
              test_meta = ens.meta_features(test.features);
              test_meta_seconds = SecondsSince(mstart);
            }
            const auto pstart = std::chrono::steady_clock::now();
            std::vector<double> pred(test.m());
            for (std::size_t i = 0; i < test.m(); ++i) {
              pred[i] = ens.predict_meta(test_meta.row(i));
            }
            const double predict_seconds = SecondsSince(pstart);
            double value;
            if (classification) {
              std::vector<int> labels(pred.size());
              for (std::size_t i = 0; i < pred.size(); ++i) {
                labels[i] = static_cast<int>(pred[i]);
              }
              value = Accuracy(labels, test.labels());
            } else {
              value = Mse(pred, test.targets);
            }
            fold_metric_sum[s] += value;
            mr.meta_width = meta.width();
            mr.timings.base_fit_seconds += base.fit_seconds;
            mr.timings.explanation_seconds += build_seconds;
            mr.timings.meta_fit_seconds += ens.summary.timings.meta_fit_seconds;
            mr.predict_seconds += test_meta_seconds + predict_seconds;
          }
        }
      }
      for (std::size_t s = 0; s < slots.size(); ++s) {
        res.methods[s].values.push_back(fold_metric_sum[s] / outer.n_folds);
        res.methods[s].fold_digests.push_back(digest);
      }
    }
  } catch (const Error& e) {
    res.error = e.what();
    return res;
  }

  for (std::size_t j = 0; j < meta_specs.size(); ++j) {
    const std::string meta_name = meta_specs[j].resolved().to_string();
    const MethodResult* st = res.find(MetaMode::kPrediction, meta_name);
    const MethodResult* xs = res.find(MetaMode::kAttribution, meta_name);
    if (!st || !xs) continue;
    Comparison c;
    c.meta = meta_name;
    for (std::size_t i = 0; i < xs->values.size(); ++i) {
      const double d = xs->values[i] - st->values[i];
      c.deltas.push_back(d);
      if (LowerIsBetter(metric) ? d <= 0.0 : d >= 0.0) ++c.xstacking_not_worse;
    }
    c.overhead_ratio = st->total_seconds() > 0.0
                           ? xs->total_seconds() / st->total_seconds()
                           : 0.0;
    res.comparisons.push_back(std::move(c));
  }
  return res;
}

nlohmann::json TimingsJson(const MethodResult& m) {
  return {{"base_fit_seconds", m.timings.base_fit_seconds},
          {"explanation_seconds", m.timings.explanation_seconds},
          {"meta_fit_seconds", m.timings.meta_fit_seconds},
          {"predict_seconds", m.predict_seconds},
          {"total_seconds", m.total_seconds()}};
}

nlohmann::json WilcoxonJson(const WilcoxonResult& w) {
  return {{"W", w.statistic},
          {"W_plus", w.w_plus},
          {"W_minus", w.w_minus},
          {"p_two_sided", w.p_two_sided},
          {"n_effective", w.n_effective},
          {"method", w.exact ? "exact" : "normal"}};
}

}  // namespace

// ---------------------------------------------------------------------------

std::string MethodResult::id() const {
  return MethodName(method) + "/" + meta_spec.to_string();
}

double MethodResult::mean() const {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double MethodResult::stddev() const {
  if (values.size() < 2) return 0.0;
  const double mu = mean();
  double s = 0.0;
  for (double v : values) s += (v - mu) * (v - mu);
  return std::sqrt(s / static_cast<double>(values.size() - 1));
}

const MethodResult* DatasetResult::find(MetaMode mode,
                                        const std::string& meta) const {
  for (const auto& m : methods) {
    if (m.method == mode && m.meta_spec.to_string() == meta) return &m;
  }
  return nullptr;
}

nlohmann::json BenchmarkConfig::to_json() const {
  nlohmann::json ds = nlohmann::json::array();
  for (const auto& d : datasets) {
    ds.push_back({{"name", d.name},
                  {"path", d.path},
                  {"target", d.target},
                  {"task", d.task == TaskType::kClassification ? "classification"
                                                               : "regression"}});
  }
  nlohmann::json methods_j = nlohmann::json::array();
  for (MetaMode m : methods) methods_j.push_back(MethodName(m));
  nlohmann::json base = nlohmann::json::array();
  for (const auto& s : base_specs) base.push_back(s.to_string());
  nlohmann::json meta = nlohmann::json::array();
  for (const auto& s : meta_specs) meta.push_back(s.to_string());
  nlohmann::json seeds_j = nlohmann::json::array();
  for (auto s : seeds) seeds_j.push_back(s);
  return {{"datasets", ds},
          {"methods", methods_j},
          {"base_specs", base},
          {"meta_specs", meta},
          {"n_folds", n_folds},
          {"eval_folds", eval_folds},
          {"seeds", seeds_j},
          {"shap", shap.to_json()},
          {"naive", naive},
          {"standardize_inputs", standardize_inputs},
          {"standardize_meta", standardize_meta}};
}

BenchmarkConfig BenchmarkConfig::FromJson(const nlohmann::json& j,
                                          const std::string& base_dir) {
  BenchmarkConfig c;
  try {
    if (!j.is_object()) ThrowUsage("benchmark config must be a JSON object");
    static const char* kKeys[] = {"datasets",  "methods",    "base_specs",
                                  "meta_specs", "n_folds",   "folds",
                                  "eval_folds", "seeds",     "shap",
                                  "naive",      "standardize_inputs",
                                  "standardize_meta"};
    for (const auto& [key, _] : j.items()) {
      if (std::find_if(std::begin(kKeys), std::end(kKeys),
                       [&](const char* k) { return key == k; }) == std::end(kKeys)) {
        ThrowUsage("unknown benchmark config key '" + key + "'");
      }
    }
    if (!j.contains("datasets") || !j["datasets"].is_array() || j["datasets"].empty()) {
      ThrowUsage("benchmark config needs a non-empty 'datasets' list");
    }
    for (const auto& dj : j["datasets"]) {
      BenchmarkDataset d;
      d.path = dj.at("path").get<std::string>();
      std::filesystem::path p(d.path);
      if (p.is_relative() && !base_dir.empty()) {
        d.path = (std::filesystem::path(base_dir) / p).lexically_normal().string();
      }
      d.name = dj.value("name", p.stem().string());
      d.target = dj.value("target", std::string("target"));
      d.task = ParseTaskType(dj.value("task", std::string("classification")));
      c.datasets.push_back(std::move(d));
    }
    if (j.contains("methods")) {
      c.methods.clear();
      for (const auto& m : j["methods"]) {
        const std::string name = m.get<std::string>();
        c.methods.push_back(name == "xstacking" ? MetaMode::kAttribution
                            : name == "stacking" ? MetaMode::kPrediction
                                                 : ParseMetaMode(name));
      }
      if (c.methods.empty()) ThrowUsage("benchmark 'methods' is empty");
    }
    auto specs = [](const nlohmann::json& arr) {
      std::vector<LearnerSpec> out;
      for (const auto& s : arr) {
        out.push_back(s.is_string() ? LearnerSpec::Parse(s.get<std::string>())
                                    : LearnerSpec::FromJson(s));
      }
      return out;
    };
    if (j.contains("base_specs")) c.base_specs = specs(j["base_specs"]);
    if (j.contains("meta_specs")) c.meta_specs = specs(j["meta_specs"]);
    if (j.contains("folds")) c.n_folds = j["folds"].get<int>();
    if (j.contains("n_folds")) c.n_folds = j["n_folds"].get<int>();
    if (j.contains("eval_folds")) c.eval_folds = j["eval_folds"].get<int>();
    if (j.contains("seeds")) {
      c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
      if (c.seeds.empty()) ThrowUsage("benchmark 'seeds' is empty");
    }
    if (j.contains("shap")) c.shap = ShapConfig::FromJson(j["shap"]);
    c.naive = j.value("naive", false);
    c.standardize_inputs = j.value("standardize_inputs", true);
    c.standardize_meta = j.value("standardize_meta", true);
  } catch (const nlohmann::json::exception& e) {
    ThrowUsage(std::string("malformed benchmark config: ") + e.what());
  }
  if (c.n_folds < 2 && !c.naive) ThrowUsage("n_folds must be >= 2");
  if (c.eval_folds < 2) ThrowUsage("eval_folds must be >= 2");
  for (const auto& s : c.base_specs) (void)s.resolved();
  for (const auto& s : c.meta_specs) (void)s.resolved();
  return c;
}

BenchmarkConfig BenchmarkConfig::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) ThrowData("cannot open benchmark config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    ThrowUsage("malformed benchmark config '" + path + "': " + e.what());
  }
  return FromJson(j, std::filesystem::path(path).parent_path().string());
}

ExperimentReport RunBenchmark(const BenchmarkConfig& config) {
  if (config.datasets.empty()) ThrowUsage("benchmark needs at least one dataset");
  if (config.methods.empty()) ThrowUsage("benchmark needs at least one method");
  ExperimentReport report;
  report.config = config;
  report.datasets.resize(config.datasets.size());
  ParallelFor(config.datasets.size(), [&](std::size_t i) {
    report.datasets[i] = RunDataset(config, config.datasets[i]);
  });
  for (const auto& d : report.datasets) report.partial |= d.error.has_value();

  // Across-dataset paired test per meta-learner and metric.
  std::vector<std::pair<std::string, std::string>> groups;
  for (const auto& d : report.datasets) {
    for (const auto& c : d.comparisons) {
      const std::string metric = d.find(MetaMode::kAttribution, c.meta)->metric;
      if (std::find(groups.begin(), groups.end(), std::pair(c.meta, metric)) ==
          groups.end()) {
        groups.emplace_back(c.meta, metric);
      }
    }
  }
  for (const auto& [meta, metric] : groups) {
    AcrossDatasetTest t;
    t.meta = meta;
    t.metric = metric;
    std::vector<double> xs_means, st_means;
    for (const auto& d : report.datasets) {
      const MethodResult* xs = d.find(MetaMode::kAttribution, meta);
      const MethodResult* st = d.find(MetaMode::kPrediction, meta);
      if (d.error || !xs || !st || xs->metric != metric) continue;
      t.datasets.push_back(d.name);
      xs_means.push_back(xs->mean());
      st_means.push_back(st->mean());
    }
    if (t.datasets.size() < kMinDatasetsForWilcoxon) {
      t.note = "fewer than " + std::to_string(kMinDatasetsForWilcoxon) +
               " datasets; test not applied";
    } else {
      try {
        t.result = WilcoxonSignedRank(xs_means, st_means);
      } catch (const NoDifferencesError& e) {
        t.note = e.what();
      }
    }
    report.tests.push_back(std::move(t));
  }
  return report;
}

nlohmann::json ExperimentReport::to_json(bool include_timings) const {
  nlohmann::json ds = nlohmann::json::array();
  for (const auto& d : datasets) {
    nlohmann::json dj = {{"name", d.name}, {"path", d.path}};
    if (d.error) {
      dj["status"] = "failed";
      dj["error"] = *d.error;
      ds.push_back(dj);
      continue;
    }
    dj["status"] = "ok";
    dj["rows"] = d.rows;
    dj["features"] = d.features;
    dj["task"] = d.task;
    dj["fold_digests"] = d.fold_digests;
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& m : d.methods) {
      nlohmann::json mj = {{"id", m.id()},
                           {"method", MethodName(m.method)},
                           {"meta_learner", m.meta_spec.to_string()},
                           {"metric", m.metric},
                           {"values", m.values},
                           {"mean", m.mean()},
                           {"std", m.stddev()},
                           {"meta_width", m.meta_width},
                           {"fold_digests", m.fold_digests}};
      if (include_timings) mj["timings"] = TimingsJson(m);
      methods.push_back(mj);
    }
    dj["methods"] = methods;
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : d.comparisons) {
      nlohmann::json cj = {{"meta_learner", c.meta},
                           {"deltas", c.deltas},
                           {"xstacking_not_worse", c.xstacking_not_worse},
                           {"n_seeds", c.deltas.size()}};
      if (include_timings) cj["timings"] = {{"overhead_ratio", c.overhead_ratio}};
      comps.push_back(cj);
    }
    dj["comparisons"] = comps;
    if (include_timings) dj["timings"] = {{"base_fit_seconds", d.base_fit_seconds}};
    ds.push_back(dj);
  }
  nlohmann::json tj = nlohmann::json::array();
  for (const auto& t : tests) {
    nlohmann::json j = {{"meta_learner", t.meta},
                        {"metric", t.metric},
                        {"datasets", t.datasets}};
    if (t.result) {
      j["wilcoxon"] = WilcoxonJson(*t.result);
    } else {
      j["wilcoxon"] = nullptr;
      j["note"] = t.note;
    }
    tj.push_back(j);
  }
  return {{"format", "xstacking-benchmark-report"},
          {"version", 1},
          {"partial", partial},
          {"config", config.to_json()},
          {"datasets", ds},
          {"wilcoxon_across_datasets", tj}};
}

std::string ExperimentReport::summary_csv() const {
  std::string out =
      "dataset,method,meta_learner,metric,mean,std,total_seconds,overhead_ratio\n";
  for (const auto& d : datasets) {
    if (d.error) {
      out += CsvField(d.name) + ",failed,,,,,,\n";
      continue;
    }
    for (const auto& m : d.methods) {
      const std::string meta = m.meta_spec.to_string();
      double ratio = 1.0;
      if (m.method == MetaMode::kAttribution) {
        const MethodResult* st = d.find(MetaMode::kPrediction, meta);
        ratio = st && st->total_seconds() > 0 ? m.total_seconds() / st->total_seconds()
                                              : 0.0;
      }
      out += CsvField(d.name) + "," + MethodName(m.method) + "," + CsvField(meta) + "," +
             m.metric + "," + FormatDouble(m.mean()) + "," +
             FormatDouble(m.stddev()) + "," + FormatDouble(m.total_seconds()) +
             "," + FormatDouble(ratio) + "\n";
    }
  }
  return out;
}

std::string ExperimentReport::summary_table() const {
  std::ostringstream os;
  int name_w = 8;
  int meta_w = 4;
  for (const auto& d : datasets) {
    name_w = std::max(name_w, static_cast<int>(d.name.size()));
    for (const auto& m : d.methods) {
      meta_w = std::max(meta_w, static_cast<int>(m.meta_spec.to_string().size()));
    }
  }
  char line[128];
  auto row_start = [&](const std::string& name, const std::string& method,
                       const std::string& meta) {
    os << std::left << std::setw(name_w) << name << ' ' << std::setw(10) << method
       << ' ' << std::setw(meta_w) << meta << ' ' << std::right;
  };
  row_start("dataset", "method", "meta");
  std::snprintf(line, sizeof line, "%-9s %9s %9s %9s %8s\n", "metric", "mean", "std",
                "seconds", "overhead");
  os << line;
  for (const auto& d : datasets) {
    if (d.error) {
      os << std::left << std::setw(name_w) << d.name << std::right << " FAILED: "
         << *d.error << "\n";
      continue;
    }
    for (const auto& m : d.methods) {
      const std::string meta = m.meta_spec.to_string();
      std::string ratio = "-";
      if (m.method == MetaMode::kAttribution) {
        const MethodResult* st = d.find(MetaMode::kPrediction, meta);
        if (st && st->total_seconds() > 0) {
          char r[32];
          std::snprintf(r, sizeof r, "%.2f", m.total_seconds() / st->total_seconds());
          ratio = r;
        }
      }
      row_start(d.name, MethodName(m.method), meta);
      std::snprintf(line, sizeof line, "%-9s %9.4f %9.4f %9.2f %8s\n", m.metric.c_str(),
                    m.mean(), m.stddev(), m.total_seconds(), ratio.c_str());
      os << line;
    }
  }
  for (const auto& t : tests) {
    os << "wilcoxon " << t.meta << " (" << t.metric << ", "
       << t.datasets.size() << " datasets): ";
    if (t.result) {
      std::snprintf(line, sizeof line, "W=%g p=%.6g (%s)\n", t.result->statistic,
                    t.result->p_two_sided, t.result->exact ? "exact" : "normal");
      os << line;
    } else {
      os << t.note << "\n";
    }
  }
  return os.str();
}

}  // namespace xstacking
