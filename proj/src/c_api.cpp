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

#include "xstacking/xstacking.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <new>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "xstacking/dataset.hpp"
#include "xstacking/ensemble.hpp"
#include "xstacking/eval.hpp"

struct xstk_dataset {
  xstacking::Dataset data;
};

struct xstk_ensemble {
  xstacking::Ensemble model;
};

namespace {

using namespace xstacking;

thread_local std::string g_last_error;

xstk_status Fail(xstk_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename Body>
xstk_status Guard(Body&& body) {
  try {
    return body();
  } catch (const Error& e) {
    return Fail(static_cast<xstk_status>(e.kind()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return Fail(XSTK_USAGE, std::string("invalid JSON: ") + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return Fail(XSTK_DATA, e.what());
  } catch (const std::bad_alloc&) {
    return Fail(XSTK_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Fail(XSTK_INTERNAL, e.what());
  } catch (...) {
    return Fail(XSTK_INTERNAL, "unknown error");
  }
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string Join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ",";
    out += s;
  }
  return out;
}

void WriteText(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) ThrowData("cannot write '" + path + "'");
  out << text;
  if (!out) ThrowData("write failed for '" + path + "'");
}

// Feature matrix of a CSV whose columns are matched to the ensemble's feature
// names. The training target column may be present and is skipped.
Matrix ReadFeatures(const Ensemble& e, const std::string& path) {
  const CsvTable table = ReadCsvTable(path);
  std::vector<std::size_t> source(e.feature_names.size());
  std::vector<std::string> missing;
  std::vector<std::string> extra;
  for (std::size_t j = 0; j < e.feature_names.size(); ++j) {
    std::size_t hit = table.header.size();
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (table.header[c] == e.feature_names[j]) hit = c;
    }
    if (hit == table.header.size()) missing.push_back(e.feature_names[j]);
    source[j] = hit;
  }
  const std::set<std::string> known(e.feature_names.begin(), e.feature_names.end());
  for (const auto& h : table.header) {
    if (!known.count(h) && h != e.target_name) extra.push_back(h);
  }
  if (!missing.empty() || !extra.empty()) {
    ThrowData("schema mismatch in '" + path + "': missing=[" + Join(missing) +
              "] extra=[" + Join(extra) + "]");
  }
  Matrix x(table.cells.size(), e.feature_names.size());
  for (std::size_t i = 0; i < table.cells.size(); ++i) {
    for (std::size_t j = 0; j < source.size(); ++j) {
      const std::string& cell = table.cells[i][source[j]];
      double v = 0.0;
      if (!ParseDouble(cell, v) || !std::isfinite(v)) {
        ThrowData(path + ": row " + std::to_string(i + 1) + ", column '" +
                  e.feature_names[j] + "': not a finite number '" + cell + "'");
      }
      x(i, j) = v;
    }
  }
  if (x.rows() == 0) ThrowData(path + ": no data rows");
  return x;
}

std::string CsvHeader(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ',';
    out += names[i];
  }
  return out + "\n";
}

}  // namespace

extern "C" {

const char* xstk_last_error(void) { return g_last_error.c_str(); }

const char* xstk_version(void) { return "1.0.0"; }

void xstk_string_free(char* s) { std::free(s); }

xstk_status xstk_set_threads(int n) {
  return Guard([&] {
    SetNumThreads(n);
    return XSTK_OK;
  });
}

xstk_status xstk_dataset_load_csv(const char* path, const char* target,
                                  int target_is_index, const char* task,
                                  xstk_dataset** out) {
  if (path == nullptr || target == nullptr || out == nullptr) {
    return Fail(XSTK_USAGE, "dataset_load_csv: null argument");
  }
  *out = nullptr;
  return Guard([&] {
    const TaskType type = ParseTaskType(task ? task : "classification");
    ColumnRef ref = std::string(target);
    if (target_is_index) {
      double idx = 0.0;
      if (!ParseDouble(target, idx) || idx < 0 || idx != std::floor(idx)) {
        ThrowUsage(std::string("target index must be a non-negative integer, got '") +
                   target + "'");
      }
      ref = static_cast<std::size_t>(idx);
    }
    auto ds = std::make_unique<xstk_dataset>();
    ds->data = LoadCsv(path, ref, type);
    *out = ds.release();
    return XSTK_OK;
  });
}

void xstk_dataset_free(xstk_dataset* ds) { delete ds; }

size_t xstk_dataset_rows(const xstk_dataset* ds) { return ds ? ds->data.m() : 0; }

size_t xstk_dataset_cols(const xstk_dataset* ds) { return ds ? ds->data.d() : 0; }

xstk_status xstk_train(const xstk_dataset* ds, const char* config_json,
                       xstk_ensemble** out) {
  if (ds == nullptr || out == nullptr) return Fail(XSTK_USAGE, "train: null argument");
  *out = nullptr;
  return Guard([&] {
    nlohmann::json j = nlohmann::json::object();
    if (config_json != nullptr && *config_json != '\0') {
      j = nlohmann::json::parse(config_json);
      if (!j.is_object()) ThrowUsage("ensemble config must be a JSON object");
    }
    EnsembleConfig config = EnsembleConfig::FromJson(j);
    if (config.base_specs.empty()) config.base_specs = DefaultBaseSpecs(ds->data.task);
    if (!j.contains("meta")) config.meta_spec = DefaultMetaSpec(ds->data.task);
    auto e = std::make_unique<xstk_ensemble>();
    e->model = Train(ds->data, config);
    *out = e.release();
    return XSTK_OK;
  });
}

void xstk_ensemble_free(xstk_ensemble* e) { delete e; }

xstk_status xstk_ensemble_save(const xstk_ensemble* e, const char* dir) {
  if (e == nullptr || dir == nullptr) return Fail(XSTK_USAGE, "save: null argument");
  return Guard([&] {
    e->model.save(dir);
    return XSTK_OK;
  });
}

xstk_status xstk_ensemble_load(const char* dir, xstk_ensemble** out) {
  if (dir == nullptr || out == nullptr) return Fail(XSTK_USAGE, "load: null argument");
  *out = nullptr;
  return Guard([&] {
    auto e = std::make_unique<xstk_ensemble>();
    e->model = Ensemble::Load(dir);
    *out = e.release();
    return XSTK_OK;
  });
}

size_t xstk_ensemble_meta_width(const xstk_ensemble* e) {
  return e ? e->model.meta_width() : 0;
}

xstk_status xstk_ensemble_summary_json(const xstk_ensemble* e, int include_timings,
                                       char** out_json) {
  if (e == nullptr || out_json == nullptr) {
    return Fail(XSTK_USAGE, "summary_json: null argument");
  }
  *out_json = nullptr;
  return Guard([&] {
    nlohmann::json j = e->model.summary.to_json(include_timings != 0);
    j["mode"] = MetaModeName(e->model.mode());
    j["task"] = e->model.task.to_string();
    j["config"] = e->model.config.to_json();
    *out_json = CopyString(j.dump(2));
    return XSTK_OK;
  });
}

xstk_status xstk_predict_csv(const xstk_ensemble* e, const char* in_path,
                             const char* out_path) {
  if (e == nullptr || in_path == nullptr || out_path == nullptr) {
    return Fail(XSTK_USAGE, "predict_csv: null argument");
  }
  return Guard([&] {
    const Ensemble& m = e->model;
    const Matrix x = ReadFeatures(m, in_path);
    const Matrix z = m.meta_features(x);
    std::vector<std::string> header = {"row", "prediction"};
    const bool cls = m.task.is_classification();
    if (cls) {
      for (const auto& label : m.class_labels) header.push_back("score_" + label);
    }
    std::string text = CsvHeader(header);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double pred = m.predict_meta(z.row(i));
      text += std::to_string(i) + ",";
      if (cls) {
        text += m.class_labels[static_cast<std::size_t>(pred)];
        for (double s : m.meta_scores(z.row(i))) text += "," + FormatDouble(s);
      } else {
        text += FormatDouble(pred);
      }
      text += "\n";
    }
    WriteText(out_path, text);
    return XSTK_OK;
  });
}

xstk_status xstk_predict(const xstk_ensemble* e, const double* x, size_t n, size_t d,
                         double* out) {
  if (e == nullptr || (n > 0 && (x == nullptr || out == nullptr))) {
    return Fail(XSTK_USAGE, "predict: null argument");
  }
  return Guard([&] {
    if (d != e->model.feature_names.size()) {
      ThrowData("predict: expected " + std::to_string(e->model.feature_names.size()) +
                " columns, got " + std::to_string(d));
    }
    Matrix m(n, d);
    std::copy(x, x + n * d, m.data().begin());
    const auto pred = e->model.predict(m);
    std::copy(pred.begin(), pred.end(), out);
    return XSTK_OK;
  });
}

xstk_status xstk_explain_csv(const xstk_ensemble* e, const char* in_path,
                             const char* out_dir, double* out_max_gap) {
  if (e == nullptr || in_path == nullptr || out_dir == nullptr) {
    return Fail(XSTK_USAGE, "explain_csv: null argument");
  }
  return Guard([&] {
    const Ensemble& m = e->model;
    const Matrix x = ReadFeatures(m, in_path);
    const Matrix z = m.meta_features(x);
    const std::size_t w = m.meta_width();
    std::filesystem::create_directories(out_dir);

    std::vector<Attribution> stage2(x.rows());
    const std::uint64_t seed = DeriveSeed(m.config.seed, {0x5732});
    ParallelFor(x.rows(), [&](std::size_t i) {
      stage2[i] = Explain(m.meta_explanation_target(z.row(i)), z.row(i),
                          m.meta_background, m.config.shap, DeriveSeed(seed, {i}));
    });

    std::vector<std::string> names;
    for (const auto& p : m.provenance) names.push_back(p.column_name());
    std::vector<std::string> h1 = {"row"};
    h1.insert(h1.end(), names.begin(), names.end());
    std::vector<std::string> h2 = {"row", "prediction", "base_value", "fx",
                                   "efficiency_gap"};
    for (const auto& n : names) h2.push_back("phi:" + n);

    std::string s1 = CsvHeader(h1);
    std::string s2 = CsvHeader(h2);
    double max_gap = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      s1 += std::to_string(i);
      for (std::size_t c = 0; c < w; ++c) s1 += "," + FormatDouble(z(i, c));
      s1 += "\n";
      const Attribution& a = stage2[i];
      const double pred = m.predict_meta(z.row(i));
      const double gap = a.efficiency_gap();
      max_gap = std::max(max_gap, gap);
      s2 += std::to_string(i) + ",";
      s2 += m.task.is_classification() ? m.class_labels[static_cast<std::size_t>(pred)]
                                       : FormatDouble(pred);
      s2 += "," + FormatDouble(a.base_value) + "," + FormatDouble(a.fx) + "," +
            FormatDouble(gap);
      for (double p : a.phi) s2 += "," + FormatDouble(p);
      s2 += "\n";
    }
    const std::filesystem::path dir(out_dir);
    WriteText((dir / "stage1.csv").string(), s1);
    WriteText((dir / "stage2.csv").string(), s2);

    nlohmann::json prov = nlohmann::json::array();
    for (const auto& p : m.provenance) {
      prov.push_back({{"column", p.column_name()},
                      {"learner", p.learner},
                      {"learner_name", p.learner_name},
                      {"feature", p.feature},
                      {"is_attribution", p.is_attribution}});
    }
    const EstimatorKind est2 = m.config.shap.resolve(w);
    nlohmann::json meta = {
        {"rows", x.rows()},
        {"mode", MetaModeName(m.mode())},
        {"n_learners", m.n_learners()},
        {"n_features", m.feature_names.size()},
        {"meta_width", w},
        {"stage1", {{"estimator", EstimatorName(m.config.shap.resolve(m.feature_names.size()))},
                    {"background_rows", m.background.size()},
                    {"units", m.config.standardize_inputs ? "standardized" : "raw"}}},
        {"stage2", {{"estimator", EstimatorName(est2)},
                    {"background_rows", m.meta_background.size()},
                    {"max_efficiency_gap", max_gap}}},
        {"provenance", prov}};
    WriteText((dir / "explanation.json").string(), meta.dump(2) + "\n");
    if (out_max_gap != nullptr) *out_max_gap = max_gap;
    return XSTK_OK;
  });
}

xstk_status xstk_benchmark(const char* config_path, const char* out_dir,
                           char** out_summary) {
  if (config_path == nullptr || out_dir == nullptr) {
    return Fail(XSTK_USAGE, "benchmark: null argument");
  }
  if (out_summary != nullptr) *out_summary = nullptr;
  return Guard([&] {
    BenchmarkConfig config;
    try {
      config = BenchmarkConfig::Load(config_path);
      if (config.datasets.empty()) ThrowUsage("benchmark needs at least one dataset");
      if (config.methods.empty()) ThrowUsage("benchmark needs at least one method");
    } catch (const Error& e) {
      // A bad benchmark config is bad input rather than bad invocation.
      ThrowData(std::string("benchmark config: ") + e.what());
    }
    const ExperimentReport report = RunBenchmark(config);
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    WriteText((dir / "report.json").string(), report.to_json(true).dump(2) + "\n");
    WriteText((dir / "summary.csv").string(), report.summary_csv());
    if (out_summary != nullptr) *out_summary = CopyString(report.summary_table());
    if (report.partial) {
      std::string failed;
      for (const auto& d : report.datasets) {
        if (d.error) failed += (failed.empty() ? "" : "; ") + d.name + ": " + *d.error;
      }
      return Fail(XSTK_PARTIAL, "benchmark incomplete: " + failed);
    }
    return XSTK_OK;
  });
}

xstk_status xstk_generate_synthetic(const char* out_dir, size_t rows, uint64_t seed) {
  if (out_dir == nullptr) return Fail(XSTK_USAGE, "generate_synthetic: null argument");
  return Guard([&] {
    std::filesystem::create_directories(out_dir);
    for (int v = 0; v < kSyntheticVariants; ++v) {
      const Dataset ds = MakeSyntheticDataset(v, rows, seed);
      WriteCsv(ds, (std::filesystem::path(out_dir) /
                    ("synthetic_" + std::to_string(v) + ".csv")).string());
    }
    return XSTK_OK;
  });
}

}  // extern "C"
