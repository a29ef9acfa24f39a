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

// xstacking command-line tool. Uses only the C interface.
//
// Errors go to stderr as one JSON object per line:
//   {"error":{"code":2,"kind":"data","message":"..."}}

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xstacking/xstacking.h"

namespace {

constexpr std::uint64_t kDefaultSeed = 42;

const char* KindName(int code) {
  switch (code) {
    case XSTK_USAGE: return "usage";
    case XSTK_DATA: return "data";
    case XSTK_TRAINING: return "training";
    case XSTK_PARTIAL: return "partial";
    default: return "internal";
  }
}

int ReportError(int code, const std::string& message) {
  nlohmann::json j = {{"error", {{"code", code}, {"kind", KindName(code)},
                                 {"message", message}}}};
  std::cerr << j.dump() << std::endl;
  return code;
}

struct Failure {
  int code;
  std::string message;
};

void Check(xstk_status s) {
  if (s != XSTK_OK) throw Failure{s, xstk_last_error()};
}

[[noreturn]] void Usage(const std::string& msg) { throw Failure{XSTK_USAGE, msg}; }

// Options shared by the subcommands. Unset optionals fall back to the
// config file, then to library defaults.
struct Options {
  std::string config;
  std::optional<std::string> data, target, task, meta, mode, out, model;
  std::vector<std::string> base;
  std::optional<int> folds, threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> shap_estimator;
  std::optional<std::size_t> shap_samples, background_size;
  bool naive = false;
};

// Config-file keys are the long flag names; underscores are accepted too.
const std::map<std::string, std::string> kConfigKeys = {
    {"data", "data"},
    {"target", "target"},
    {"task", "task"},
    {"base", "base"},
    {"meta", "meta"},
    {"mode", "mode"},
    {"folds", "folds"},
    {"seed", "seed"},
    {"threads", "threads"},
    {"shap-estimator", "shap-estimator"},
    {"shap_estimator", "shap-estimator"},
    {"shap-samples", "shap-samples"},
    {"shap_samples", "shap-samples"},
    {"background-size", "background-size"},
    {"background_size", "background-size"},
    {"naive", "naive"},
    {"out", "out"},
    {"model", "model"},
};

void MergeConfigFile(Options& o) {
  if (o.config.empty()) return;
  std::ifstream in(o.config);
  if (!in) throw Failure{XSTK_DATA, "cannot open config file '" + o.config + "'"};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    Usage("malformed config file '" + o.config + "': " + e.what());
  }
  if (!j.is_object()) Usage("config file must hold a JSON object");
  try {
    for (const auto& [raw_key, v] : j.items()) {
      auto it = kConfigKeys.find(raw_key);
      if (it == kConfigKeys.end()) Usage("unknown config key '" + raw_key + "'");
      const std::string& key = it->second;
      auto str = [&](std::optional<std::string>& dst) {
        if (!dst) dst = v.get<std::string>();
      };
      // Input paths in the file are relative to the file; --out stays
      // relative to the working directory.
      auto input = [&](std::optional<std::string>& dst) {
        if (dst) return;
        std::filesystem::path p(v.get<std::string>());
        if (p.is_relative()) p = std::filesystem::path(o.config).parent_path() / p;
        dst = p.lexically_normal().string();
      };
      if (key == "data") input(o.data);
      else if (key == "target") str(o.target);
      else if (key == "task") str(o.task);
      else if (key == "meta") str(o.meta);
      else if (key == "mode") str(o.mode);
      else if (key == "out") str(o.out);
      else if (key == "model") input(o.model);
      else if (key == "shap-estimator") str(o.shap_estimator);
      else if (key == "base") {
        if (o.base.empty()) {
          if (v.is_string()) o.base.push_back(v.get<std::string>());
          else o.base = v.get<std::vector<std::string>>();
        }
      } else if (key == "folds") {
        if (!o.folds) o.folds = v.get<int>();
      } else if (key == "threads") {
        if (!o.threads) o.threads = v.get<int>();
      } else if (key == "seed") {
        if (!o.seed) o.seed = v.get<std::uint64_t>();
      } else if (key == "shap-samples") {
        if (!o.shap_samples) o.shap_samples = v.get<std::size_t>();
      } else if (key == "background-size") {
        if (!o.background_size) o.background_size = v.get<std::size_t>();
      } else if (key == "naive") {
        o.naive = o.naive || v.get<bool>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    Usage("config file '" + o.config + "': " + e.what());
  }
}

void AddCommon(CLI::App* app, Options& o) {
  app->add_option("--config", o.config, "JSON file whose keys mirror the flags");
  app->add_option("--threads", o.threads,
                  "worker threads (default: available cores); results do not "
                  "depend on it");
}

void AddTraining(CLI::App* app, Options& o) {
  app->add_option("--data", o.data, "training CSV with a header row");
  app->add_option("--target", o.target, "target column name");
  app->add_option("--task", o.task, "classification or regression")
      ->check(CLI::IsMember({"classification", "regression"}));
  app->add_option("--base", o.base,
                  "base learner family[:key=value,...]; repeatable "
                  "(default: decision_tree, logistic or linear regression, mlp)");
  app->add_option("--meta", o.meta, "meta learner family[:key=value,...]");
  app->add_option("--mode", o.mode, "xstacking (attributions) or stacking (predictions)")
      ->check(CLI::IsMember({"xstacking", "stacking", "attribution", "prediction"}));
  app->add_option("--folds", o.folds, "cross-validation folds for meta-features (default 5)");
  app->add_option("--seed", o.seed, "random seed (default 42)");
  app->add_option("--shap-estimator", o.shap_estimator, "exact, kernel or auto")
      ->check(CLI::IsMember({"exact", "kernel", "auto"}));
  app->add_option("--shap-samples", o.shap_samples,
                  "kernel coalition budget (default 2*d + 2048)");
  app->add_option("--background-size", o.background_size,
                  "background rows for attributions (default 100)");
  app->add_flag("--naive", o.naive,
                "build meta-features from full-data models, without folds");
}

void ApplyThreads(const Options& o) { Check(xstk_set_threads(o.threads.value_or(0))); }

std::string RequireString(const std::optional<std::string>& v, const char* flag) {
  if (!v || v->empty()) Usage(std::string("missing required option ") + flag);
  return *v;
}

int RunTrain(const Options& o) {
  const std::string data = RequireString(o.data, "--data");
  const std::string target = RequireString(o.target, "--target");
  const std::string out = o.out.value_or("xstacking_model");
  ApplyThreads(o);

  nlohmann::json cfg = nlohmann::json::object();
  if (!o.base.empty()) cfg["base"] = o.base;
  if (o.meta) cfg["meta"] = *o.meta;
  if (o.mode) cfg["mode"] = *o.mode;
  if (o.folds) cfg["folds"] = *o.folds;
  cfg["seed"] = o.seed.value_or(kDefaultSeed);
  if (o.shap_estimator) cfg["shap_estimator"] = *o.shap_estimator;
  if (o.shap_samples) cfg["shap_samples"] = *o.shap_samples;
  if (o.background_size) cfg["background_size"] = *o.background_size;
  if (o.naive) cfg["naive"] = true;

  xstk_dataset* ds = nullptr;
  Check(xstk_dataset_load_csv(data.c_str(), target.c_str(), 0,
                              o.task.value_or("classification").c_str(), &ds));
  xstk_ensemble* e = nullptr;
  const xstk_status s = xstk_train(ds, cfg.dump().c_str(), &e);
  xstk_dataset_free(ds);
  Check(s);

  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) {
    xstk_ensemble_free(e);
    throw Failure{XSTK_DATA, "cannot create output directory '" + out + "'"};
  }
  const std::string model_dir = (std::filesystem::path(out) / "ensemble").string();
  char* summary = nullptr;
  xstk_status st = xstk_ensemble_save(e, model_dir.c_str());
  if (st == XSTK_OK) st = xstk_ensemble_summary_json(e, 1, &summary);
  xstk_ensemble_free(e);
  Check(st);
  const std::string text = summary;
  xstk_string_free(summary);
  std::ofstream f(std::filesystem::path(out) / "training_summary.json");
  f << text << "\n";
  if (!f) throw Failure{XSTK_DATA, "cannot write training summary in '" + out + "'"};
  std::cout << text << std::endl;
  return 0;
}

xstk_ensemble* LoadModel(const Options& o) {
  std::string dir = RequireString(o.model, "--model");
  // Accept either the train output directory or the ensemble inside it.
  if (std::filesystem::exists(std::filesystem::path(dir) / "ensemble" / "ensemble.json")) {
    dir = (std::filesystem::path(dir) / "ensemble").string();
  }
  xstk_ensemble* e = nullptr;
  Check(xstk_ensemble_load(dir.c_str(), &e));
  return e;
}

int RunPredict(const Options& o) {
  const std::string data = RequireString(o.data, "--data");
  ApplyThreads(o);
  std::string out_path = "-";
  if (o.out) {
    std::filesystem::create_directories(*o.out);
    out_path = (std::filesystem::path(*o.out) / "predictions.csv").string();
  }
  xstk_ensemble* e = LoadModel(o);
  const xstk_status s = xstk_predict_csv(e, data.c_str(), out_path.c_str());
  xstk_ensemble_free(e);
  Check(s);
  return 0;
}

int RunExplain(const Options& o) {
  const std::string data = RequireString(o.data, "--data");
  const std::string out = o.out.value_or("xstacking_explain");
  ApplyThreads(o);
  xstk_ensemble* e = LoadModel(o);
  double gap = 0.0;
  const xstk_status s = xstk_explain_csv(e, data.c_str(), out.c_str(), &gap);
  xstk_ensemble_free(e);
  Check(s);
  nlohmann::json j = {{"out", out}, {"max_efficiency_gap", gap}};
  std::cout << j.dump() << std::endl;
  return 0;
}

int RunBenchmark(const Options& o, const std::string& config_path) {
  if (config_path.empty()) Usage("benchmark needs a config file (--config or positional)");
  const std::string out = o.out.value_or("benchmark_out");
  ApplyThreads(o);
  char* table = nullptr;
  const xstk_status s = xstk_benchmark(config_path.c_str(), out.c_str(), &table);
  if (table != nullptr) {
    std::cout << table << std::flush;
    xstk_string_free(table);
  }
  Check(s);
  return 0;
}

int RunGenerate(const std::string& out, std::size_t rows, std::uint64_t seed) {
  Check(xstk_generate_synthetic(out.c_str(), rows, seed));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xstacking: stacked ensembles over Shapley-value meta-features"};
  app.set_version_flag("--version", std::string(xstk_version()));
  app.require_subcommand(1);

  Options train_opts, predict_opts, explain_opts, bench_opts;

  auto* train = app.add_subcommand("train", "fit an ensemble and write it to --out");
  AddCommon(train, train_opts);
  AddTraining(train, train_opts);
  train->add_option("--out", train_opts.out,
                    "output directory (default xstacking_model)");

  auto* predict = app.add_subcommand("predict", "predict the rows of a CSV");
  AddCommon(predict, predict_opts);
  predict->add_option("--model", predict_opts.model, "directory written by train");
  predict->add_option("--data", predict_opts.data, "input CSV; columns matched by name");
  predict->add_option("--out", predict_opts.out,
                      "output directory for predictions.csv (default: stdout)");

  auto* explain = app.add_subcommand("explain", "two-stage attributions for a CSV");
  AddCommon(explain, explain_opts);
  explain->add_option("--model", explain_opts.model, "directory written by train");
  explain->add_option("--data", explain_opts.data, "input CSV; columns matched by name");
  explain->add_option("--out", explain_opts.out,
                      "output directory (default xstacking_explain)");

  std::string bench_config;
  auto* bench = app.add_subcommand("benchmark", "run a benchmark config");
  bench->add_option("config,--config", bench_config, "benchmark config JSON");
  bench->add_option("--threads", bench_opts.threads,
                    "worker threads (default: available cores)");
  bench->add_option("--out", bench_opts.out, "output directory (default benchmark_out)");

  std::string gen_out = "data";
  std::size_t gen_rows = 1000;
  std::uint64_t gen_seed = 7;
  auto* gen = app.add_subcommand("synthetic", "write the synthetic benchmark datasets");
  gen->add_option("--out", gen_out, "output directory")->capture_default_str();
  gen->add_option("--rows", gen_rows, "rows per dataset")->capture_default_str();
  gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return ReportError(XSTK_USAGE, e.what());
  }

  try {
    if (*train) {
      MergeConfigFile(train_opts);
      return RunTrain(train_opts);
    }
    if (*predict) {
      MergeConfigFile(predict_opts);
      return RunPredict(predict_opts);
    }
    if (*explain) {
      MergeConfigFile(explain_opts);
      return RunExplain(explain_opts);
    }
    if (*bench) return RunBenchmark(bench_opts, bench_config);
    if (*gen) return RunGenerate(gen_out, gen_rows, gen_seed);
  } catch (const Failure& f) {
    return ReportError(f.code, f.message);
  } catch (const std::exception& e) {
    return ReportError(XSTK_INTERNAL, e.what());
  }
  return ReportError(XSTK_USAGE, "no subcommand");
}
