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

// On-disk ensemble layout:
//
//   ensemble.json            manifest (config, schema, standardizers, files)
//   models/base_<k>.json     full-data base learners
//   models/fold_<t>_<k>.json fold models, kept for audit
//   models/meta.json         meta-learner
//   backgrounds/base.csv     inference background (standardized inputs)
//   backgrounds/meta.csv     stage-2 background (raw meta-features)
//   meta_features.csv        training meta-features with targets

#include <filesystem>
#include <fstream>
#include <sstream>

#include "xstacking/ensemble.hpp"

namespace xstacking {

namespace {

namespace fs = std::filesystem;

constexpr int kEnsembleFormatVersion = 1;

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) ThrowData("cannot write '" + path.string() + "'");
  out << text;
}

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ThrowData("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json ReadJson(const fs::path& path) {
  try {
    return nlohmann::json::parse(ReadText(path));
  } catch (const nlohmann::json::parse_error& e) {
    ThrowData("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

std::string MatrixCsv(const std::vector<std::string>& header, const Matrix& m) {
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out += ',';
    out += header[j];
  }
  out += '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += FormatDouble(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Matrix MatrixFromCsv(const fs::path& path, std::size_t expected_cols) {
  const CsvTable t = ReadCsvTable(path.string());
  if (t.header.size() != expected_cols) {
    ThrowData("'" + path.string() + "' has unexpected column count");
  }
  Matrix m(t.cells.size(), expected_cols);
  for (std::size_t i = 0; i < t.cells.size(); ++i) {
    for (std::size_t j = 0; j < expected_cols; ++j) {
      if (!ParseDouble(t.cells[i][j], m(i, j))) {
        ThrowData("'" + path.string() + "': bad number at row " +
                  std::to_string(i + 1));
      }
    }
  }
  return m;
}

nlohmann::json StandardizerJson(const Standardizer& s) {
  return {{"mean", DoublesToJson(s.mean)}, {"scale", DoublesToJson(s.scale)}};
}

Standardizer StandardizerFromJson(const nlohmann::json& j) {
  Standardizer s;
  s.mean = DoublesFromJson(j.at("mean"));
  s.scale = DoublesFromJson(j.at("scale"));
  if (s.mean.size() != s.scale.size()) ThrowData("malformed standardizer");
  return s;
}

std::string ModelText(const Model& m) { return m.to_json().dump(1) + "\n"; }

}  // namespace

void Ensemble::save(const std::string& dir) const {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root / "models", ec);
  fs::create_directories(root / "backgrounds", ec);
  if (ec) ThrowData("cannot create '" + dir + "': " + ec.message());

  nlohmann::json files;
  nlohmann::json base_files = nlohmann::json::array();
  for (std::size_t k = 0; k < base_models.size(); ++k) {
    const std::string rel = "models/base_" + std::to_string(k) + ".json";
    WriteText(root / rel, ModelText(*base_models[k]));
    base_files.push_back(rel);
  }
  nlohmann::json fold_files = nlohmann::json::array();
  for (std::size_t t = 0; t < fold_models.size(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t k = 0; k < fold_models[t].size(); ++k) {
      const std::string rel = "models/fold_" + std::to_string(t) + "_" +
                              std::to_string(k) + ".json";
      WriteText(root / rel, ModelText(*fold_models[t][k]));
      row.push_back(rel);
    }
    fold_files.push_back(row);
  }
  WriteText(root / "models/meta.json", ModelText(*meta_model));
  WriteText(root / "backgrounds/base.csv", MatrixCsv(feature_names, background.rows));
  const auto meta_names = training_meta.column_names();
  WriteText(root / "backgrounds/meta.csv", MatrixCsv(meta_names, meta_background.rows));

  {
    std::vector<std::string> header = meta_names;
    header.push_back(target_name);
    Matrix with_target(training_meta.features.rows(), header.size());
    for (std::size_t i = 0; i < with_target.rows(); ++i) {
      auto src = training_meta.features.row(i);
      std::copy(src.begin(), src.end(), with_target.row(i).begin());
      with_target(i, header.size() - 1) = training_meta.targets[i];
    }
    WriteText(root / "meta_features.csv", MatrixCsv(header, with_target));
  }

  files["base_models"] = base_files;
  files["fold_models"] = fold_files;
  files["meta_model"] = "models/meta.json";
  files["background"] = "backgrounds/base.csv";
  files["meta_background"] = "backgrounds/meta.csv";
  files["meta_features"] = "meta_features.csv";

  nlohmann::json prov = nlohmann::json::array();
  for (const auto& p : provenance) {
    prov.push_back({{"learner", p.learner},
                    {"learner_name", p.learner_name},
                    {"feature", p.feature},
                    {"class_index", p.class_index},
                    {"is_attribution", p.is_attribution},
                    {"column", p.column_name()}});
  }

  nlohmann::json manifest = {
      {"format", "xstacking-ensemble"},
      {"version", kEnsembleFormatVersion},
      {"config", config.to_json()},
      {"task", {{"kind", task.to_string()}, {"num_classes", task.num_classes()}}},
      {"feature_names", feature_names},
      {"class_labels", class_labels},
      {"target_name", target_name},
      {"input_standardizer", StandardizerJson(input_standardizer)},
      {"meta_standardizer", StandardizerJson(meta_standardizer)},
      {"provenance", prov},
      {"background_seed", std::to_string(background.seed)},
      {"meta_background_seed", std::to_string(meta_background.seed)},
      {"summary", summary.to_json(false)},
      {"files", files}};
  WriteText(root / "ensemble.json", manifest.dump(2) + "\n");
}

Ensemble Ensemble::Load(const std::string& dir) {
  const fs::path root(dir);
  const nlohmann::json m = ReadJson(root / "ensemble.json");
  Ensemble e;
  try {
    if (m.at("format").get<std::string>() != "xstacking-ensemble") {
      ThrowData("'" + dir + "' is not an xstacking ensemble");
    }
    if (m.at("version").get<int>() != kEnsembleFormatVersion) {
      ThrowData("unsupported ensemble version");
    }
    e.config = EnsembleConfig::FromJson(m.at("config"));
    const auto& tj = m.at("task");
    e.task = tj.at("kind").get<std::string>() == "classification"
                 ? TaskKind::Classification(tj.at("num_classes").get<int>())
                 : TaskKind::Regression();
    e.feature_names = m.at("feature_names").get<std::vector<std::string>>();
    e.class_labels = m.at("class_labels").get<std::vector<std::string>>();
    e.target_name = m.at("target_name").get<std::string>();
    e.input_standardizer = StandardizerFromJson(m.at("input_standardizer"));
    e.meta_standardizer = StandardizerFromJson(m.at("meta_standardizer"));
    for (const auto& p : m.at("provenance")) {
      ColumnProvenance c;
      c.learner = p.at("learner").get<std::size_t>();
      c.learner_name = p.at("learner_name").get<std::string>();
      c.feature = p.at("feature").get<std::string>();
      c.class_index = p.at("class_index").get<int>();
      c.is_attribution = p.at("is_attribution").get<bool>();
      e.provenance.push_back(std::move(c));
    }
    const auto& files = m.at("files");
    for (const auto& f : files.at("base_models")) {
      e.base_models.push_back(ModelFromJson(ReadJson(root / f.get<std::string>())));
    }
    for (const auto& row : files.at("fold_models")) {
      std::vector<ModelPtr> models;
      for (const auto& f : row) {
        models.push_back(ModelFromJson(ReadJson(root / f.get<std::string>())));
      }
      e.fold_models.push_back(std::move(models));
    }
    e.meta_model = ModelFromJson(ReadJson(root / files.at("meta_model").get<std::string>()));

    const std::size_t d = e.feature_names.size();
    e.background = BackgroundSet::FromRows(
        MatrixFromCsv(root / files.at("background").get<std::string>(), d));
    e.background.origin = BackgroundOrigin::kTrainingSample;
    e.background.seed = std::stoull(m.at("background_seed").get<std::string>());
    e.meta_background = BackgroundSet::FromRows(MatrixFromCsv(
        root / files.at("meta_background").get<std::string>(), e.provenance.size()));
    e.meta_background.origin = BackgroundOrigin::kTrainingSample;
    e.meta_background.seed =
        std::stoull(m.at("meta_background_seed").get<std::string>());

    const Matrix tm = MatrixFromCsv(root / files.at("meta_features").get<std::string>(),
                                    e.provenance.size() + 1);
    e.training_meta.mode = e.config.mode;
    e.training_meta.task = e.task;
    e.training_meta.provenance = e.provenance;
    e.training_meta.features = Matrix(tm.rows(), e.provenance.size());
    for (std::size_t i = 0; i < tm.rows(); ++i) {
      for (std::size_t j = 0; j < e.provenance.size(); ++j) {
        e.training_meta.features(i, j) = tm(i, j);
      }
      e.training_meta.targets.push_back(tm(i, e.provenance.size()));
    }

    const auto& s = m.at("summary");
    e.summary.n_rows = s.at("n_rows").get<std::size_t>();
    e.summary.n_features = s.at("n_features").get<std::size_t>();
    e.summary.n_learners = s.at("n_learners").get<std::size_t>();
    e.summary.meta_width = s.at("meta_width").get<std::size_t>();
    e.summary.training_metric = s.at("training_metric").at("value").get<double>();
    e.summary.training_metric_name =
        s.at("training_metric").at("name").get<std::string>();
    e.summary.warnings = s.at("warnings").get<std::vector<std::string>>();
    for (const auto& c : s.at("convergence")) {
      e.summary.convergence.emplace_back(c.at("model").get<std::string>(),
                                         c.at("converged").get<bool>());
    }
  } catch (const nlohmann::json::exception& ex) {
    ThrowData("malformed ensemble manifest: " + std::string(ex.what()));
  }

  if (e.base_models.empty() || e.base_models.size() != e.config.base_specs.size()) {
    ThrowData("ensemble manifest lists an inconsistent number of base models");
  }
  for (const auto& bm : e.base_models) {
    if (bm->n_features() != e.feature_names.size()) {
      ThrowData("base model input width does not match the feature schema");
    }
  }
  if (e.meta_model->n_features() != e.provenance.size()) {
    ThrowData("meta model input width does not match provenance");
  }
  return e;
}

}  // namespace xstacking
