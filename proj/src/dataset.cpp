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

#include "xstacking/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace xstacking {

TaskKind TaskKind::Classification(int num_classes) {
  if (num_classes < 2) {
    ThrowData("classification requires at least 2 classes, got " +
              std::to_string(num_classes));
  }
  return TaskKind(true, num_classes);
}

std::string TaskKind::to_string() const {
  return classification_ ? "classification" : "regression";
}

TaskType ParseTaskType(std::string_view name) {
  const std::string n = Trim(name);
  if (n == "classification" || n == "class" || n == "clf") {
    return TaskType::kClassification;
  }
  if (n == "regression" || n == "reg") return TaskType::kRegression;
  ThrowUsage("unknown task '" + n + "' (expected classification|regression)");
}

void Dataset::validate() const {
  if (m() < 1) ThrowData("dataset has no rows");
  if (d() < 1) ThrowData("dataset has no feature columns");
  if (targets.size() != m()) ThrowData("target length does not match rows");
  if (feature_names.size() != d()) {
    ThrowData("feature_names length does not match feature columns");
  }
  std::set<std::string> seen(feature_names.begin(), feature_names.end());
  if (seen.size() != feature_names.size()) {
    ThrowData("feature names are not unique");
  }
  for (std::size_t i = 0; i < m(); ++i) {
    for (std::size_t j = 0; j < d(); ++j) {
      if (!std::isfinite(features(i, j))) {
        ThrowData("non-finite feature value at row " + std::to_string(i) +
                  ", column '" + feature_names[j] + "'");
      }
    }
  }
  if (task.is_classification()) {
    for (double t : targets) {
      if (t != std::floor(t) || t < 0 || t >= task.num_classes()) {
        ThrowData("classification target out of range: " + FormatDouble(t));
      }
    }
  } else {
    for (double t : targets) {
      if (!std::isfinite(t)) ThrowData("non-finite regression target");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.features = features.select_rows(rows);
  out.targets.reserve(rows.size());
  for (std::size_t r : rows) out.targets.push_back(targets[r]);
  out.task = task;
  out.feature_names = feature_names;
  out.class_labels = class_labels;
  out.target_name = target_name;
  return out;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) out[i] = label(i);
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> SplitCsvLine(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(Trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(Trim(cur));
  return out;
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) ThrowData("cannot open file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string QuoteIfNeeded(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

CsvTable ParseCsvTable(std::string_view text, const std::string& source_name) {
  CsvTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  // Strip a UTF-8 byte order mark.
  if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
  bool have_header = false;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    if (Trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    auto cells = SplitCsvLine(line);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      std::set<std::string> seen;
      for (const auto& h : table.header) {
        if (h.empty()) {
          ThrowData(source_name + ": empty header name");
        }
        if (!seen.insert(h).second) {
          ThrowData(source_name + ": duplicate header name '" + h + "'");
        }
      }
    } else {
      if (cells.size() != table.header.size()) {
        ThrowData(source_name + ": line " + std::to_string(line_no) +
                  " has " + std::to_string(cells.size()) +
                  " cells, header has " +
                  std::to_string(table.header.size()));
      }
      table.cells.push_back(std::move(cells));
    }
    if (end == text.size()) break;
  }
  if (!have_header) ThrowData(source_name + ": missing header row");
  return table;
}

CsvTable ReadCsvTable(const std::string& path) {
  return ParseCsvTable(ReadFile(path), path);
}

namespace {

std::size_t ResolveTarget(const CsvTable& table, const ColumnRef& target,
                          const std::string& source_name) {
  if (const auto* name = std::get_if<std::string>(&target)) {
    auto it = std::find(table.header.begin(), table.header.end(), *name);
    if (it == table.header.end()) {
      ThrowData(source_name + ": target column '" + *name + "' not found");
    }
    return static_cast<std::size_t>(it - table.header.begin());
  }
  const std::size_t idx = std::get<std::size_t>(target);
  if (idx >= table.header.size()) {
    ThrowData(source_name + ": target column index " + std::to_string(idx) +
              " out of range");
  }
  return idx;
}

}  // namespace

Dataset ParseCsv(std::string_view text, const ColumnRef& target, TaskType task,
                 const std::string& source_name) {
  CsvTable table = ParseCsvTable(text, source_name);
  const std::size_t target_col = ResolveTarget(table, target, source_name);
  if (table.header.size() < 2) {
    ThrowData(source_name + ": need at least one feature column");
  }
  if (table.cells.empty()) ThrowData(source_name + ": dataset has no rows");

  Dataset ds;
  ds.target_name = table.header[target_col];
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c != target_col) ds.feature_names.push_back(table.header[c]);
  }
  const std::size_t m = table.cells.size();
  const std::size_t d = ds.feature_names.size();
  ds.features = Matrix(m, d);
  ds.targets.resize(m);

  for (std::size_t r = 0; r < m; ++r) {
    std::size_t j = 0;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (c == target_col) continue;
      double v;
      if (!ParseDouble(table.cells[r][c], v) || !std::isfinite(v)) {
        ThrowData(source_name + ": non-numeric or non-finite value '" +
                  table.cells[r][c] + "' at row " + std::to_string(r + 1) +
                  ", column '" + table.header[c] + "'");
      }
      ds.features(r, j++) = v;
    }
  }

  if (task == TaskType::kRegression) {
    for (std::size_t r = 0; r < m; ++r) {
      double v;
      if (!ParseDouble(table.cells[r][target_col], v) || !std::isfinite(v)) {
        ThrowData(source_name + ": non-numeric target '" +
                  table.cells[r][target_col] + "' at row " +
                  std::to_string(r + 1));
      }
      ds.targets[r] = v;
    }
    ds.task = TaskKind::Regression();
  } else {
    // Integer labels forming exactly {0..C-1} are kept; everything else is
    // encoded in first-seen order.
    std::vector<std::string> first_seen;
    std::unordered_map<std::string, int> code;
    for (std::size_t r = 0; r < m; ++r) {
      const std::string& label = table.cells[r][target_col];
      if (label.empty()) {
        ThrowData(source_name + ": empty target at row " +
                  std::to_string(r + 1));
      }
      if (code.emplace(label, static_cast<int>(first_seen.size())).second) {
        first_seen.push_back(label);
      }
    }
    const int num_classes = static_cast<int>(first_seen.size());
    if (num_classes < 2) {
      ThrowData(source_name + ": classification target '" + ds.target_name +
                "' has a single class");
    }
    bool integer_coded = true;
    std::vector<bool> present(static_cast<std::size_t>(num_classes), false);
    for (const auto& label : first_seen) {
      double v;
      if (!ParseDouble(label, v) || v != std::floor(v) || v < 0 ||
          v >= num_classes) {
        integer_coded = false;
        break;
      }
      present[static_cast<std::size_t>(v)] = true;
    }
    if (integer_coded) {
      integer_coded =
          std::all_of(present.begin(), present.end(), [](bool b) { return b; });
    }
    ds.class_labels.assign(static_cast<std::size_t>(num_classes), "");
    for (const auto& label : first_seen) {
      int idx = code[label];
      if (integer_coded) {
        double v;
        ParseDouble(label, v);
        idx = static_cast<int>(v);
        code[label] = idx;
      }
      ds.class_labels[static_cast<std::size_t>(idx)] = label;
    }
    for (std::size_t r = 0; r < m; ++r) {
      ds.targets[r] = code[table.cells[r][target_col]];
    }
    ds.task = TaskKind::Classification(num_classes);
  }
  ds.validate();
  return ds;
}

Dataset LoadCsv(const std::string& path, const ColumnRef& target,
                TaskType task) {
  return ParseCsv(ReadFile(path), target, task, path);
}

std::string FormatCsv(const Dataset& ds) {
  std::string out;
  for (const auto& name : ds.feature_names) {
    out += QuoteIfNeeded(name);
    out += ',';
  }
  out += QuoteIfNeeded(ds.target_name);
  out += '\n';
  for (std::size_t i = 0; i < ds.m(); ++i) {
    for (std::size_t j = 0; j < ds.d(); ++j) {
      out += FormatDouble(ds.features(i, j));
      out += ',';
    }
    if (ds.task.is_classification() && !ds.class_labels.empty()) {
      out += QuoteIfNeeded(ds.class_labels[static_cast<std::size_t>(ds.label(i))]);
    } else if (ds.task.is_classification()) {
      out += std::to_string(ds.label(i));
    } else {
      out += FormatDouble(ds.targets[i]);
    }
    out += '\n';
  }
  return out;
}

void WriteCsv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) ThrowData("cannot write '" + path + "'");
  out << FormatCsv(ds);
}

// ---------------------------------------------------------------------------
// Folds and splits

std::vector<std::size_t> FoldAssignment::train_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::test_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(n_folds), 0);
  for (int f : fold_of) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

FoldAssignment KFoldSplit(std::size_t m, int n_folds, std::uint64_t seed,
                          const std::vector<int>* strata) {
  if (n_folds < 2 || static_cast<std::size_t>(n_folds) > m) {
    ThrowUsage("n_folds must be in [2, m]; got n_folds=" +
               std::to_string(n_folds) + ", m=" + std::to_string(m));
  }
  if (strata && strata->size() != m) {
    ThrowUsage("strata length does not match instance count");
  }
  FoldAssignment fa;
  fa.n_folds = n_folds;
  fa.seed = seed;
  fa.fold_of.assign(m, 0);
  Rng rng(seed);

  // Each group is shuffled and dealt round-robin with a counter that carries
  // over between groups. Overall sizes and per-group counts then differ by at
  // most one.
  std::vector<std::vector<std::size_t>> groups;
  if (strata) {
    const int max_class =
        m == 0 ? 0 : *std::max_element(strata->begin(), strata->end());
    groups.resize(static_cast<std::size_t>(max_class) + 1);
    for (std::size_t i = 0; i < m; ++i) {
      groups[static_cast<std::size_t>((*strata)[i])].push_back(i);
    }
  } else {
    groups.emplace_back(m);
    std::iota(groups[0].begin(), groups[0].end(), std::size_t{0});
  }
  std::size_t counter = 0;
  for (auto& group : groups) {
    rng.shuffle(group);
    for (std::size_t idx : group) {
      fa.fold_of[idx] = static_cast<int>(counter % static_cast<std::size_t>(n_folds));
      ++counter;
    }
  }
  return fa;
}

std::pair<Dataset, Dataset> TrainTestSplit(const Dataset& ds,
                                           double test_fraction,
                                           std::uint64_t seed,
                                           bool stratified) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    ThrowUsage("test_fraction must be in (0, 1)");
  }
  Rng rng(seed);
  std::vector<bool> is_test(ds.m(), false);

  auto take = [&](std::vector<std::size_t> idx, const std::string& what) {
    const auto n = static_cast<double>(idx.size());
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * n));
    if (n_test < 1 || n_test >= idx.size()) {
      ThrowUsage("train/test split infeasible for " + what + " (" +
                 std::to_string(idx.size()) + " rows)");
    }
    rng.shuffle(idx);
    for (std::size_t i = 0; i < n_test; ++i) is_test[idx[i]] = true;
  };

  if (stratified) {
    if (!ds.task.is_classification()) {
      ThrowUsage("stratified split requires a classification task");
    }
    std::vector<std::vector<std::size_t>> by_class(
        static_cast<std::size_t>(ds.task.num_classes()));
    for (std::size_t i = 0; i < ds.m(); ++i) {
      by_class[static_cast<std::size_t>(ds.label(i))].push_back(i);
    }
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      take(by_class[c], "class " + std::to_string(c));
    }
  } else {
    std::vector<std::size_t> all(ds.m());
    std::iota(all.begin(), all.end(), std::size_t{0});
    take(all, "dataset");
  }

  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  for (std::size_t i = 0; i < ds.m(); ++i) {
    (is_test[i] ? test_rows : train_rows).push_back(i);
  }
  return {ds.subset(train_rows), ds.subset(test_rows)};
}

// ---------------------------------------------------------------------------
// Standardizer

Standardizer Standardizer::Fit(const Matrix& features) {
  const std::size_t m = features.rows();
  const std::size_t d = features.cols();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  if (m == 0) return s;
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) sum += features(i, j);
    const double mu = sum / static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double diff = features(i, j) - mu;
      ss += diff * diff;
    }
    const double sd = std::sqrt(ss / static_cast<double>(m));
    s.mean[j] = mu;
    s.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(mu)) ? sd : 0.0;
  }
  return s;
}

Standardizer Standardizer::Identity(std::size_t d) {
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 1.0);
  return s;
}

void Standardizer::apply_row(std::span<const double> in,
                             std::span<double> out) const {
  for (std::size_t j = 0; j < in.size(); ++j) {
    out[j] = scale[j] == 0.0 ? 0.0 : (in[j] - mean[j]) / scale[j];
  }
}

Matrix Standardizer::apply(const Matrix& features) const {
  if (features.cols() != mean.size()) {
    ThrowData("standardizer width mismatch");
  }
  Matrix out(features.rows(), features.cols());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    apply_row(features.row(i), out.row(i));
  }
  return out;
}

Dataset Standardizer::apply(const Dataset& ds) const {
  Dataset out = ds;
  out.features = apply(ds.features);
  return out;
}

Matrix Standardizer::inverse(const Matrix& standardized) const {
  Matrix out(standardized.rows(), standardized.cols());
  for (std::size_t i = 0; i < standardized.rows(); ++i) {
    for (std::size_t j = 0; j < standardized.cols(); ++j) {
      out(i, j) = scale[j] == 0.0 ? mean[j]
                                  : standardized(i, j) * scale[j] + mean[j];
    }
  }
  return out;
}

}  // namespace xstacking
