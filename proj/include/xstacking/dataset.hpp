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

#ifndef XSTACKING_DATASET_HPP_
#define XSTACKING_DATASET_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "xstacking/common.hpp"

namespace xstacking {

class TaskKind {
 public:
  static TaskKind Classification(int num_classes);
  static TaskKind Regression() { return TaskKind(false, 0); }

  bool is_classification() const noexcept { return classification_; }
  bool is_regression() const noexcept { return !classification_; }
  /// Zero for regression.
  int num_classes() const noexcept { return num_classes_; }

  std::string to_string() const;

  friend bool operator==(const TaskKind&, const TaskKind&) = default;

 private:
  TaskKind(bool classification, int num_classes)
      : classification_(classification), num_classes_(num_classes) {}

  bool classification_;
  int num_classes_;
};

/// Task requested at load time; the class count is discovered from the file.
enum class TaskType { kClassification, kRegression };

TaskType ParseTaskType(std::string_view name);

/// Tabular dataset: m rows by d feature columns plus one target per row.
/// Classification targets are class indices stored as doubles.
struct Dataset {
  Matrix features;
  std::vector<double> targets;
  TaskKind task = TaskKind::Regression();
  std::vector<std::string> feature_names;
  /// Original label text for each class index (classification only).
  std::vector<std::string> class_labels;
  std::string target_name = "target";

  std::size_t m() const noexcept { return features.rows(); }
  std::size_t d() const noexcept { return features.cols(); }
  int label(std::size_t i) const { return static_cast<int>(targets[i]); }

  /// Throws a data error if any invariant is broken.
  void validate() const;

  Dataset subset(std::span<const std::size_t> rows) const;
  /// Class index vector (classification only).
  std::vector<int> labels() const;
};

/// Target column selector: header name or zero-based index.
using ColumnRef = std::variant<std::string, std::size_t>;

/// Loads a CSV file with a header row. Classification labels that are exactly
/// the integers 0..C-1 are used as-is; anything else is encoded in first-seen
/// order.
Dataset LoadCsv(const std::string& path, const ColumnRef& target,
                TaskType task);
Dataset ParseCsv(std::string_view text, const ColumnRef& target, TaskType task,
                 const std::string& source_name = "<memory>");

/// Writes features followed by the target column; numbers use 17 significant
/// digits so LoadCsv(WriteCsv(ds)) reproduces ds exactly.
void WriteCsv(const Dataset& ds, const std::string& path);
std::string FormatCsv(const Dataset& ds);

/// Raw CSV table used by the predict/explain paths where the schema is
/// matched by column name.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> cells;
};
CsvTable ReadCsvTable(const std::string& path);
CsvTable ParseCsvTable(std::string_view text, const std::string& source_name);

struct FoldAssignment {
  std::vector<int> fold_of;
  int n_folds = 0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> train_indices(int fold) const;
  std::vector<std::size_t> test_indices(int fold) const;
  std::vector<std::size_t> fold_sizes() const;

  friend bool operator==(const FoldAssignment&,
                         const FoldAssignment&) = default;
};

/// Deterministic (optionally stratified) k-fold assignment. Fold sizes differ
/// by at most one; with strata, per-class counts differ by at most one.
FoldAssignment KFoldSplit(std::size_t m, int n_folds, std::uint64_t seed,
                          const std::vector<int>* strata = nullptr);

/// Returns (train, test). Row order inside each part follows the source.
std::pair<Dataset, Dataset> TrainTestSplit(const Dataset& ds,
                                           double test_fraction,
                                           std::uint64_t seed,
                                           bool stratified);

/// Per-column affine map to zero mean and unit (population) variance.
/// Zero-variance columns map to zero.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // 0 marks a constant column

  static Standardizer Fit(const Matrix& features);
  static Standardizer Identity(std::size_t d);

  void apply_row(std::span<const double> in, std::span<double> out) const;
  Matrix apply(const Matrix& features) const;
  Dataset apply(const Dataset& ds) const;
  Matrix inverse(const Matrix& standardized) const;
};

}  // namespace xstacking

#endif  // XSTACKING_DATASET_HPP_
