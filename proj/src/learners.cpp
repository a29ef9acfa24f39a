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

#include "xstacking/learners.hpp"

#include <algorithm>
#include <cmath>

namespace xstacking {

namespace {

constexpr int kModelFormatVersion = 1;

struct FamilyInfo {
  Family family;
  const char* name;
  std::vector<const char*> aliases;
};

const std::vector<FamilyInfo>& Families() {
  static const std::vector<FamilyInfo> kFamilies = {
      {Family::kDecisionTree, "decision_tree", {"tree", "dt", "cart"}},
      {Family::kLinearRegression, "linear_regression", {"linear", "ols"}},
      {Family::kLogisticRegression, "logistic_regression", {"logistic", "lr"}},
      {Family::kMlp, "mlp", {"neural_network", "nn"}},
      {Family::kLinearSvm, "linear_svm", {"svm"}},
      {Family::kLinearSvr, "linear_svr", {"svr"}},
      {Family::kGradientBoostedTrees,
       "gradient_boosted_trees",
       {"gbt", "boosted_trees", "gbdt"}},
  };
  return kFamilies;
}

// Integer-valued hyperparameters and their lower bounds.
struct Bound {
  double min;
  bool inclusive;
  bool integer;
};

const std::map<std::string, Bound>& BoundsFor(Family f) {
  static const std::map<Family, std::map<std::string, Bound>> kBounds = {
      {Family::kDecisionTree,
       {{"max_depth", {0, true, true}}, {"min_samples_leaf", {1, true, true}}}},
      {Family::kLinearRegression, {{"l2", {0, true, false}}}},
      {Family::kLogisticRegression,
       {{"l2", {0, true, false}},
        {"learning_rate", {0, false, false}},
        {"epochs", {1, true, true}}}},
      {Family::kMlp,
       {{"hidden_units", {1, true, true}},
        {"hidden_layers", {1, true, true}},
        {"learning_rate", {0, false, false}},
        {"epochs", {1, true, true}},
        {"batch_size", {1, true, true}}}},
      {Family::kLinearSvm,
       {{"l2", {0, false, false}}, {"epochs", {1, true, true}}}},
      {Family::kLinearSvr,
       {{"l2", {0, false, false}},
        {"epochs", {1, true, true}},
        {"epsilon", {0, true, false}}}},
      {Family::kGradientBoostedTrees,
       {{"n_rounds", {1, true, true}},
        {"learning_rate", {0, false, false}},
        {"max_depth", {0, true, true}},
        {"min_samples_leaf", {1, true, true}}}},
  };
  return kBounds.at(f);
}

}  // namespace

std::string FamilyName(Family f) {
  for (const auto& info : Families()) {
    if (info.family == f) return info.name;
  }
  return "unknown";
}

Family ParseFamily(std::string_view name) {
  const std::string n = Trim(name);
  for (const auto& info : Families()) {
    if (n == info.name) return info.family;
    for (const char* alias : info.aliases) {
      if (n == alias) return info.family;
    }
  }
  ThrowUsage("unknown learner family '" + n + "'");
}

std::map<std::string, double> DefaultHyperparameters(Family f) {
  switch (f) {
    case Family::kDecisionTree:
      return {{"max_depth", 8}, {"min_samples_leaf", 2}};
    case Family::kLinearRegression:
      return {{"l2", 1e-8}};
    case Family::kLogisticRegression:
      return {{"l2", 1e-3}, {"learning_rate", 0.1}, {"epochs", 500}};
    case Family::kMlp:
      return {{"hidden_units", 32},
              {"hidden_layers", 1},
              {"learning_rate", 0.01},
              {"epochs", 300},
              {"batch_size", 32}};
    case Family::kLinearSvm:
      return {{"l2", 1e-3}, {"epochs", 200}};
    case Family::kLinearSvr:
      return {{"l2", 1e-3}, {"epochs", 200}, {"epsilon", 0.1}};
    case Family::kGradientBoostedTrees:
      return {{"n_rounds", 200},
              {"learning_rate", 0.1},
              {"max_depth", 3},
              {"min_samples_leaf", 5}};
  }
  return {};
}

LearnerSpec LearnerSpec::Parse(std::string_view text) {
  const std::string t = Trim(text);
  const auto colon = t.find(':');
  LearnerSpec spec;
  spec.family = ParseFamily(t.substr(0, colon));
  if (colon != std::string::npos) {
    for (const auto& item : Split(std::string_view(t).substr(colon + 1), ',')) {
      if (Trim(item).empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) {
        ThrowUsage("hyperparameter '" + item + "' is not key=value");
      }
      const std::string key = Trim(std::string_view(item).substr(0, eq));
      double value;
      if (!ParseDouble(std::string_view(item).substr(eq + 1), value)) {
        ThrowUsage("hyperparameter '" + key + "' has non-numeric value");
      }
      if (key == "seed") {
        spec.seed = std::stoull(Trim(std::string_view(item).substr(eq + 1)));
      } else {
        spec.hyperparameters[key] = value;
      }
    }
  }
  return spec.resolved();
}

LearnerSpec LearnerSpec::resolved() const {
  LearnerSpec out = *this;
  const auto& bounds = BoundsFor(family);
  for (const auto& [key, value] : hyperparameters) {
    auto it = bounds.find(key);
    if (it == bounds.end()) {
      ThrowUsage("unknown hyperparameter '" + key + "' for " +
                 FamilyName(family));
    }
    const Bound& b = it->second;
    const bool ok = std::isfinite(value) &&
                    (b.inclusive ? value >= b.min : value > b.min) &&
                    (!b.integer || value == std::floor(value));
    if (!ok) {
      ThrowUsage("invalid value " + FormatDouble(value) + " for " +
                 FamilyName(family) + "." + key);
    }
  }
  for (const auto& [key, value] : DefaultHyperparameters(family)) {
    out.hyperparameters.emplace(key, value);
  }
  return out;
}

double LearnerSpec::get(const std::string& key) const {
  auto it = hyperparameters.find(key);
  if (it != hyperparameters.end()) return it->second;
  const auto defaults = DefaultHyperparameters(family);
  auto dit = defaults.find(key);
  if (dit == defaults.end()) {
    ThrowUsage("no hyperparameter '" + key + "' for " + FamilyName(family));
  }
  return dit->second;
}

int LearnerSpec::get_int(const std::string& key) const {
  return static_cast<int>(get(key));
}

std::string LearnerSpec::to_string() const {
  const LearnerSpec r = resolved();
  std::string out = FamilyName(family);
  char sep = ':';
  for (const auto& [key, value] : r.hyperparameters) {
    out += sep;
    out += key + "=" + FormatDouble(value);
    sep = ',';
  }
  if (seed != 0) out += std::string(1, sep) + "seed=" + std::to_string(seed);
  return out;
}

nlohmann::json LearnerSpec::to_json() const {
  const LearnerSpec r = resolved();
  nlohmann::json hp = nlohmann::json::object();
  for (const auto& [key, value] : r.hyperparameters) {
    hp[key] = FormatDouble(value);
  }
  return {{"family", FamilyName(family)},
          {"hyperparameters", hp},
          {"seed", std::to_string(seed)}};
}

LearnerSpec LearnerSpec::FromJson(const nlohmann::json& j) {
  LearnerSpec spec;
  spec.family = ParseFamily(j.at("family").get<std::string>());
  if (j.contains("hyperparameters")) {
    for (const auto& [key, value] : j.at("hyperparameters").items()) {
      double v;
      if (value.is_string()) {
        if (!ParseDouble(value.get<std::string>(), v)) {
          ThrowData("bad hyperparameter value for '" + key + "'");
        }
      } else {
        v = value.get<double>();
      }
      spec.hyperparameters[key] = v;
    }
  }
  if (j.contains("seed")) {
    const auto& s = j.at("seed");
    spec.seed = s.is_string() ? std::stoull(s.get<std::string>())
                              : s.get<std::uint64_t>();
  }
  return spec.resolved();
}

void CheckFamilySupportsTask(Family f, const TaskKind& task) {
  const bool clf = task.is_classification();
  if ((f == Family::kLogisticRegression || f == Family::kLinearSvm) && !clf) {
    ThrowUsage(FamilyName(f) + " requires a classification task");
  }
  if ((f == Family::kLinearRegression || f == Family::kLinearSvr) && clf) {
    ThrowUsage(FamilyName(f) + " requires a regression task");
  }
}

std::vector<double> Model::predict_score(std::span<const double> x) const {
  if (x.size() != n_features_) {
    ThrowData("input has " + std::to_string(x.size()) +
              " features, model expects " + std::to_string(n_features_));
  }
  std::vector<double> out(n_outputs());
  predict_into(x, out);
  return out;
}

int Model::predict_label(std::span<const double> x) const {
  const auto scores = predict_score(x);
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) -
                          scores.begin());
}

double Model::predict_value(std::span<const double> x) const {
  if (task_.is_classification()) return predict_label(x);
  return predict_score(x)[0];
}

nlohmann::json Model::to_json() const {
  nlohmann::json task = {{"kind", task_.to_string()},
                         {"num_classes", task_.num_classes()}};
  return {{"format", "xstacking-model"},
          {"version", kModelFormatVersion},
          {"spec", spec_.to_json()},
          {"task", task},
          {"n_features", n_features_},
          {"converged", converged_},
          {"params", params_json()}};
}

ModelPtr Fit(const LearnerSpec& raw_spec, const Dataset& ds) {
  const LearnerSpec spec = raw_spec.resolved();
  ds.validate();
  CheckFamilySupportsTask(spec.family, ds.task);
  switch (spec.family) {
    case Family::kDecisionTree:
      return FitDecisionTree(spec, ds);
    case Family::kLinearRegression:
      return FitLinearRegression(spec, ds);
    case Family::kLogisticRegression:
      return FitLogisticRegression(spec, ds);
    case Family::kMlp:
      return FitMlp(spec, ds);
    case Family::kLinearSvm:
      return FitLinearSvm(spec, ds);
    case Family::kLinearSvr:
      return FitLinearSvr(spec, ds);
    case Family::kGradientBoostedTrees:
      return FitGradientBoostedTrees(spec, ds);
  }
  ThrowUsage("unsupported family");
}

nlohmann::json DoublesToJson(std::span<const double> values) {
  nlohmann::json arr = nlohmann::json::array();
  for (double v : values) arr.push_back(FormatDouble(v));
  return arr;
}

std::vector<double> DoublesFromJson(const nlohmann::json& j) {
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& item : j) {
    double v;
    if (!ParseDouble(item.get<std::string>(), v)) {
      ThrowData("malformed number in model document");
    }
    out.push_back(v);
  }
  return out;
}

namespace {

Matrix MatrixFromJson(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  Matrix m(rows, cols);
  m.data() = DoublesFromJson(j.at("data"));
  if (m.data().size() != rows * cols) ThrowData("matrix size mismatch");
  return m;
}

LinearLink ParseLink(const std::string& s) {
  if (s == "identity") return LinearLink::kIdentity;
  if (s == "sigmoid") return LinearLink::kSigmoid;
  if (s == "softmax") return LinearLink::kSoftmax;
  if (s == "ovr_sigmoid") return LinearLink::kOvrSigmoid;
  ThrowData("unknown link '" + s + "'");
}

}  // namespace

ModelPtr ModelFromJson(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "xstacking-model") {
      ThrowData("not an xstacking model document");
    }
    if (j.at("version").get<int>() != kModelFormatVersion) {
      ThrowData("unsupported model version");
    }
    const LearnerSpec spec = LearnerSpec::FromJson(j.at("spec"));
    const auto& tj = j.at("task");
    const TaskKind task =
        tj.at("kind").get<std::string>() == "classification"
            ? TaskKind::Classification(tj.at("num_classes").get<int>())
            : TaskKind::Regression();
    const auto d = j.at("n_features").get<std::size_t>();
    const bool converged = j.at("converged").get<bool>();
    const auto& p = j.at("params");

    switch (spec.family) {
      case Family::kDecisionTree:
        return std::make_shared<DecisionTreeModel>(spec, task, d,
                                                   Tree::FromJson(p.at("tree")));
      case Family::kLinearRegression:
      case Family::kLogisticRegression:
      case Family::kLinearSvm:
      case Family::kLinearSvr:
        return std::make_shared<LinearModel>(
            spec, task, MatrixFromJson(p.at("weights")),
            DoublesFromJson(p.at("bias")),
            ParseLink(p.at("link").get<std::string>()), converged);
      case Family::kMlp: {
        std::vector<int> sizes = p.at("layer_sizes").get<std::vector<int>>();
        MlpNetwork net(sizes);
        net.params() = DoublesFromJson(p.at("params"));
        const auto ts = DoublesFromJson(p.at("target_transform"));
        return std::make_shared<MlpModel>(spec, task, d, std::move(net), ts.at(0),
                                          ts.at(1), converged);
      }
      case Family::kGradientBoostedTrees: {
        std::vector<std::vector<Tree>> trees;
        for (const auto& booster : p.at("boosters")) {
          std::vector<Tree> ts;
          for (const auto& t : booster) ts.push_back(Tree::FromJson(t));
          trees.push_back(std::move(ts));
        }
        return std::make_shared<BoostedTreesModel>(
            spec, task, d, DoublesFromJson(p.at("base_scores")),
            std::move(trees), DoublesFromJson(p.at("loss_history")));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    ThrowData(std::string("malformed model document: ") + e.what());
  }
  ThrowData("unsupported model family");
}

}  // namespace xstacking
