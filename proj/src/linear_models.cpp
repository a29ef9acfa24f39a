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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "xstacking/learners.hpp"

namespace xstacking {

namespace {

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double Softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

const char* LinkName(LinearLink link) {
  switch (link) {
    case LinearLink::kIdentity:
      return "identity";
    case LinearLink::kSigmoid:
      return "sigmoid";
    case LinearLink::kSoftmax:
      return "softmax";
    case LinearLink::kOvrSigmoid:
      return "ovr_sigmoid";
  }
  return "identity";
}

bool RelativeChangeSmall(double prev, double cur, double tol) {
  return std::abs(cur - prev) <= tol * std::max(1.0, std::abs(prev));
}

}  // namespace

LinearModel::LinearModel(LearnerSpec spec, TaskKind task, Matrix weights,
                         std::vector<double> bias, LinearLink link,
                         bool converged)
    : Model(std::move(spec), task, weights.cols(), converged),
      weights_(std::move(weights)),
      bias_(std::move(bias)),
      link_(link) {
  if (bias_.size() != weights_.rows()) {
    ThrowData("linear model: bias/weights row mismatch");
  }
  const std::size_t rows = weights_.rows();
  const bool ok =
      (link_ == LinearLink::kIdentity && rows == 1 && task.is_regression()) ||
      (link_ == LinearLink::kSigmoid && rows == 1 &&
       task.is_classification() && task.num_classes() == 2) ||
      ((link_ == LinearLink::kSoftmax || link_ == LinearLink::kOvrSigmoid) &&
       task.is_classification() &&
       rows == static_cast<std::size_t>(task.num_classes()));
  if (!ok) ThrowData("linear model: link incompatible with task/weights");
}

void LinearModel::predict_into(std::span<const double> x,
                               std::span<double> out) const {
  const std::size_t d = weights_.cols();
  auto margin = [&](std::size_t r) {
    const auto w = weights_.row(r);
    double z = bias_[r];
    for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
    return z;
  };
  switch (link_) {
    case LinearLink::kIdentity:
      out[0] = margin(0);
      return;
    case LinearLink::kSigmoid: {
      const double p = Sigmoid(margin(0));
      out[0] = 1.0 - p;
      out[1] = p;
      return;
    }
    case LinearLink::kSoftmax: {
      double max_z = -INFINITY;
      for (std::size_t c = 0; c < out.size(); ++c) {
        out[c] = margin(c);
        max_z = std::max(max_z, out[c]);
      }
      double sum = 0.0;
      for (double& v : out) {
        v = std::exp(v - max_z);
        sum += v;
      }
      for (double& v : out) v /= sum;
      return;
    }
    case LinearLink::kOvrSigmoid: {
      double sum = 0.0;
      for (std::size_t c = 0; c < out.size(); ++c) {
        out[c] = Sigmoid(margin(c));
        sum += out[c];
      }
      if (sum <= 0.0) {
        std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
        return;
      }
      for (double& v : out) v /= sum;
      return;
    }
  }
}

nlohmann::json LinearModel::params_json() const {
  return {{"link", LinkName(link_)},
          {"weights",
           {{"rows", weights_.rows()},
            {"cols", weights_.cols()},
            {"data", DoublesToJson(weights_.data())}}},
          {"bias", DoublesToJson(bias_)}};
}

// ---------------------------------------------------------------------------
// Linear regression: centered normal equations. The ridge term only
// conditions the factorization; two refinement steps against the
// unregularized system remove its bias on well-posed problems.

ModelPtr FitLinearRegression(const LearnerSpec& spec, const Dataset& ds) {
  const std::size_t m = ds.m();
  const std::size_t d = ds.d();
  const double ridge = spec.get("l2");

  std::vector<double> x_mean(d, 0.0);
  double y_mean = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) x_mean[j] += ds.features(i, j);
    y_mean += ds.targets[i];
  }
  for (double& v : x_mean) v /= static_cast<double>(m);
  y_mean /= static_cast<double>(m);

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                               static_cast<Eigen::Index>(d));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  std::vector<double> xc(d);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) xc[j] = ds.features(i, j) - x_mean[j];
    const double yc = ds.targets[i] - y_mean;
    for (std::size_t a = 0; a < d; ++a) {
      rhs(static_cast<Eigen::Index>(a)) += xc[a] * yc;
      for (std::size_t b = a; b < d; ++b) {
        gram(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +=
            xc[a] * xc[b];
      }
    }
  }
  gram = gram.selfadjointView<Eigen::Upper>();

  Eigen::MatrixXd regularized = gram;
  regularized.diagonal().array() += ridge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(regularized);
  Eigen::VectorXd w = ldlt.solve(rhs);
  if (ridge > 0) {
    for (int step = 0; step < 2; ++step) {
      w += ldlt.solve(rhs - gram * w);
    }
  }
  bool converged = w.allFinite();
  if (!converged) w.setZero();

  Matrix weights(1, d);
  double bias = y_mean;
  for (std::size_t j = 0; j < d; ++j) {
    weights(0, j) = w(static_cast<Eigen::Index>(j));
    bias -= weights(0, j) * x_mean[j];
  }
  return std::make_shared<LinearModel>(spec, ds.task, std::move(weights),
                                       std::vector<double>{bias},
                                       LinearLink::kIdentity, converged);
}

// ---------------------------------------------------------------------------
// Logistic regression: full-batch gradient descent on mean log-loss plus
// 0.5 * l2 * |w|^2 (bias not penalized). Sigmoid for two classes, softmax
// otherwise.

namespace {

struct LogisticState {
  Matrix w;
  std::vector<double> b;
};

double LogisticObjective(const Dataset& ds, const LogisticState& s, double l2,
                         bool binary, Matrix* grad_w,
                         std::vector<double>* grad_b) {
  const std::size_t m = ds.m();
  const std::size_t d = ds.d();
  const std::size_t rows = s.w.rows();
  if (grad_w) {
    *grad_w = Matrix(rows, d);
    grad_b->assign(rows, 0.0);
  }
  std::vector<double> z(rows);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto x = ds.features.row(i);
    const int y = ds.label(i);
    for (std::size_t r = 0; r < rows; ++r) {
      double v = s.b[r];
      const auto w = s.w.row(r);
      for (std::size_t j = 0; j < d; ++j) v += w[j] * x[j];
      z[r] = v;
    }
    if (binary) {
      const double t = y == 1 ? 1.0 : 0.0;
      loss += Softplus(z[0]) - t * z[0];
      if (grad_w) {
        const double g = Sigmoid(z[0]) - t;
        auto gw = grad_w->row(0);
        for (std::size_t j = 0; j < d; ++j) gw[j] += g * x[j];
        (*grad_b)[0] += g;
      }
    } else {
      const double max_z = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double v : z) sum += std::exp(v - max_z);
      const double log_norm = max_z + std::log(sum);
      loss += log_norm - z[static_cast<std::size_t>(y)];
      if (grad_w) {
        for (std::size_t r = 0; r < rows; ++r) {
          const double g = std::exp(z[r] - log_norm) -
                           (static_cast<int>(r) == y ? 1.0 : 0.0);
          auto gw = grad_w->row(r);
          for (std::size_t j = 0; j < d; ++j) gw[j] += g * x[j];
          (*grad_b)[r] += g;
        }
      }
    }
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  double penalty = 0.0;
  for (double w : s.w.data()) penalty += w * w;
  if (grad_w) {
    for (std::size_t k = 0; k < grad_w->data().size(); ++k) {
      grad_w->data()[k] = grad_w->data()[k] * inv_m + l2 * s.w.data()[k];
    }
    for (double& g : *grad_b) g *= inv_m;
  }
  return loss * inv_m + 0.5 * l2 * penalty;
}

}  // namespace

ModelPtr FitLogisticRegression(const LearnerSpec& spec, const Dataset& ds) {
  const int classes = ds.task.num_classes();
  const bool binary = classes == 2;
  const std::size_t rows = binary ? 1 : static_cast<std::size_t>(classes);
  const double l2 = spec.get("l2");
  const double lr = spec.get("learning_rate");
  const int epochs = spec.get_int("epochs");

  LogisticState s{Matrix(rows, ds.d()), std::vector<double>(rows, 0.0)};
  Matrix gw;
  std::vector<double> gb;
  double prev = INFINITY;
  double cur = INFINITY;
  for (int e = 0; e < epochs; ++e) {
    prev = cur;
    cur = LogisticObjective(ds, s, l2, binary, &gw, &gb);
    for (std::size_t k = 0; k < gw.data().size(); ++k) {
      s.w.data()[k] -= lr * gw.data()[k];
    }
    for (std::size_t r = 0; r < rows; ++r) s.b[r] -= lr * gb[r];
  }
  const bool converged = std::isfinite(cur) && RelativeChangeSmall(prev, cur, 1e-6);
  return std::make_shared<LinearModel>(
      spec, ds.task, std::move(s.w), std::move(s.b),
      binary ? LinearLink::kSigmoid : LinearLink::kSoftmax, converged);
}

// ---------------------------------------------------------------------------
// Linear SVM / SVR: Pegasos-style stochastic subgradient descent with step
// 1 / (l2 * t), projection onto the ball that must contain the optimum, and
// averaging over the second half of the steps. The bias is an extra
// constant feature and is regularized with the weights.

namespace {

enum class SvmLoss { kHinge, kEpsilonInsensitive };

struct PegasosResult {
  std::vector<double> w;  // d weights followed by the bias
  bool converged;
};

double PegasosObjective(const Matrix& x, std::span<const double> y,
                        std::span<const double> w, double l2, SvmLoss loss,
                        double epsilon) {
  const std::size_t d = x.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    double z = w[d];
    for (std::size_t j = 0; j < d; ++j) z += w[j] * row[j];
    total += loss == SvmLoss::kHinge ? std::max(0.0, 1.0 - y[i] * z)
                                     : std::max(0.0, std::abs(y[i] - z) - epsilon);
  }
  double norm = 0.0;
  for (double v : w) norm += v * v;
  return total / static_cast<double>(x.rows()) + 0.5 * l2 * norm;
}

PegasosResult RunPegasos(const Matrix& x, std::span<const double> y,
                         double l2, int epochs, SvmLoss loss, double epsilon,
                         std::uint64_t seed) {
  const std::size_t m = x.rows();
  const std::size_t d = x.cols();
  std::vector<double> w(d + 1, 0.0);
  std::vector<double> avg(d + 1, 0.0);
  std::size_t n_avg = 0;

  double loss_at_zero = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    loss_at_zero += loss == SvmLoss::kHinge
                        ? 1.0
                        : std::max(0.0, std::abs(y[i]) - epsilon);
  }
  loss_at_zero /= static_cast<double>(m);
  if (loss_at_zero <= 0.0) return {w, true};
  const double radius = std::sqrt(2.0 * loss_at_zero / l2);

  Rng rng(seed);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::uint64_t total_steps =
      static_cast<std::uint64_t>(epochs) * static_cast<std::uint64_t>(m);
  std::uint64_t t = 0;
  double prev_obj = INFINITY;
  double last_obj = INFINITY;
  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (l2 * static_cast<double>(t));
      const auto row = x.row(i);
      double z = w[d];
      for (std::size_t j = 0; j < d; ++j) z += w[j] * row[j];
      double g = 0.0;  // negative subgradient of the loss w.r.t. z
      if (loss == SvmLoss::kHinge) {
        if (y[i] * z < 1.0) g = y[i];
      } else {
        const double r = y[i] - z;
        if (r > epsilon) g = 1.0;
        if (r < -epsilon) g = -1.0;
      }
      const double shrink = 1.0 - eta * l2;
      double norm = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        w[j] = shrink * w[j] + eta * g * row[j];
        norm += w[j] * w[j];
      }
      w[d] = shrink * w[d] + eta * g;
      norm += w[d] * w[d];
      if (norm > radius * radius) {
        const double s = radius / std::sqrt(norm);
        for (double& v : w) v *= s;
      }
      if (2 * t > total_steps) {
        for (std::size_t j = 0; j <= d; ++j) avg[j] += w[j];
        ++n_avg;
      }
    }
    if (e + 2 >= epochs) {
      prev_obj = last_obj;
      last_obj = PegasosObjective(x, y, w, l2, loss, epsilon);
    }
  }
  if (n_avg > 0) {
    for (double& v : avg) v /= static_cast<double>(n_avg);
  } else {
    avg = w;
  }
  const bool converged = epochs >= 2 && RelativeChangeSmall(prev_obj, last_obj, 1e-3);
  return {avg, converged};
}

}  // namespace

ModelPtr FitLinearSvm(const LearnerSpec& spec, const Dataset& ds) {
  const int classes = ds.task.num_classes();
  const bool binary = classes == 2;
  const std::size_t rows = binary ? 1 : static_cast<std::size_t>(classes);
  const std::size_t d = ds.d();
  Matrix weights(rows, d);
  std::vector<double> bias(rows);
  bool converged = true;
  std::vector<double> y(ds.m());
  for (std::size_t r = 0; r < rows; ++r) {
    const int positive = binary ? 1 : static_cast<int>(r);
    for (std::size_t i = 0; i < ds.m(); ++i) {
      y[i] = ds.label(i) == positive ? 1.0 : -1.0;
    }
    auto res = RunPegasos(ds.features, y, spec.get("l2"), spec.get_int("epochs"),
                          SvmLoss::kHinge, 0.0, DeriveSeed(spec.seed, {r}));
    for (std::size_t j = 0; j < d; ++j) weights(r, j) = res.w[j];
    bias[r] = res.w[d];
    converged = converged && res.converged;
  }
  return std::make_shared<LinearModel>(
      spec, ds.task, std::move(weights), std::move(bias),
      binary ? LinearLink::kSigmoid : LinearLink::kOvrSigmoid, converged);
}

ModelPtr FitLinearSvr(const LearnerSpec& spec, const Dataset& ds) {
  // Centered targets keep the regularized bias small.
  const double y_mean =
      std::accumulate(ds.targets.begin(), ds.targets.end(), 0.0) /
      static_cast<double>(ds.m());
  std::vector<double> y(ds.m());
  for (std::size_t i = 0; i < ds.m(); ++i) y[i] = ds.targets[i] - y_mean;
  auto res = RunPegasos(ds.features, y, spec.get("l2"), spec.get_int("epochs"),
                        SvmLoss::kEpsilonInsensitive, spec.get("epsilon"),
                        DeriveSeed(spec.seed, {0}));
  const std::size_t d = ds.d();
  Matrix weights(1, d);
  for (std::size_t j = 0; j < d; ++j) weights(0, j) = res.w[j];
  return std::make_shared<LinearModel>(spec, ds.task, std::move(weights),
                                       std::vector<double>{res.w[d] + y_mean},
                                       LinearLink::kIdentity, res.converged);
}

}  // namespace xstacking
