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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xstacking/learners.hpp"

namespace xstacking {

MlpNetwork::MlpNetwork(std::vector<int> layer_sizes)
    : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) ThrowUsage("MLP needs at least input and output layers");
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    n += static_cast<std::size_t>(sizes_[l + 1]) *
         (static_cast<std::size_t>(sizes_[l]) + 1);
  }
  params_.assign(n, 0.0);
}

void MlpNetwork::initialize(Rng& rng) {
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto in = static_cast<std::size_t>(sizes_[l]);
    const auto out = static_cast<std::size_t>(sizes_[l + 1]);
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t k = 0; k < in * out; ++k) {
      params_[offset + k] = rng.uniform(-a, a);
    }
    offset += in * out;
    for (std::size_t k = 0; k < out; ++k) params_[offset + k] = 0.0;
    offset += out;
  }
}

namespace {

// Activations of every layer for one input; reused across calls.
struct ForwardScratch {
  std::vector<std::vector<double>> act;
};

void Forward(const std::vector<int>& sizes, const std::vector<double>& params,
             std::span<const double> x, ForwardScratch& s) {
  const std::size_t layers = sizes.size();
  s.act.resize(layers);
  s.act[0].assign(x.begin(), x.end());
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    const auto in = static_cast<std::size_t>(sizes[l]);
    const auto out = static_cast<std::size_t>(sizes[l + 1]);
    const double* w = params.data() + offset;
    const double* b = w + in * out;
    const auto& a = s.act[l];
    auto& z = s.act[l + 1];
    z.resize(out);
    const bool hidden = l + 2 < layers;
    for (std::size_t o = 0; o < out; ++o) {
      double v = b[o];
      const double* wr = w + o * in;
      for (std::size_t i = 0; i < in; ++i) v += wr[i] * a[i];
      z[o] = hidden ? std::tanh(v) : v;
    }
    offset += in * out + out;
  }
}

// Loss for one sample; fills d(loss)/d(output) when delta is non-null.
double SampleLoss(std::span<const double> out, double target, MlpLoss loss,
                  std::vector<double>* delta) {
  if (loss == MlpLoss::kSquared) {
    const double r = out[0] - target;
    if (delta) delta->assign(1, r);
    return 0.5 * r * r;
  }
  const auto y = static_cast<std::size_t>(target);
  const double max_z = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double v : out) sum += std::exp(v - max_z);
  const double log_norm = max_z + std::log(sum);
  if (delta) {
    delta->resize(out.size());
    for (std::size_t c = 0; c < out.size(); ++c) {
      (*delta)[c] = std::exp(out[c] - log_norm) - (c == y ? 1.0 : 0.0);
    }
  }
  return log_norm - out[y];
}

}  // namespace

void MlpNetwork::forward(std::span<const double> x,
                         std::span<double> out) const {
  thread_local ForwardScratch scratch;
  Forward(sizes_, params_, x, scratch);
  const auto& last = scratch.act.back();
  std::copy(last.begin(), last.end(), out.begin());
}

double MlpNetwork::loss(const Matrix& x, std::span<const double> targets,
                        std::span<const std::size_t> rows,
                        MlpLoss loss) const {
  ForwardScratch s;
  double total = 0.0;
  for (std::size_t r : rows) {
    Forward(sizes_, params_, x.row(r), s);
    total += SampleLoss(s.act.back(), targets[r], loss, nullptr);
  }
  return total / static_cast<double>(rows.size());
}

double MlpNetwork::loss_and_gradient(const Matrix& x,
                                     std::span<const double> targets,
                                     std::span<const std::size_t> rows,
                                     MlpLoss loss,
                                     std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  const std::size_t layers = sizes_.size();
  std::vector<std::size_t> offsets(layers, 0);
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    offsets[l + 1] = offsets[l] + static_cast<std::size_t>(sizes_[l + 1]) *
                                      (static_cast<std::size_t>(sizes_[l]) + 1);
  }

  ForwardScratch s;
  std::vector<double> delta;
  std::vector<double> prev_delta;
  double total = 0.0;
  for (std::size_t r : rows) {
    Forward(sizes_, params_, x.row(r), s);
    total += SampleLoss(s.act.back(), targets[r], loss, &delta);
    for (std::size_t l = layers - 1; l >= 1; --l) {
      const auto in = static_cast<std::size_t>(sizes_[l - 1]);
      const auto out = static_cast<std::size_t>(sizes_[l]);
      const std::size_t off = offsets[l - 1];
      const double* w = params_.data() + off;
      double* gw = grad.data() + off;
      double* gb = gw + in * out;
      const auto& a = s.act[l - 1];
      for (std::size_t o = 0; o < out; ++o) {
        const double dv = delta[o];
        double* gwr = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) gwr[i] += dv * a[i];
        gb[o] += dv;
      }
      if (l == 1) break;
      prev_delta.assign(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double dv = delta[o];
        const double* wr = w + o * in;
        for (std::size_t i = 0; i < in; ++i) prev_delta[i] += wr[i] * dv;
      }
      for (std::size_t i = 0; i < in; ++i) {
        prev_delta[i] *= 1.0 - a[i] * a[i];  // tanh'
      }
      std::swap(delta, prev_delta);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  for (double& g : grad) g *= inv_n;
  return total * inv_n;
}

// ---------------------------------------------------------------------------

MlpModel::MlpModel(LearnerSpec spec, TaskKind task, std::size_t d,
                   MlpNetwork net, double target_mean, double target_scale,
                   bool converged)
    : Model(std::move(spec), task, d, converged),
      net_(std::move(net)),
      target_mean_(target_mean),
      target_scale_(target_scale) {
  const auto& sizes = net_.layer_sizes();
  if (static_cast<std::size_t>(sizes.front()) != d ||
      static_cast<std::size_t>(sizes.back()) != n_outputs()) {
    ThrowData("MLP layer sizes do not match task");
  }
}

void MlpModel::predict_into(std::span<const double> x,
                            std::span<double> out) const {
  net_.forward(x, out);
  if (task().is_regression()) {
    out[0] = out[0] * target_scale_ + target_mean_;
    return;
  }
  const double max_z = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - max_z);
    sum += v;
  }
  for (double& v : out) v /= sum;
}

nlohmann::json MlpModel::params_json() const {
  const double ts[2] = {target_mean_, target_scale_};
  return {{"layer_sizes", net_.layer_sizes()},
          {"params", DoublesToJson(net_.params())},
          {"target_transform", DoublesToJson(ts)}};
}

// Mini-batch Adam on mean loss. Regression targets are standardized
// internally and mapped back at prediction time.
ModelPtr FitMlp(const LearnerSpec& spec, const Dataset& ds) {
  const std::size_t m = ds.m();
  const bool clf = ds.task.is_classification();
  std::vector<int> sizes{static_cast<int>(ds.d())};
  for (int l = 0; l < spec.get_int("hidden_layers"); ++l) {
    sizes.push_back(spec.get_int("hidden_units"));
  }
  sizes.push_back(clf ? ds.task.num_classes() : 1);

  double t_mean = 0.0;
  double t_scale = 1.0;
  std::vector<double> targets = ds.targets;
  if (!clf) {
    t_mean = std::accumulate(targets.begin(), targets.end(), 0.0) /
             static_cast<double>(m);
    double ss = 0.0;
    for (double t : targets) ss += (t - t_mean) * (t - t_mean);
    t_scale = std::sqrt(ss / static_cast<double>(m));
    if (!(t_scale > 0.0)) t_scale = 1.0;
    for (double& t : targets) t = (t - t_mean) / t_scale;
  }
  const MlpLoss loss = clf ? MlpLoss::kSoftmaxCrossEntropy : MlpLoss::kSquared;

  Rng rng(spec.seed);
  MlpNetwork net(sizes);
  net.initialize(rng);

  const double lr = spec.get("learning_rate");
  const int epochs = spec.get_int("epochs");
  const auto batch = static_cast<std::size_t>(spec.get_int("batch_size"));
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;

  const std::size_t n = net.n_params();
  std::vector<double> grad(n), m1(n, 0.0), m2(n, 0.0);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  double beta1_t = 1.0;
  double beta2_t = 1.0;
  double prev_loss = INFINITY;
  double last_loss = INFINITY;
  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < m; start += batch) {
      const std::size_t len = std::min(batch, m - start);
      net.loss_and_gradient(ds.features, targets,
                            std::span<const std::size_t>(order).subspan(start, len),
                            loss, grad);
      beta1_t *= kBeta1;
      beta2_t *= kBeta2;
      auto& p = net.params();
      for (std::size_t k = 0; k < n; ++k) {
        m1[k] = kBeta1 * m1[k] + (1 - kBeta1) * grad[k];
        m2[k] = kBeta2 * m2[k] + (1 - kBeta2) * grad[k] * grad[k];
        const double mh = m1[k] / (1 - beta1_t);
        const double vh = m2[k] / (1 - beta2_t);
        p[k] -= lr * mh / (std::sqrt(vh) + kEps);
      }
    }
    if (e + 2 >= epochs) {
      std::vector<std::size_t> all(m);
      std::iota(all.begin(), all.end(), std::size_t{0});
      prev_loss = last_loss;
      last_loss = net.loss(ds.features, targets, all, loss);
    }
  }
  const bool converged =
      std::isfinite(last_loss) && epochs >= 2 &&
      std::abs(last_loss - prev_loss) <= 1e-3 * std::max(1e-3, std::abs(prev_loss));
  return std::make_shared<MlpModel>(spec, ds.task, ds.d(), std::move(net),
                                    t_mean, t_scale, converged);
}

}  // namespace xstacking
