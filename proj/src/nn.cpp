// Copyright 2026 The fedsel Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedsel/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedsel/error.hpp"

namespace fedsel {

std::string_view to_string(Activation a) {
  return a == Activation::relu ? "relu" : "tanh";
}

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

void ModelSpec::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("model needs at least an input and an output layer");
  for (std::size_t w : layer_sizes) {
    if (w == 0) throw ConfigError("model layer widths must be positive");
  }
}

Manifest manifest_for(const ModelSpec& spec) {
  spec.validate();
  Manifest m;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    m.push_back({spec.layer_sizes[l], spec.layer_sizes[l + 1]});
  }
  return m;
}

std::size_t element_count(const Manifest& manifest) {
  std::size_t n = 0;
  for (const auto& s : manifest) n += s.element_count();
  return n;
}

ParameterVector::ParameterVector(Manifest manifest)
    : manifest_(std::move(manifest)), values_(element_count(manifest_), 0.0) {}

ParameterVector::ParameterVector(Manifest manifest, std::vector<double> values)
    : manifest_(std::move(manifest)), values_(std::move(values)) {
  if (values_.size() != element_count(manifest_)) {
    throw ShapeError("parameter vector has " + std::to_string(values_.size()) +
                     " values, manifest requires " + std::to_string(element_count(manifest_)));
  }
}

std::size_t ParameterVector::offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += manifest_[l].element_count();
  return off;
}

std::span<const double> ParameterVector::weights(std::size_t layer) const {
  return std::span<const double>(values_).subspan(offset(layer), manifest_[layer].weight_count());
}
std::span<double> ParameterVector::weights(std::size_t layer) {
  return std::span<double>(values_).subspan(offset(layer), manifest_[layer].weight_count());
}
std::span<const double> ParameterVector::bias(std::size_t layer) const {
  return std::span<const double>(values_).subspan(offset(layer) + manifest_[layer].weight_count(),
                                                  manifest_[layer].cols);
}
std::span<double> ParameterVector::bias(std::size_t layer) {
  return std::span<double>(values_).subspan(offset(layer) + manifest_[layer].weight_count(),
                                            manifest_[layer].cols);
}

void OptimizerConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be nonnegative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
}

OptimizerState OptimizerState::fresh(const OptimizerConfig& cfg, const Manifest& manifest) {
  cfg.validate();
  return OptimizerState{ParameterVector(manifest), cfg.learning_rate, cfg.momentum, cfg.batch_size};
}

ParameterVector init_parameters(const ModelSpec& spec) {
  ParameterVector p(manifest_for(spec));
  Rng rng(derive_seed(spec.seed, {0x696E6974ULL}));
  for (std::size_t l = 0; l < p.manifest().size(); ++l) {
    const double scale = std::sqrt(1.0 / static_cast<double>(p.manifest()[l].rows));
    for (double& w : p.weights(l)) w = rng.uniform(-scale, scale);
  }
  return p;
}

namespace {

void check_batch(const ParameterVector& params, const ModelSpec& spec, const Matrix& batch) {
  if (params.manifest() != manifest_for(spec)) {
    throw ShapeError("parameter manifest does not match model spec");
  }
  if (batch.cols() != spec.input_dim()) {
    throw ShapeError("batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                     std::to_string(spec.input_dim()));
  }
}

// out = in * W + b
Matrix dense(const Matrix& in, std::span<const double> w, std::span<const double> b,
             const LayerShape& shape) {
  Matrix out(in.rows(), shape.cols);
  for (std::size_t n = 0; n < in.rows(); ++n) {
    auto o = out.row(n);
    std::copy(b.begin(), b.end(), o.begin());
    auto x = in.row(n);
    for (std::size_t i = 0; i < shape.rows; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      const double* wrow = w.data() + i * shape.cols;
      for (std::size_t j = 0; j < shape.cols; ++j) o[j] += xi * wrow[j];
    }
  }
  return out;
}

void activate(Matrix& m, Activation a) {
  for (double& v : m.data()) v = a == Activation::relu ? std::max(v, 0.0) : std::tanh(v);
}

void softmax_rows(Matrix& m) {
  for (std::size_t n = 0; n < m.rows(); ++n) {
    auto r = m.row(n);
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double& v : r) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : r) v /= sum;
  }
}

// Forward pass keeping post-activation outputs of every layer. acts[0] is the
// input; acts.back() holds the raw logits.
std::vector<Matrix> forward_trace(const ParameterVector& params, const ModelSpec& spec,
                                  const Matrix& batch) {
  const Manifest& m = params.manifest();
  std::vector<Matrix> acts;
  acts.reserve(m.size() + 1);
  acts.push_back(batch);
  for (std::size_t l = 0; l < m.size(); ++l) {
    Matrix z = dense(acts.back(), params.weights(l), params.bias(l), m[l]);
    if (l + 1 < m.size()) activate(z, spec.activation);
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace

Matrix forward(const ParameterVector& params, const ModelSpec& spec, const Matrix& batch) {
  check_batch(params, spec, batch);
  auto acts = forward_trace(params, spec, batch);
  Matrix probs = std::move(acts.back());
  softmax_rows(probs);
  return probs;
}

LossGradient loss_and_gradient(const ParameterVector& params, const ModelSpec& spec,
                               const Matrix& batch, std::span<const int> labels) {
  check_batch(params, spec, batch);
  if (batch.rows() == 0) throw DataError("loss_and_gradient: empty batch");
  if (labels.size() != batch.rows()) throw ShapeError("label count differs from batch rows");
  const auto classes = static_cast<int>(spec.class_count());
  for (int y : labels) {
    if (y < 0 || y >= classes) throw DataError("label " + std::to_string(y) + " out of range");
  }

  const Manifest& m = params.manifest();
  auto acts = forward_trace(params, spec, batch);
  const std::size_t n = batch.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  // delta = (softmax - onehot) / n, loss via log-sum-exp.
  Matrix delta = std::move(acts.back());
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = delta.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double v : r) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    loss += lse - r[labels[i]];
    for (double& v : r) v = std::exp(v - lse) * inv_n;
    r[labels[i]] -= inv_n;
  }
  loss *= inv_n;

  LossGradient out{loss, ParameterVector(m)};
  for (std::size_t l = m.size(); l-- > 0;) {
    const Matrix& in = acts[l];
    const LayerShape& s = m[l];
    auto gw = out.grad.weights(l);
    auto gb = out.grad.bias(l);
    for (std::size_t k = 0; k < n; ++k) {
      auto d = delta.row(k);
      auto x = in.row(k);
      for (std::size_t i = 0; i < s.rows; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        double* g = gw.data() + i * s.cols;
        for (std::size_t j = 0; j < s.cols; ++j) g[j] += xi * d[j];
      }
      for (std::size_t j = 0; j < s.cols; ++j) gb[j] += d[j];
    }
    if (l == 0) break;

    // Propagate to the previous layer's post-activation, then through the
    // activation derivative expressed in terms of the stored output.
    auto w = params.weights(l);
    Matrix prev(n, s.rows);
    for (std::size_t k = 0; k < n; ++k) {
      auto d = delta.row(k);
      auto p = prev.row(k);
      auto a = in.row(k);
      for (std::size_t i = 0; i < s.rows; ++i) {
        const double* wrow = w.data() + i * s.cols;
        double acc = 0.0;
        for (std::size_t j = 0; j < s.cols; ++j) acc += wrow[j] * d[j];
        if (spec.activation == Activation::relu) {
          p[i] = a[i] > 0.0 ? acc : 0.0;
        } else {
          p[i] = acc * (1.0 - a[i] * a[i]);
        }
      }
    }
    delta = std::move(prev);
  }
  return out;
}

void apply_sgd_momentum(ParameterVector& params, const ParameterVector& grad,
                        OptimizerState& state) {
  if (!params.compatible_with(grad) || !params.compatible_with(state.velocity)) {
    throw ShapeError("sgd_momentum_step: params, grad and velocity manifests differ");
  }
  auto p = params.values();
  auto g = grad.values();
  auto v = state.velocity.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = state.momentum * v[i] + g[i];
    p[i] -= state.learning_rate * v[i];
  }
}

StepResult sgd_momentum_step(ParameterVector params, const ParameterVector& grad,
                             OptimizerState state) {
  apply_sgd_momentum(params, grad, state);
  return {std::move(params), std::move(state)};
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& stream) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[stream.index(i)]);
  return idx;
}

EpochResult train_epoch(ParameterVector params, const ModelSpec& spec, OptimizerState state,
                        const Split& train, Rng& stream) {
  if (train.empty()) throw DataError("train_epoch: empty training split");
  if (state.batch_size == 0) throw ConfigError("batch_size must be positive");
  const auto order = shuffled_indices(train.size(), stream);
  const std::size_t dim = train.features.cols();

  EpochResult out{std::move(params), std::move(state), 0, 0.0};
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += out.state.batch_size) {
    const std::size_t end = std::min(order.size(), start + out.state.batch_size);
    Matrix batch(end - start, dim);
    std::vector<int> labels(end - start);
    for (std::size_t k = start; k < end; ++k) {
      auto src = train.features.row(order[k]);
      std::copy(src.begin(), src.end(), batch.row(k - start).begin());
      labels[k - start] = train.labels[order[k]];
    }
    auto lg = loss_and_gradient(out.params, spec, batch, labels);
    apply_sgd_momentum(out.params, lg.grad, out.state);
    loss_sum += lg.loss * static_cast<double>(end - start);
    ++out.steps;
  }
  out.mean_loss = loss_sum / static_cast<double>(order.size());
  return out;
}

}  // namespace fedsel
