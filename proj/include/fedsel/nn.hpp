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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fedsel/matrix.hpp"
#include "fedsel/rng.hpp"
#include "fedsel/split.hpp"

namespace fedsel {

enum class Activation { relu, tanh };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view s);

// Architecture of the local classifier: layer_sizes = {input, hidden..., classes}.
struct ModelSpec {
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t class_count() const { return layer_sizes.back(); }
  // Throws ConfigError when fewer than two layers or any zero width.
  void validate() const;
};

// Weight matrix of one dense layer is rows x cols (fan_in x fan_out); the
// bias that follows it has `cols` entries.
struct LayerShape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t weight_count() const { return rows * cols; }
  std::size_t element_count() const { return rows * cols + cols; }
  bool operator==(const LayerShape&) const = default;
};

using Manifest = std::vector<LayerShape>;

Manifest manifest_for(const ModelSpec& spec);
std::size_t element_count(const Manifest& manifest);

// Flat model weights. Layout is [W_0, b_0, W_1, b_1, ...], each W row-major.
class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(Manifest manifest);  // zero-filled
  ParameterVector(Manifest manifest, std::vector<double> values);

  const Manifest& manifest() const { return manifest_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<const double> weights(std::size_t layer) const;
  std::span<double> weights(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);

  bool compatible_with(const ParameterVector& other) const { return manifest_ == other.manifest_; }

  // Bitwise equality of values and manifest.
  bool operator==(const ParameterVector&) const = default;

 private:
  std::size_t offset(std::size_t layer) const;

  Manifest manifest_;
  std::vector<double> values_;
};

struct OptimizerConfig {
  double learning_rate = 1e-4;
  double momentum = 0.9;
  std::size_t batch_size = 16;

  void validate() const;
};

struct OptimizerState {
  ParameterVector velocity;
  double learning_rate = 1e-4;
  double momentum = 0.9;
  std::size_t batch_size = 16;

  // Fresh state with zero velocity shaped like `manifest`.
  static OptimizerState fresh(const OptimizerConfig& cfg, const Manifest& manifest);
};

ParameterVector init_parameters(const ModelSpec& spec);

// Row-wise softmax class probabilities.
Matrix forward(const ParameterVector& params, const ModelSpec& spec, const Matrix& batch);

struct LossGradient {
  double loss = 0.0;
  ParameterVector grad;
};

// Mean softmax cross-entropy over the batch and its gradient.
LossGradient loss_and_gradient(const ParameterVector& params, const ModelSpec& spec,
                               const Matrix& batch, std::span<const int> labels);

struct StepResult {
  ParameterVector params;
  OptimizerState state;
};

// Classical momentum: v' = momentum * v + grad; params' = params - lr * v'.
StepResult sgd_momentum_step(ParameterVector params, const ParameterVector& grad,
                             OptimizerState state);

// In-place variant used by the training loop.
void apply_sgd_momentum(ParameterVector& params, const ParameterVector& grad,
                        OptimizerState& state);

struct EpochResult {
  ParameterVector params;
  OptimizerState state;
  std::size_t steps = 0;
  double mean_loss = 0.0;
};

// One pass over `train` in a shuffled order drawn from `stream`. The final
// partial mini-batch is trained.
EpochResult train_epoch(ParameterVector params, const ModelSpec& spec, OptimizerState state,
                        const Split& train, Rng& stream);

// Fisher-Yates permutation of [0, n) drawn from `stream`.
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& stream);

}  // namespace fedsel
