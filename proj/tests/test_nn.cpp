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

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fedsel/error.hpp"
#include "fedsel/nn.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fedsel;

namespace {

ModelSpec spec_of(std::vector<std::size_t> sizes, std::uint64_t seed = 7,
                  Activation act = Activation::relu) {
  return ModelSpec{std::move(sizes), act, seed};
}

}  // namespace

TEST_CASE("init_parameters sizes follow the manifest") {
  CHECK(init_parameters(spec_of({2, 2})).size() == 6);
  CHECK(init_parameters(spec_of({4, 8, 5})).size() == 4 * 8 + 8 + 8 * 5 + 5);
}

TEST_CASE("init_parameters is deterministic and fan-in scaled") {
  const auto spec = spec_of({4, 8, 5}, 42);
  const auto a = init_parameters(spec);
  const auto b = init_parameters(spec);
  CHECK(a == b);
  CHECK_FALSE(a == init_parameters(spec_of({4, 8, 5}, 43)));
  for (std::size_t l = 0; l < a.manifest().size(); ++l) {
    const double bound = std::sqrt(1.0 / static_cast<double>(a.manifest()[l].rows));
    for (double w : a.weights(l)) CHECK(std::abs(w) <= bound);
    for (double b0 : a.bias(l)) CHECK(b0 == 0.0);
  }
}

TEST_CASE("invalid model specs are configuration errors") {
  CHECK_THROWS_AS(init_parameters(spec_of({5})), ConfigError);
  CHECK_THROWS_AS(init_parameters(spec_of({3, 0, 5})), ConfigError);
}

TEST_CASE("forward produces softmax rows") {
  const auto spec = spec_of({8, 6, 5});
  SUBCASE("zero weights give the uniform distribution") {
    ParameterVector zero(manifest_for(spec));
    const auto batch = testing::random_split(3, 8, 5, 1).features;
    const auto probs = forward(zero, spec, batch);
    for (double p : probs.data()) CHECK(p == doctest::Approx(0.2).epsilon(1e-15));
  }
  SUBCASE("batch of 16 gives a 16x5 matrix with unit rows") {
    const auto batch = testing::random_split(16, 8, 5, 2).features;
    const auto probs = forward(init_parameters(spec), spec, batch);
    CHECK(probs.rows() == 16);
    CHECK(probs.cols() == 5);
    for (std::size_t n = 0; n < probs.rows(); ++n) {
      auto r = probs.row(n);
      CHECK(std::abs(std::accumulate(r.begin(), r.end(), 0.0) - 1.0) < 1e-12);
      for (double p : r) CHECK((p > 0.0 && p < 1.0));
    }
  }
  SUBCASE("dimension mismatch") {
    const auto batch = testing::random_split(2, 7, 5, 3).features;
    CHECK_THROWS_AS(forward(init_parameters(spec), spec, batch), ShapeError);
  }
}

TEST_CASE("loss of the uniform predictor is ln C") {
  const auto spec = spec_of({4, 3, 5});
  const auto s = testing::random_split(10, 4, 5, 9);
  auto lg = loss_and_gradient(ParameterVector(manifest_for(spec)), spec, s.features, s.labels);
  CHECK(std::abs(lg.loss - std::log(5.0)) < 1e-9);
}

TEST_CASE("duplicating every sample leaves the loss unchanged") {
  const auto spec = spec_of({4, 6, 3}, 3, Activation::tanh);
  const auto params = init_parameters(spec);
  const auto s = testing::random_split(7, 4, 3, 10);
  Split doubled = s;
  doubled.extend(s);
  const double a = loss_and_gradient(params, spec, s.features, s.labels).loss;
  const double b = loss_and_gradient(params, spec, doubled.features, doubled.labels).loss;
  CHECK(std::abs(a - b) < 1e-12);
}

TEST_CASE("label out of range is a data error") {
  const auto spec = spec_of({2, 3});
  Matrix x(1, 2, 0.5);
  std::vector<int> y{3};
  CHECK_THROWS_AS(loss_and_gradient(init_parameters(spec), spec, x, y), DataError);
  y = {-1};
  CHECK_THROWS_AS(loss_and_gradient(init_parameters(spec), spec, x, y), DataError);
}

TEST_CASE("analytic gradient matches central finite differences") {
  for (Activation act : {Activation::tanh, Activation::relu}) {
    const auto spec = spec_of({5, 7, 4}, 11, act);
    auto params = init_parameters(spec);
    Rng rng(5);
    for (double& b : params.values()) b += 0.1 * rng.normal();
    const auto s = testing::random_split(9, 5, 4, 12);
    const auto lg = loss_and_gradient(params, spec, s.features, s.labels);
    std::vector<std::vector<double>> xs;
    for (std::size_t i = 0; i < s.size(); ++i) xs.emplace_back(s.features.row(i).begin(), s.features.row(i).end());
    const std::vector<double> w(params.values().begin(), params.values().end());
    std::size_t checked = 0;
    for (std::size_t c = 0; c < w.size(); ++c) {
      auto fd = oracle::central_difference(w, c, 1e-5, spec.layer_sizes, act == Activation::relu, xs, s.labels);
      if (fd.crosses_kink) continue;
      const double denom = std::max({std::abs(fd.value), std::abs(lg.grad[c]), 1e-6});
      CHECK(std::abs(fd.value - lg.grad[c]) / denom < 1e-5);
      ++checked;
    }
    CHECK(checked > w.size() / 2);
  }
}

TEST_CASE("sgd_momentum_step") {
  Manifest scalar{{0, 1}};
  auto make = [&](double v) { return ParameterVector(scalar, {v}); };

  SUBCASE("momentum 0 reduces to plain SGD") {
    OptimizerState st{make(0.0), 0.1, 0.0, 16};
    auto r = sgd_momentum_step(make(1.0), make(2.0), st);
    CHECK(r.params[0] == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("zero gradient and velocity is a fixed point") {
    OptimizerState st{make(0.0), 0.5, 0.9, 16};
    auto r = sgd_momentum_step(make(3.25), make(0.0), st);
    CHECK(r.params[0] == 3.25);
  }
  SUBCASE("momentum 0.9 with lr 1e-4") {
    OptimizerState st{make(1.0), 0.0001, 0.9, 16};
    auto r = sgd_momentum_step(make(0.5), make(1.0), st);
    CHECK(r.state.velocity[0] == doctest::Approx(1.9).epsilon(1e-15));
    CHECK(0.5 - r.params[0] == doctest::Approx(0.00019).epsilon(1e-12));
  }
  SUBCASE("manifest mismatch") {
    OptimizerState st{make(0.0), 0.1, 0.9, 16};
    ParameterVector other(Manifest{{1, 1}});
    CHECK_THROWS_AS(sgd_momentum_step(make(1.0), other, st), ShapeError);
  }
}

TEST_CASE("train_epoch") {
  const auto spec = spec_of({4, 6, 3});
  const auto params = init_parameters(spec);
  const auto data = testing::random_split(40, 4, 3, 21);
  OptimizerConfig oc{0.01, 0.9, 16};

  SUBCASE("40 samples at batch 16 take 3 steps") {
    Rng stream(1);
    auto r = train_epoch(params, spec, OptimizerState::fresh(oc, params.manifest()), data, stream);
    CHECK(r.steps == 3);
    CHECK_FALSE(r.params == params);
  }
  SUBCASE("same stream twice is bitwise identical") {
    Rng s1(99), s2(99);
    auto a = train_epoch(params, spec, OptimizerState::fresh(oc, params.manifest()), data, s1);
    auto b = train_epoch(params, spec, OptimizerState::fresh(oc, params.manifest()), data, s2);
    CHECK(a.params == b.params);
    CHECK(a.state.velocity == b.state.velocity);
  }
  SUBCASE("zero learning rate leaves params untouched") {
    Rng stream(3);
    OptimizerConfig zero{0.0, 0.9, 16};
    auto r = train_epoch(params, spec, OptimizerState::fresh(zero, params.manifest()), data, stream);
    CHECK(r.params == params);
  }
  SUBCASE("empty split") {
    Rng stream(3);
    CHECK_THROWS_AS(train_epoch(params, spec, OptimizerState::fresh(oc, params.manifest()), Split{}, stream),
                    DataError);
  }
}

TEST_CASE("permuting samples inside a mini-batch leaves the step unchanged") {
  const auto spec = spec_of({5, 8, 4}, 17, Activation::tanh);
  const auto params = init_parameters(spec);
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto batch = testing::random_split(16, 5, 4, 100 + static_cast<std::uint64_t>(trial));
    const auto perm = shuffled_indices(batch.size(), rng);
    Split permuted;
    for (auto i : perm) permuted.append(batch.features.row(i), batch.labels[i], batch.ids[i]);
    OptimizerState st = OptimizerState::fresh({0.05, 0.9, 16}, params.manifest());
    auto a = sgd_momentum_step(params, loss_and_gradient(params, spec, batch.features, batch.labels).grad, st);
    auto b = sgd_momentum_step(params, loss_and_gradient(params, spec, permuted.features, permuted.labels).grad, st);
    for (std::size_t i = 0; i < params.size(); ++i) CHECK(std::abs(a.params[i] - b.params[i]) < 1e-12);
  }
}

TEST_CASE("shuffled_indices is a permutation") {
  Rng rng(4);
  auto idx = shuffled_indices(50, rng);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i = 0; i < idx.size(); ++i) CHECK(idx[i] == i);
}
