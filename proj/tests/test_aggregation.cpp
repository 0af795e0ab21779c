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

#include <algorithm>
#include <cmath>

#include "fedsel/aggregation.hpp"
#include "fedsel/error.hpp"
#include "fedsel/rng.hpp"
#include "oracles.hpp"

using namespace fedsel;

namespace {

ClientUpdate scalar_update(int id, std::vector<double> v, std::size_t n = 1) {
  Manifest m{{1, v.size()}};
  std::vector<double> vals = v;
  vals.insert(vals.end(), v.size(), 0.0);  // zero bias
  return ClientUpdate{id, ParameterVector(m, vals), {}, n};
}

std::vector<ClientUpdate> random_updates(Rng& rng, std::size_t k, const Manifest& m) {
  std::vector<ClientUpdate> out;
  ParameterVector proto(m);
  for (std::size_t i = 0; i < k; ++i) {
    ParameterVector p(m);
    for (double& v : p.values()) v = rng.uniform(-1.0, 1.0);
    out.push_back({static_cast<int>(i), p, {}, 1 + rng.index(500)});
  }
  return out;
}

std::vector<std::vector<double>> raw(const std::vector<ClientUpdate>& us) {
  std::vector<std::vector<double>> out;
  for (const auto& u : us) out.emplace_back(u.params.values().begin(), u.params.values().end());
  return out;
}

MetricsReport report(double acc, double f1, std::vector<std::vector<std::size_t>> conf) {
  MetricsReport r;
  r.accuracy = acc;
  r.macro_f1 = f1;
  r.macro_precision = acc / 2;
  r.macro_recall = f1 / 2;
  r.confusion = std::move(conf);
  for (const auto& row : r.confusion) {
    for (auto v : row) r.sample_count += v;
  }
  return r;
}

}  // namespace

TEST_CASE("plain averaging of a single client is the identity") {
  auto u = scalar_update(0, {0.1, -3.5, 7.25});
  CHECK(aggregate_plain({u}) == u.params);
  CHECK(aggregate_weighted({u}) == u.params);
}

TEST_CASE("two-point mean") {
  auto out = aggregate_plain({scalar_update(0, {1.0, 3.0}), scalar_update(1, {3.0, 5.0})});
  CHECK(out.weights(0)[0] == 2.0);
  CHECK(out.weights(0)[1] == 4.0);
}

TEST_CASE("weighted mean with counts 1 and 3") {
  auto out = aggregate_weighted({scalar_update(0, {0.0}, 1), scalar_update(1, {4.0}, 3)});
  CHECK(out.weights(0)[0] == 3.0);
}

TEST_CASE("aggregation matches brute-force mean oracles") {
  Rng rng(2024);
  const Manifest m{{3, 4}, {4, 2}};
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng.index(8);
    auto us = random_updates(rng, k, m);
    std::vector<std::size_t> counts;
    for (const auto& u : us) counts.push_back(u.train_sample_count);
    const auto plain = aggregate_plain(us);
    const auto weighted = aggregate_weighted(us);
    const auto want_p = oracle::mean_of(raw(us));
    const auto want_w = oracle::weighted_mean_of(raw(us), counts);
    for (std::size_t i = 0; i < plain.size(); ++i) {
      CHECK(std::abs(plain[i] - want_p[i]) <= 1e-15);
      CHECK(std::abs(weighted[i] - want_w[i]) <= 1e-15);
    }
  }
}

TEST_CASE("equal counts make weighted averaging equal to plain") {
  Rng rng(5);
  const Manifest m{{2, 3}};
  for (int trial = 0; trial < 20; ++trial) {
    auto us = random_updates(rng, 1 + rng.index(8), m);
    for (auto& u : us) u.train_sample_count = 37;
    auto a = aggregate_plain(us), b = aggregate_weighted(us);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-15);
  }
}

TEST_CASE("aggregate lies in the coordinatewise hull and ignores client order") {
  Rng rng(11);
  const Manifest m{{4, 3}};
  for (int trial = 0; trial < 30; ++trial) {
    auto us = random_updates(rng, 2 + rng.index(7), m);
    for (auto kind : {AggregationKind::plain, AggregationKind::weighted}) {
      const auto out = aggregate(us, kind);
      for (std::size_t i = 0; i < out.size(); ++i) {
        double lo = us[0].params[i], hi = lo;
        for (const auto& u : us) {
          lo = std::min(lo, u.params[i]);
          hi = std::max(hi, u.params[i]);
        }
        CHECK(out[i] >= lo);
        CHECK(out[i] <= hi);
      }
      auto shuffled = us;
      std::reverse(shuffled.begin(), shuffled.end());
      std::swap(shuffled.front(), shuffled[shuffled.size() / 2]);
      const auto again = aggregate(shuffled, kind);
      for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] - again[i]) <= 1e-15);
    }
  }
}

TEST_CASE("aggregation error paths") {
  CHECK_THROWS_AS(aggregate_plain({}), ProtocolError);
  CHECK_THROWS_AS(aggregate_weighted({}), ProtocolError);
  auto a = scalar_update(0, {1.0, 2.0});
  auto b = scalar_update(1, {1.0, 2.0, 3.0});
  CHECK_THROWS_AS(aggregate_plain({a, b}), ShapeError);
  auto z = scalar_update(2, {1.0, 2.0}, 0);
  CHECK_THROWS_AS(aggregate_weighted({a, z}), ProtocolError);
  CHECK_NOTHROW(aggregate_plain({a, z}));
}

TEST_CASE("metric aggregation averages scalars and sums confusion") {
  auto r1 = report(0.8, 0.7, {{3, 1}, {0, 4}});
  auto r2 = report(1.0, 0.9, {{2, 0}, {0, 2}});
  auto out = aggregate_metrics({r1, r2});
  CHECK(out.accuracy == doctest::Approx(0.9));
  CHECK(out.macro_f1 == doctest::Approx(0.8));
  CHECK(out.macro_precision == doctest::Approx(0.45));
  CHECK(out.confusion == std::vector<std::vector<std::size_t>>{{5, 1}, {0, 6}});
  CHECK(out.sample_count == 12);

  auto same = aggregate_metrics({r1, r1, r1});
  CHECK(same.accuracy == r1.accuracy);
  CHECK(same.macro_f1 == r1.macro_f1);

  CHECK_THROWS_AS(aggregate_metrics({}), ProtocolError);
  CHECK_THROWS_AS(aggregate_metrics({r1, report(0.5, 0.5, {{1}})}), ProtocolError);
}

TEST_CASE("metric aggregation matches an arithmetic oracle") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<MetricsReport> rs;
    std::vector<std::vector<double>> acc;
    std::vector<std::vector<std::size_t>> conf(3, std::vector<std::size_t>(3, 0));
    for (int k = 0; k < 4; ++k) {
      std::vector<std::vector<std::size_t>> c(3, std::vector<std::size_t>(3));
      for (auto& row : c) {
        for (auto& v : row) v = rng.index(20);
      }
      for (int t = 0; t < 3; ++t) {
        for (int p = 0; p < 3; ++p) conf[t][p] += c[t][p];
      }
      rs.push_back(report(rng.uniform(), rng.uniform(), c));
      acc.push_back({rs.back().accuracy, rs.back().macro_f1});
    }
    auto out = aggregate_metrics(rs);
    auto want = oracle::mean_of(acc);
    CHECK(out.accuracy == want[0]);
    CHECK(out.macro_f1 == want[1]);
    CHECK(out.confusion == conf);
  }
}

TEST_CASE("should_halt examples") {
  HaltingCriterion c{HaltingMetric::accuracy, 0.90, 5};
  MetricsReport r;
  r.accuracy = 0.95;
  CHECK(should_halt(r, c, 1));
  r.accuracy = 0.89;
  CHECK_FALSE(should_halt(r, c, 4));
  CHECK(should_halt(r, c, 5));
  r.accuracy = 0.90;
  CHECK(should_halt(r, c, 2));

  HaltingCriterion f1{HaltingMetric::macro_f1, 0.5, 3};
  r.accuracy = 1.0;
  r.macro_f1 = 0.4;
  CHECK_FALSE(should_halt(r, f1, 1));
}

TEST_CASE("should_halt is monotone in the metric and the round") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    HaltingCriterion c{HaltingMetric::accuracy, rng.uniform(), 1 + static_cast<int>(rng.index(10))};
    MetricsReport a, b;
    a.accuracy = rng.uniform();
    b.accuracy = a.accuracy + rng.uniform(0.0, 0.2);
    const int round = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(c.max_rounds)));
    if (should_halt(a, c, round)) CHECK(should_halt(b, c, round));
    if (should_halt(a, c, round) && round < c.max_rounds) CHECK(should_halt(a, c, round + 1));
    CHECK(should_halt(a, c, c.max_rounds));
  }
}

TEST_CASE("halting criterion validation") {
  CHECK_NOTHROW((HaltingCriterion{HaltingMetric::accuracy, 0.0, 1}.validate()));
  CHECK_THROWS_AS((HaltingCriterion{HaltingMetric::accuracy, 1.5, 5}.validate()), ConfigError);
  CHECK_THROWS_AS((HaltingCriterion{HaltingMetric::accuracy, 0.9, 0}.validate()), ConfigError);
  CHECK(parse_aggregation("weighted") == AggregationKind::weighted);
  CHECK_THROWS_AS(parse_aggregation("median"), ConfigError);
}
