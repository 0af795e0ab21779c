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

#include "fedsel/aggregation.hpp"

#include <string>

#include "fedsel/error.hpp"

namespace fedsel {

std::string_view to_string(AggregationKind k) { return k == AggregationKind::plain ? "plain" : "weighted"; }

std::string_view to_string(HaltingMetric m) {
  return m == HaltingMetric::accuracy ? "accuracy" : "macro_f1";
}

AggregationKind parse_aggregation(std::string_view s) {
  if (s == "plain") return AggregationKind::plain;
  if (s == "weighted") return AggregationKind::weighted;
  throw ConfigError("unknown aggregation '" + std::string(s) + "' (expected plain|weighted)");
}

HaltingMetric parse_halting_metric(std::string_view s) {
  if (s == "accuracy") return HaltingMetric::accuracy;
  if (s == "macro_f1" || s == "f1") return HaltingMetric::macro_f1;
  throw ConfigError("unknown halting metric '" + std::string(s) + "'");
}

void HaltingCriterion::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("halting threshold must lie in [0, 1]");
  if (max_rounds < 1) throw ConfigError("halting max_rounds must be positive");
}

namespace {

void check_updates(const std::vector<ClientUpdate>& updates) {
  if (updates.empty()) throw ProtocolError("aggregation over an empty update set");
  for (const auto& u : updates) {
    if (!u.params.compatible_with(updates.front().params)) {
      throw ShapeError("client " + std::to_string(u.client_id) +
                       " sent weights with a different manifest");
    }
  }
}

}  // namespace

ParameterVector aggregate_plain(const std::vector<ClientUpdate>& updates) {
  check_updates(updates);
  ParameterVector out(updates.front().params.manifest());
  auto dst = out.values();
  const auto k = static_cast<long double>(updates.size());
  // Extended-precision accumulation keeps the result within half an ulp of the exact mean.
  for (std::size_t i = 0; i < dst.size(); ++i) {
    long double acc = 0.0L;
    for (const auto& u : updates) acc += u.params[i];
    dst[i] = static_cast<double>(acc / k);
  }
  return out;
}

ParameterVector aggregate_weighted(const std::vector<ClientUpdate>& updates) {
  check_updates(updates);
  long double total = 0.0L;
  for (const auto& u : updates) {
    if (u.train_sample_count == 0) {
      throw ProtocolError("client " + std::to_string(u.client_id) + " reported zero training samples");
    }
    total += static_cast<long double>(u.train_sample_count);
  }
  ParameterVector out(updates.front().params.manifest());
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    long double acc = 0.0L;
    for (const auto& u : updates) acc += static_cast<long double>(u.train_sample_count) * u.params[i];
    dst[i] = static_cast<double>(acc / total);
  }
  return out;
}

ParameterVector aggregate(const std::vector<ClientUpdate>& updates, AggregationKind kind) {
  return kind == AggregationKind::plain ? aggregate_plain(updates) : aggregate_weighted(updates);
}

MetricsReport aggregate_metrics(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw ProtocolError("aggregate_metrics: no reports");
  const std::size_t c = reports.front().class_count();
  MetricsReport out;
  out.confusion.assign(c, std::vector<std::size_t>(c, 0));
  long double acc = 0, prec = 0, rec = 0, f1 = 0, loss = 0;
  for (const auto& r : reports) {
    if (r.class_count() != c) throw ProtocolError("aggregate_metrics: class count mismatch");
    acc += r.accuracy;
    prec += r.macro_precision;
    rec += r.macro_recall;
    f1 += r.macro_f1;
    loss += r.mean_loss;
    out.sample_count += r.sample_count;
    for (std::size_t t = 0; t < c; ++t) {
      for (std::size_t p = 0; p < c; ++p) out.confusion[t][p] += r.confusion[t][p];
    }
  }
  const auto k = static_cast<long double>(reports.size());
  out.accuracy = static_cast<double>(acc / k);
  out.macro_precision = static_cast<double>(prec / k);
  out.macro_recall = static_cast<double>(rec / k);
  out.macro_f1 = static_cast<double>(f1 / k);
  out.mean_loss = static_cast<double>(loss / k);
  return out;
}

double halting_value(const MetricsReport& aggregated, HaltingMetric metric) {
  return metric == HaltingMetric::accuracy ? aggregated.accuracy : aggregated.macro_f1;
}

bool should_halt(const MetricsReport& aggregated, const HaltingCriterion& criterion, int round) {
  return halting_value(aggregated, criterion.metric) >= criterion.threshold ||
         round >= criterion.max_rounds;
}

}  // namespace fedsel
