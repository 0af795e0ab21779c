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
#include <string_view>
#include <vector>

#include "fedsel/metrics.hpp"
#include "fedsel/nn.hpp"

namespace fedsel {

struct ClientUpdate {
  int client_id = 0;
  ParameterVector params;
  MetricsReport local_metrics;
  std::size_t train_sample_count = 0;
};

enum class AggregationKind { plain, weighted };

enum class HaltingMetric { accuracy, macro_f1 };

std::string_view to_string(AggregationKind k);
std::string_view to_string(HaltingMetric m);
AggregationKind parse_aggregation(std::string_view s);
HaltingMetric parse_halting_metric(std::string_view s);

struct HaltingCriterion {
  HaltingMetric metric = HaltingMetric::accuracy;
  double threshold = 0.95;
  int max_rounds = 5;

  void validate() const;
};

// Elementwise (1/K) sum_k w_k, ignoring sample counts.
ParameterVector aggregate_plain(const std::vector<ClientUpdate>& updates);

// Elementwise sum_k (n_k / sum n) w_k.
ParameterVector aggregate_weighted(const std::vector<ClientUpdate>& updates);

ParameterVector aggregate(const std::vector<ClientUpdate>& updates, AggregationKind kind);

// Unweighted mean of every scalar metric; confusion matrices and sample
// counts are summed.
MetricsReport aggregate_metrics(const std::vector<MetricsReport>& reports);

double halting_value(const MetricsReport& aggregated, HaltingMetric metric);

bool should_halt(const MetricsReport& aggregated, const HaltingCriterion& criterion, int round);

}  // namespace fedsel
