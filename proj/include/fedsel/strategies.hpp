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
#include <optional>
#include <string_view>
#include <vector>

#include "fedsel/data.hpp"
#include "fedsel/metrics.hpp"
#include "fedsel/nn.hpp"
#include "fedsel/rng.hpp"

namespace fedsel {

// FEWS ships the last local epoch's weights; OEWS ships the weights of the
// local epoch that scored best on the client's validation split.
enum class StrategyKind { fews, oews };

enum class SelectionMetric { macro_f1, accuracy, val_loss };

std::string_view to_string(StrategyKind s);
std::string_view to_string(SelectionMetric m);
StrategyKind parse_strategy(std::string_view s);
SelectionMetric parse_selection_metric(std::string_view s);

// Higher is better for every metric; val_loss is negated.
double selection_score(const MetricsReport& report, SelectionMetric metric);

// Running argmax over epoch scores. Ties go to the later epoch.
class EpochSelector {
 public:
  // Returns true when `epoch` becomes the new best.
  bool observe(int epoch, double score) {
    if (!best_epoch_ || score >= best_score_) {
      best_epoch_ = epoch;
      best_score_ = score;
      return true;
    }
    return false;
  }
  std::optional<int> best_epoch() const { return best_epoch_; }
  double best_score() const { return best_score_; }

 private:
  std::optional<int> best_epoch_;
  double best_score_ = 0.0;
};

// Convenience over EpochSelector for a complete trace; epochs are 1-based.
int select_epoch(std::span<const double> scores);

struct LocalTrainingConfig {
  OptimizerConfig optimizer;
  int epochs = 15;
  StrategyKind strategy = StrategyKind::oews;
  SelectionMetric selection = SelectionMetric::macro_f1;
  // When set, the incoming global weights compete as epoch 0.
  bool consider_incoming = false;

  void validate() const;
};

struct LocalRunResult {
  ParameterVector selected_params;
  int selected_epoch = 0;
  std::vector<MetricsReport> per_epoch_val;  // epochs 1..E
  std::optional<MetricsReport> incoming_val;  // set when consider_incoming
  // Validation report of the selected epoch.
  const MetricsReport& selected_val() const;
  std::size_t train_sample_count = 0;
};

LocalRunResult run_local(const ParameterVector& global_params, const ModelSpec& spec,
                         const ClientDataset& client, const LocalTrainingConfig& cfg,
                         Rng& stream);

}  // namespace fedsel
