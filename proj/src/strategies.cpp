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

#include "fedsel/strategies.hpp"

#include <string>

#include "fedsel/error.hpp"

namespace fedsel {

std::string_view to_string(StrategyKind s) { return s == StrategyKind::fews ? "fews" : "oews"; }

std::string_view to_string(SelectionMetric m) {
  switch (m) {
    case SelectionMetric::macro_f1: return "macro_f1";
    case SelectionMetric::accuracy: return "accuracy";
    case SelectionMetric::val_loss: return "val_loss";
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view s) {
  if (s == "fews" || s == "FEWS") return StrategyKind::fews;
  if (s == "oews" || s == "OEWS") return StrategyKind::oews;
  throw ConfigError("unknown strategy '" + std::string(s) + "' (expected fews|oews)");
}

SelectionMetric parse_selection_metric(std::string_view s) {
  if (s == "macro_f1" || s == "f1") return SelectionMetric::macro_f1;
  if (s == "accuracy") return SelectionMetric::accuracy;
  if (s == "val_loss" || s == "loss") return SelectionMetric::val_loss;
  throw ConfigError("unknown selection metric '" + std::string(s) + "'");
}

double selection_score(const MetricsReport& report, SelectionMetric metric) {
  switch (metric) {
    case SelectionMetric::macro_f1: return report.macro_f1;
    case SelectionMetric::accuracy: return report.accuracy;
    case SelectionMetric::val_loss: return -report.mean_loss;
  }
  return report.macro_f1;
}

int select_epoch(std::span<const double> scores) {
  if (scores.empty()) throw ConfigError("select_epoch: empty trace");
  EpochSelector sel;
  for (std::size_t e = 0; e < scores.size(); ++e) sel.observe(static_cast<int>(e) + 1, scores[e]);
  return *sel.best_epoch();
}

const MetricsReport& LocalRunResult::selected_val() const {
  if (selected_epoch == 0) return incoming_val.value();
  return per_epoch_val.at(static_cast<std::size_t>(selected_epoch - 1));
}

void LocalTrainingConfig::validate() const {
  optimizer.validate();
  if (epochs < 1) throw ConfigError("local epochs must be at least 1");
}

LocalRunResult run_local(const ParameterVector& global_params, const ModelSpec& spec,
                         const ClientDataset& client, const LocalTrainingConfig& cfg,
                         Rng& stream) {
  cfg.validate();
  if (client.train.empty()) throw DataError("run_local: client has no training samples");
  if (client.val.empty()) throw DataError("run_local: client has no validation samples");

  LocalRunResult out;
  out.train_sample_count = client.train.size();
  out.per_epoch_val.reserve(static_cast<std::size_t>(cfg.epochs));

  ParameterVector params = global_params;
  OptimizerState state = OptimizerState::fresh(cfg.optimizer, params.manifest());

  const bool oews = cfg.strategy == StrategyKind::oews;
  EpochSelector selector;
  ParameterVector best;  // at most one snapshot is held
  if (oews && cfg.consider_incoming) {
    out.incoming_val = evaluate(params, spec, client.val);
    selector.observe(0, selection_score(*out.incoming_val, cfg.selection));
    best = params;
  }

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto step = train_epoch(std::move(params), spec, std::move(state), client.train, stream);
    params = std::move(step.params);
    state = std::move(step.state);
    out.per_epoch_val.push_back(evaluate(params, spec, client.val));
    if (oews && selector.observe(epoch, selection_score(out.per_epoch_val.back(), cfg.selection))) {
      best = params;
    }
  }

  if (oews) {
    out.selected_epoch = *selector.best_epoch();
    out.selected_params = std::move(best);
  } else {
    out.selected_epoch = cfg.epochs;
    out.selected_params = std::move(params);
  }
  return out;
}

}  // namespace fedsel
