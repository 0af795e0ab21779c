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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedsel/aggregation.hpp"
#include "fedsel/data.hpp"
#include "fedsel/metrics.hpp"
#include "fedsel/nn.hpp"
#include "fedsel/strategies.hpp"

namespace fedsel {

// academic: the server scores every new global model on the global test set.
// industrial: clients score the incoming global model on their local test
// splits, the server averages those metrics and halts at a threshold.
enum class Workflow { academic, industrial };

std::string_view to_string(Workflow w);
Workflow parse_workflow(std::string_view s);

struct FederationConfig {
  std::size_t client_count = 4;
  int rounds = 5;
  LocalTrainingConfig local;
  AggregationKind aggregation = AggregationKind::plain;
  Workflow workflow = Workflow::academic;
  std::optional<HaltingCriterion> halting;
  std::uint64_t master_seed = 0;
  bool parallel = true;

  void validate() const;
  // Number of rounds the run may execute: `rounds` for academic,
  // halting->max_rounds for industrial.
  int horizon() const;
};

struct RoundRecord {
  int round = 0;
  std::optional<MetricsReport> global_metrics;
  std::vector<MetricsReport> per_client_metrics;
  std::optional<MetricsReport> aggregated_metrics;
  std::vector<int> selected_epochs;
  bool halted = false;

  bool operator==(const RoundRecord&) const = default;
};

// Tracks the industrial stopping rule round by round.
class HaltingMonitor {
 public:
  explicit HaltingMonitor(HaltingCriterion criterion);

  // Feeds the aggregated metrics of the next round. Returns true once the
  // run must stop; further calls after halting throw ProtocolError.
  bool record(const MetricsReport& aggregated);

  int rounds_seen() const { return rounds_seen_; }
  bool halted() const { return halted_; }

 private:
  HaltingCriterion criterion_;
  int rounds_seen_ = 0;
  bool halted_ = false;
};

enum class RoundPhase {
  broadcast,
  client_evaluation,
  local_training,
  aggregation,
  server_evaluation,
  halting_check,
  finished,
};

std::string_view to_string(RoundPhase p);

// Seed of client `client_id`'s local training stream in round `round`.
std::uint64_t client_stream_seed(std::uint64_t master_seed, int round, int client_id);

struct FederationHooks {
  // Called on the orchestrator thread before local training fans out.
  std::function<void(int round, int client_id, const ParameterVector& start)> on_client_start;
  std::function<void(RoundPhase)> on_phase;
  std::function<void(const RoundRecord&)> on_round;
};

// Round-loop state machine. Each step() drives one communication round
// through broadcast -> (client evaluation) -> local training -> aggregation
// -> (server evaluation | halting check).
class Federation {
 public:
  Federation(FederationConfig cfg, ModelSpec spec, const std::vector<ClientDataset>& clients,
             const EvalSets& evals, FederationHooks hooks = {});

  bool finished() const { return phase_ == RoundPhase::finished; }
  int completed_rounds() const { return completed_; }
  RoundPhase phase() const { return phase_; }
  const ParameterVector& global_params() const { return global_; }

  RoundRecord step();

 private:
  void enter(RoundPhase p);
  std::vector<LocalRunResult> train_clients(int round);

  FederationConfig cfg_;
  ModelSpec spec_;
  const std::vector<ClientDataset>& clients_;
  const EvalSets& evals_;
  FederationHooks hooks_;
  std::optional<HaltingMonitor> monitor_;
  ParameterVector global_;
  RoundPhase phase_ = RoundPhase::broadcast;
  int completed_ = 0;
};

struct FederationResult {
  std::vector<RoundRecord> records;
  ParameterVector final_params;
};

FederationResult run_federation(const FederationConfig& cfg, const ModelSpec& spec,
                                const std::vector<ClientDataset>& clients, const EvalSets& evals,
                                FederationHooks hooks = {});

struct BaselineConfig {
  int max_epochs = 100;
  int patience = 30;
  OptimizerConfig optimizer;
  SelectionMetric monitor = SelectionMetric::macro_f1;
  std::uint64_t seed = 0;

  void validate() const;
};

// Patience-based early stopping. Only a strictly better score counts as an
// improvement, so the best epoch is the first one reaching the maximum.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  // Returns true if `score` improved on the best so far.
  bool observe(int epoch, double score);
  bool should_stop() const { return best_epoch_ > 0 && stale_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_score() const { return best_score_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  double best_score_ = 0.0;
  int stale_ = 0;
};

struct CentralizedResult {
  ParameterVector params;  // best-epoch snapshot
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<MetricsReport> val_log;
};

CentralizedResult run_centralized(const BaselineConfig& bcfg, const Split& train, const Split& val,
                                  const ModelSpec& spec);

struct ConfidenceSummary {
  double mean_confidence_correct = 0.0;  // mean max-probability over correct predictions
  double mean_confidence_all = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
};

ConfidenceSummary confidence_summary(const ParameterVector& params, const ModelSpec& spec,
                                     const Split& split);

struct FinalReport {
  MetricsReport global;
  MetricsReport external;
  std::vector<MetricsReport> per_client;
  ConfidenceSummary global_confidence;
  ConfidenceSummary external_confidence;
};

FinalReport evaluate_final(const ParameterVector& params, const ModelSpec& spec,
                           const EvalSets& evals, const std::vector<ClientDataset>& clients);

// One JSON object per line, metric values with 6 decimals.
std::string format_round_json(std::string_view run_id, Workflow workflow, StrategyKind strategy,
                              const RoundRecord& record);
std::string format_round_text(std::string_view run_id, Workflow workflow, StrategyKind strategy,
                              const RoundRecord& record);

// Append-only `<run_id>.metrics.jsonl` plus its `<run_id>.metrics.txt` mirror.
class MetricsLog {
 public:
  MetricsLog(const std::filesystem::path& dir, std::string run_id, Workflow workflow,
             StrategyKind strategy);

  void append(const RoundRecord& record);

  std::filesystem::path jsonl_path() const { return jsonl_path_; }
  std::filesystem::path text_path() const { return text_path_; }

 private:
  std::string run_id_;
  Workflow workflow_;
  StrategyKind strategy_;
  std::filesystem::path jsonl_path_;
  std::filesystem::path text_path_;
  std::ofstream jsonl_;
  std::ofstream text_;
};

}  // namespace fedsel
