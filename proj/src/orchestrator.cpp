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

#include "fedsel/orchestrator.hpp"

#include <exception>
#include <future>
#include <string>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "fedsel/error.hpp"

namespace fedsel {

std::string_view to_string(Workflow w) { return w == Workflow::academic ? "academic" : "industrial"; }

Workflow parse_workflow(std::string_view s) {
  if (s == "academic") return Workflow::academic;
  if (s == "industrial") return Workflow::industrial;
  throw ConfigError("unknown workflow '" + std::string(s) + "' (expected academic|industrial)");
}

std::string_view to_string(RoundPhase p) {
  switch (p) {
    case RoundPhase::broadcast: return "broadcast";
    case RoundPhase::client_evaluation: return "client_evaluation";
    case RoundPhase::local_training: return "local_training";
    case RoundPhase::aggregation: return "aggregation";
    case RoundPhase::server_evaluation: return "server_evaluation";
    case RoundPhase::halting_check: return "halting_check";
    case RoundPhase::finished: return "finished";
  }
  return "?";
}

void FederationConfig::validate() const {
  if (client_count < 1) throw ConfigError("federation needs at least one client");
  if (rounds < 1) throw ConfigError("federation.rounds must be at least 1");
  local.validate();
  if (workflow == Workflow::industrial) {
    if (!halting) throw ConfigError("industrial workflow requires a halting criterion");
    halting->validate();
  }
}

int FederationConfig::horizon() const {
  return workflow == Workflow::industrial && halting ? halting->max_rounds : rounds;
}

HaltingMonitor::HaltingMonitor(HaltingCriterion criterion) : criterion_(criterion) {
  criterion_.validate();
}

bool HaltingMonitor::record(const MetricsReport& aggregated) {
  if (halted_) throw ProtocolError("round submitted after the federation halted");
  ++rounds_seen_;
  halted_ = should_halt(aggregated, criterion_, rounds_seen_);
  return halted_;
}

std::uint64_t client_stream_seed(std::uint64_t master_seed, int round, int client_id) {
  return derive_seed(master_seed, {0x10CA1ULL, static_cast<std::uint64_t>(round),
                                   static_cast<std::uint64_t>(client_id)});
}

Federation::Federation(FederationConfig cfg, ModelSpec spec,
                       const std::vector<ClientDataset>& clients, const EvalSets& evals,
                       FederationHooks hooks)
    : cfg_(std::move(cfg)),
      spec_(std::move(spec)),
      clients_(clients),
      evals_(evals),
      hooks_(std::move(hooks)) {
  cfg_.validate();
  if (clients_.size() != cfg_.client_count) {
    throw ConfigError(fmt::format("federation configured for {} clients, {} datasets supplied",
                                  cfg_.client_count, clients_.size()));
  }
  if (cfg_.workflow == Workflow::academic && evals_.global_test.empty()) {
    throw DataError("academic workflow needs a nonempty global test set");
  }
  if (cfg_.workflow == Workflow::industrial) monitor_.emplace(*cfg_.halting);
  global_ = init_parameters(spec_);
}

void Federation::enter(RoundPhase p) {
  phase_ = p;
  if (hooks_.on_phase) hooks_.on_phase(p);
}

std::vector<LocalRunResult> Federation::train_clients(int round) {
  const std::size_t k_count = clients_.size();
  std::vector<LocalRunResult> results(k_count);
  auto run_one = [&](std::size_t k) {
    Rng stream(client_stream_seed(cfg_.master_seed, round, static_cast<int>(k)));
    return run_local(global_, spec_, clients_[k], cfg_.local, stream);
  };
  auto fail = [](std::size_t k, const std::exception& e) {
    return ProtocolError(fmt::format("client {} failed: {}", k, e.what()));
  };
  if (cfg_.parallel && k_count > 1) {
    std::vector<std::future<LocalRunResult>> futures;
    futures.reserve(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
      futures.push_back(std::async(std::launch::async, run_one, k));
    }
    // Join every worker before reporting the first failure.
    std::optional<ProtocolError> first_error;
    for (std::size_t k = 0; k < k_count; ++k) {
      try {
        results[k] = futures[k].get();
      } catch (const std::exception& e) {
        if (!first_error) first_error = fail(k, e);
      }
    }
    if (first_error) throw *first_error;
  } else {
    for (std::size_t k = 0; k < k_count; ++k) {
      try {
        results[k] = run_one(k);
      } catch (const std::exception& e) {
        throw fail(k, e);
      }
    }
  }
  return results;
}

RoundRecord Federation::step() {
  if (finished()) throw ProtocolError("federation already finished");
  RoundRecord rec;
  rec.round = completed_ + 1;

  enter(RoundPhase::broadcast);
  if (hooks_.on_client_start) {
    for (std::size_t k = 0; k < clients_.size(); ++k) {
      hooks_.on_client_start(rec.round, static_cast<int>(k), global_);
    }
  }

  if (cfg_.workflow == Workflow::industrial) {
    enter(RoundPhase::client_evaluation);
    for (const auto& cd : clients_) rec.per_client_metrics.push_back(evaluate(global_, spec_, cd.test));
  }

  enter(RoundPhase::local_training);
  auto local = train_clients(rec.round);

  enter(RoundPhase::aggregation);
  std::vector<ClientUpdate> updates;
  updates.reserve(local.size());
  for (std::size_t k = 0; k < local.size(); ++k) {
    rec.selected_epochs.push_back(local[k].selected_epoch);
    ClientUpdate u;
    u.client_id = static_cast<int>(k);
    u.train_sample_count = local[k].train_sample_count;
    if (cfg_.workflow == Workflow::industrial) {
      u.local_metrics = rec.per_client_metrics[k];
    } else {
      u.local_metrics = local[k].selected_val();
      rec.per_client_metrics.push_back(u.local_metrics);
    }
    u.params = std::move(local[k].selected_params);
    updates.push_back(std::move(u));
  }
  global_ = aggregate(updates, cfg_.aggregation);

  bool halt = false;
  if (cfg_.workflow == Workflow::academic) {
    enter(RoundPhase::server_evaluation);
    rec.global_metrics = evaluate(global_, spec_, evals_.global_test);
    halt = rec.round >= cfg_.rounds;
  } else {
    enter(RoundPhase::halting_check);
    rec.aggregated_metrics = aggregate_metrics(rec.per_client_metrics);
    halt = monitor_->record(*rec.aggregated_metrics);
  }
  rec.halted = halt;
  ++completed_;
  if (hooks_.on_round) hooks_.on_round(rec);
  enter(halt ? RoundPhase::finished : RoundPhase::broadcast);
  return rec;
}

FederationResult run_federation(const FederationConfig& cfg, const ModelSpec& spec,
                                const std::vector<ClientDataset>& clients, const EvalSets& evals,
                                FederationHooks hooks) {
  Federation fed(cfg, spec, clients, evals, std::move(hooks));
  FederationResult out;
  while (!fed.finished()) out.records.push_back(fed.step());
  out.final_params = fed.global_params();
  return out;
}

void BaselineConfig::validate() const {
  optimizer.validate();
  if (max_epochs < 1) throw ConfigError("baseline.max_epochs must be at least 1");
  if (patience < 1 || patience > max_epochs) {
    throw ConfigError("baseline.patience must lie in [1, max_epochs]");
  }
}

bool EarlyStopper::observe(int epoch, double score) {
  if (best_epoch_ == 0 || score > best_score_) {
    best_epoch_ = epoch;
    best_score_ = score;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

CentralizedResult run_centralized(const BaselineConfig& bcfg, const Split& train, const Split& val,
                                  const ModelSpec& spec) {
  bcfg.validate();
  if (train.empty()) throw DataError("run_centralized: empty training split");
  if (val.empty()) throw DataError("run_centralized: empty validation split");

  CentralizedResult out;
  ParameterVector params = init_parameters(spec);
  OptimizerState state = OptimizerState::fresh(bcfg.optimizer, params.manifest());
  Rng stream(derive_seed(bcfg.seed, {0xCE47ULL}));
  EarlyStopper stopper(bcfg.patience);

  for (int epoch = 1; epoch <= bcfg.max_epochs; ++epoch) {
    auto step = train_epoch(std::move(params), spec, std::move(state), train, stream);
    params = std::move(step.params);
    state = std::move(step.state);
    out.val_log.push_back(evaluate(params, spec, val));
    out.epochs_run = epoch;
    if (stopper.observe(epoch, selection_score(out.val_log.back(), bcfg.monitor))) {
      out.params = params;
    }
    if (stopper.should_stop()) break;
  }
  out.best_epoch = stopper.best_epoch();
  return out;
}

ConfidenceSummary confidence_summary(const ParameterVector& params, const ModelSpec& spec,
                                     const Split& split) {
  ConfidenceSummary s;
  if (split.empty()) return s;
  const Matrix probs = forward(params, spec, split.features);
  const auto pred = argmax_rows(probs);
  double sum_correct = 0.0, sum_all = 0.0;
  for (std::size_t n = 0; n < split.size(); ++n) {
    const double p = probs(n, static_cast<std::size_t>(pred[n]));
    sum_all += p;
    if (pred[n] == split.labels[n]) {
      sum_correct += p;
      ++s.correct;
    }
  }
  s.total = split.size();
  s.mean_confidence_all = sum_all / static_cast<double>(s.total);
  s.mean_confidence_correct = s.correct ? sum_correct / static_cast<double>(s.correct) : 0.0;
  return s;
}

FinalReport evaluate_final(const ParameterVector& params, const ModelSpec& spec,
                           const EvalSets& evals, const std::vector<ClientDataset>& clients) {
  FinalReport r;
  r.global = evaluate(params, spec, evals.global_test);
  r.external = evaluate(params, spec, evals.external_test);
  for (const auto& cd : clients) r.per_client.push_back(evaluate(params, spec, cd.test));
  r.global_confidence = confidence_summary(params, spec, evals.global_test);
  r.external_confidence = confidence_summary(params, spec, evals.external_test);
  return r;
}

namespace {

std::string metrics_json(const MetricsReport& m) {
  return fmt::format(
      "{{\"accuracy\":{:.6f},\"precision\":{:.6f},\"recall\":{:.6f},\"f1\":{:.6f},\"samples\":{}}}",
      m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1, m.sample_count);
}

std::string metrics_text(const MetricsReport& m) {
  return fmt::format("acc={:.6f} precision={:.6f} recall={:.6f} f1={:.6f}", m.accuracy,
                     m.macro_precision, m.macro_recall, m.macro_f1);
}

}  // namespace

std::string format_round_json(std::string_view run_id, Workflow workflow, StrategyKind strategy,
                              const RoundRecord& record) {
  std::string clients;
  for (std::size_t k = 0; k < record.per_client_metrics.size(); ++k) {
    if (k) clients += ',';
    clients += metrics_json(record.per_client_metrics[k]);
  }
  return fmt::format(
      "{{\"run_id\":\"{}\",\"round\":{},\"workflow\":\"{}\",\"strategy\":\"{}\","
      "\"global\":{},\"aggregated\":{},\"clients\":[{}],\"selected_epochs\":[{}],\"halted\":{}}}",
      run_id, record.round, to_string(workflow), to_string(strategy),
      record.global_metrics ? metrics_json(*record.global_metrics) : "null",
      record.aggregated_metrics ? metrics_json(*record.aggregated_metrics) : "null", clients,
      fmt::join(record.selected_epochs, ","), record.halted ? "true" : "false");
}

std::string format_round_text(std::string_view run_id, Workflow workflow, StrategyKind strategy,
                              const RoundRecord& record) {
  std::string line = fmt::format("run={} round={} workflow={} strategy={}", run_id, record.round,
                                 to_string(workflow), to_string(strategy));
  if (record.global_metrics) line += " | global " + metrics_text(*record.global_metrics);
  if (record.aggregated_metrics) line += " | aggregated " + metrics_text(*record.aggregated_metrics);
  line += fmt::format(" | selected_epochs={} | halted={}", fmt::join(record.selected_epochs, ","),
                      record.halted ? "yes" : "no");
  return line;
}

MetricsLog::MetricsLog(const std::filesystem::path& dir, std::string run_id, Workflow workflow,
                       StrategyKind strategy)
    : run_id_(std::move(run_id)),
      workflow_(workflow),
      strategy_(strategy),
      jsonl_path_(dir / (run_id_ + ".metrics.jsonl")),
      text_path_(dir / (run_id_ + ".metrics.txt")) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  jsonl_.open(jsonl_path_, std::ios::trunc);
  text_.open(text_path_, std::ios::trunc);
  if (!jsonl_ || !text_) throw IoError("cannot open metrics log in " + dir.string());
}

void MetricsLog::append(const RoundRecord& record) {
  jsonl_ << format_round_json(run_id_, workflow_, strategy_, record) << '\n';
  text_ << format_round_text(run_id_, workflow_, strategy_, record) << '\n';
  jsonl_.flush();
  text_.flush();
  if (!jsonl_ || !text_) throw IoError("write to metrics log failed");
}

}  // namespace fedsel
