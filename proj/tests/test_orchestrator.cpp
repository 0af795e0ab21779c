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
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <mutex>

#include "fedsel/data.hpp"
#include "fedsel/error.hpp"
#include "fedsel/orchestrator.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fedsel;

namespace {

struct World {
  CorpusSpec corpus;
  ModelSpec spec;
  PartitionResult data;

  explicit World(std::size_t k = 4, std::uint64_t seed = 1) {
    corpus.per_class_train = 10;
    corpus.per_class_val = 4;
    corpus.per_class_test = 4;
    corpus.per_class_external = 4;
    corpus.feature_dim = 6;
    corpus.seed = seed;
    spec = ModelSpec{{6, 8, 5}, Activation::relu, seed};
    PartitionSpec p = k == 1 ? PartitionSpec{1, {0}} : PartitionSpec::label_skew(k, 5);
    data = partition(generate_corpus(corpus, k), p, corpus);
  }
};

FederationConfig fed_cfg(std::size_t k, Workflow w, int rounds = 3) {
  FederationConfig c;
  c.client_count = k;
  c.rounds = rounds;
  c.local.epochs = 3;
  c.local.optimizer = {0.02, 0.9, 16};
  c.local.strategy = StrategyKind::oews;
  c.workflow = w;
  c.master_seed = 42;
  if (w == Workflow::industrial) c.halting = HaltingCriterion{HaltingMetric::accuracy, 0.95, rounds};
  return c;
}

MetricsReport with_accuracy(double a) {
  MetricsReport r;
  r.accuracy = a;
  r.macro_f1 = a;
  return r;
}

}  // namespace

TEST_CASE("a single client federation equals sequential local training") {
  World w(1);
  auto cfg = fed_cfg(1, Workflow::academic, 3);
  auto res = run_federation(cfg, w.spec, w.data.clients, w.data.evals);

  ParameterVector g = init_parameters(w.spec);
  for (int r = 1; r <= 3; ++r) {
    Rng stream(client_stream_seed(cfg.master_seed, r, 0));
    g = run_local(g, w.spec, w.data.clients[0], cfg.local, stream).selected_params;
  }
  CHECK(res.final_params == g);
}

TEST_CASE("industrial run with threshold 0 halts after one round") {
  World w;
  auto cfg = fed_cfg(4, Workflow::industrial, 5);
  cfg.halting->threshold = 0.0;
  auto res = run_federation(cfg, w.spec, w.data.clients, w.data.evals);
  REQUIRE(res.records.size() == 1);
  CHECK(res.records[0].halted);
  CHECK(res.records[0].aggregated_metrics.has_value());
  CHECK_FALSE(res.records[0].global_metrics.has_value());
}

TEST_CASE("industrial run with an unreachable threshold runs max_rounds") {
  World w;
  auto cfg = fed_cfg(4, Workflow::industrial, 3);
  cfg.halting->threshold = 1.0;
  cfg.local.optimizer.learning_rate = 0.0;  // the model never improves
  auto res = run_federation(cfg, w.spec, w.data.clients, w.data.evals);
  REQUIRE(res.records.size() == 3);
  CHECK_FALSE(res.records[1].halted);
  CHECK(res.records[2].halted);
}

TEST_CASE("industrial halting happens at the first round meeting the threshold") {
  World w;
  auto cfg = fed_cfg(4, Workflow::industrial, 6);
  cfg.halting->threshold = 1.0;
  auto full = run_federation(cfg, w.spec, w.data.clients, w.data.evals);
  const std::size_t n = full.records.size();
  REQUIRE(n >= 2);
  std::vector<double> trace;
  for (const auto& r : full.records) trace.push_back(r.aggregated_metrics->accuracy);
  trace.resize(6, 1.0);
  // Replay with the threshold set to the value reached in round 2.
  cfg.halting->threshold = trace[1];
  const int want = oracle::expected_halt_round(trace, trace[1], 6);
  auto res = run_federation(cfg, w.spec, w.data.clients, w.data.evals);
  REQUIRE(static_cast<int>(res.records.size()) == want);
  for (int i = 0; i < want; ++i) {
    CHECK(res.records[static_cast<std::size_t>(i)].aggregated_metrics == full.records[static_cast<std::size_t>(i)].aggregated_metrics);
  }
}

TEST_CASE("industrial aggregated metrics are the mean of client test metrics") {
  World w;
  auto cfg = fed_cfg(4, Workflow::industrial, 2);
  cfg.halting->threshold = 1.0;
  std::vector<ParameterVector> starts;
  FederationHooks hooks;
  hooks.on_client_start = [&](int, int k, const ParameterVector& p) {
    if (k == 0) starts.push_back(p);
  };
  auto res = run_federation(cfg, w.spec, w.data.clients, w.data.evals, hooks);
  REQUIRE(starts.size() == res.records.size());
  for (std::size_t r = 0; r < res.records.size(); ++r) {
    std::vector<std::vector<double>> acc;
    for (std::size_t k = 0; k < 4; ++k) {
      const auto m = evaluate(starts[r], w.spec, w.data.clients[k].test);
      CHECK(res.records[r].per_client_metrics[k] == m);
      acc.push_back({m.accuracy});
    }
    CHECK(res.records[r].aggregated_metrics->accuracy == doctest::Approx(oracle::mean_of(acc)[0]).epsilon(1e-15));
  }
}

TEST_CASE("academic run has a fixed horizon and server metrics") {
  World w;
  auto cfg = fed_cfg(4, Workflow::academic, 5);
  std::vector<RoundPhase> phases;
  FederationHooks hooks;
  hooks.on_phase = [&](RoundPhase p) { phases.push_back(p); };
  auto res = run_federation(cfg, w.spec, w.data.clients, w.data.evals, hooks);
  REQUIRE(res.records.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(res.records[i].round == static_cast<int>(i) + 1);
    REQUIRE(res.records[i].global_metrics.has_value());
    CHECK(res.records[i].selected_epochs.size() == 4);
    CHECK(res.records[i].halted == (i == 4));
  }
  CHECK(*res.records.back().global_metrics == evaluate(res.final_params, w.spec, w.data.evals.global_test));
  CHECK(phases.front() == RoundPhase::broadcast);
  CHECK(phases.back() == RoundPhase::finished);
  CHECK(std::count(phases.begin(), phases.end(), RoundPhase::client_evaluation) == 0);
}

TEST_CASE("federation is deterministic and parallel equals sequential") {
  World w;
  auto cfg = fed_cfg(4, Workflow::academic, 2);
  auto a = run_federation(cfg, w.spec, w.data.clients, w.data.evals);
  auto b = run_federation(cfg, w.spec, w.data.clients, w.data.evals);
  cfg.parallel = false;
  auto c = run_federation(cfg, w.spec, w.data.clients, w.data.evals);
  CHECK(a.final_params == b.final_params);
  CHECK(a.final_params == c.final_params);
  CHECK(a.records == c.records);
}

TEST_CASE("every client starts a round from the same global weights") {
  World w;
  auto cfg = fed_cfg(4, Workflow::academic, 3);
  std::mutex mu;
  std::map<int, std::vector<ParameterVector>> seen;
  FederationHooks hooks;
  hooks.on_client_start = [&](int round, int, const ParameterVector& p) {
    std::lock_guard lock(mu);
    seen[round].push_back(p);
  };
  auto res = run_federation(cfg, w.spec, w.data.clients, w.data.evals, hooks);
  REQUIRE(seen.size() == 3);
  for (auto& [round, ps] : seen) {
    REQUIRE(ps.size() == 4);
    for (const auto& p : ps) CHECK(p == ps.front());
  }
  CHECK(seen[1].front() == init_parameters(w.spec));
}

TEST_CASE("federation step refuses to run past the end") {
  World w;
  auto cfg = fed_cfg(4, Workflow::academic, 1);
  Federation fed(cfg, w.spec, w.data.clients, w.data.evals);
  auto rec = fed.step();
  CHECK(rec.halted);
  CHECK(fed.finished());
  CHECK_THROWS_AS(fed.step(), ProtocolError);
}

TEST_CASE("a failing client aborts the round with a protocol error") {
  World w;
  auto clients = w.data.clients;
  clients[2].val = Split{};
  for (bool parallel : {true, false}) {
    auto cfg = fed_cfg(4, Workflow::academic, 2);
    cfg.parallel = parallel;
    CHECK_THROWS_AS(run_federation(cfg, w.spec, clients, w.data.evals), ProtocolError);
  }
}

TEST_CASE("federation config validation") {
  World w;
  auto cfg = fed_cfg(3, Workflow::academic, 2);
  CHECK_THROWS_AS(run_federation(cfg, w.spec, w.data.clients, w.data.evals), ConfigError);
  auto ind = fed_cfg(4, Workflow::industrial, 2);
  ind.halting.reset();
  CHECK_THROWS_AS(ind.validate(), ConfigError);
  auto zero = fed_cfg(4, Workflow::academic, 0);
  CHECK_THROWS_AS(zero.validate(), ConfigError);
}

TEST_CASE("halting monitor follows the first-crossing rule") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int max_rounds = 1 + static_cast<int>(rng.index(8));
    std::vector<double> trace;
    for (int i = 0; i < max_rounds; ++i) trace.push_back(rng.uniform());
    const double t = rng.uniform(0.0, 1.0);
    HaltingMonitor mon({HaltingMetric::accuracy, t, max_rounds});
    int halted_at = 0;
    for (double v : trace) {
      if (mon.record(with_accuracy(v))) {
        halted_at = mon.rounds_seen();
        break;
      }
    }
    CHECK(halted_at == oracle::expected_halt_round(trace, t, max_rounds));
    CHECK_THROWS_AS(mon.record(with_accuracy(0.0)), ProtocolError);
  }
}

TEST_CASE("early stopper hand trace") {
  // Peak at epoch 3, then strictly worse.
  EarlyStopper s(4);
  const std::vector<double> trace{0.1, 0.2, 0.9, 0.5, 0.9, 0.4, 0.3, 0.2, 0.1};
  int stopped = 0;
  for (std::size_t e = 0; e < trace.size(); ++e) {
    s.observe(static_cast<int>(e) + 1, trace[e]);
    if (s.should_stop()) {
      stopped = static_cast<int>(e) + 1;
      break;
    }
  }
  CHECK(s.best_epoch() == 3);
  CHECK(stopped == 3 + 4);
}

TEST_CASE("centralized baseline early stopping") {
  World w;
  auto merged = merge_for_centralized(w.data.clients);
  BaselineConfig b;
  b.optimizer = {0.02, 0.9, 16};
  b.seed = 9;

  SUBCASE("patience equal to max_epochs trains every epoch") {
    b.max_epochs = 6;
    b.patience = 6;
    auto r = run_centralized(b, merged.train, merged.val, w.spec);
    CHECK(r.epochs_run == 6);
    CHECK(r.val_log.size() == 6);
  }
  SUBCASE("stops patience epochs after the best epoch and returns its snapshot") {
    b.max_epochs = 60;
    b.patience = 3;
    auto r = run_centralized(b, merged.train, merged.val, w.spec);
    std::vector<double> f1;
    for (const auto& m : r.val_log) f1.push_back(m.macro_f1);
    // First epoch reaching the maximum.
    const int best = static_cast<int>(std::max_element(f1.begin(), f1.end()) - f1.begin()) + 1;
    CHECK(r.best_epoch == best);
    if (r.epochs_run < b.max_epochs) CHECK(r.epochs_run == best + b.patience);
    CHECK(evaluate(r.params, w.spec, merged.val) == r.val_log[static_cast<std::size_t>(best - 1)]);
  }
  SUBCASE("empty data is rejected") {
    CHECK_THROWS_AS(run_centralized(b, Split{}, merged.val, w.spec), DataError);
  }
}

TEST_CASE("final evaluation delegates to evaluate and reports confidence") {
  World w;
  auto params = init_parameters(w.spec);
  auto rep = evaluate_final(params, w.spec, w.data.evals, w.data.clients);
  CHECK(rep.global == evaluate(params, w.spec, w.data.evals.global_test));
  CHECK(rep.external == evaluate(params, w.spec, w.data.evals.external_test));
  CHECK(rep.per_client.size() == 4);

  ParameterVector zero(params.manifest());
  auto c = confidence_summary(zero, w.spec, w.data.evals.global_test);
  CHECK(c.mean_confidence_all == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(c.total == w.data.evals.global_test.size());
}

TEST_CASE("a perfect model scores 1 everywhere") {
  // Identity-like weights on well separated one-hot style data.
  CorpusSpec c;
  c.feature_dim = 5;
  c.noise_scale = 0.01;
  c.class_separation = 10.0;
  c.per_class_train = 4;
  c.per_class_val = 2;
  c.per_class_test = 3;
  c.per_class_external = 3;
  auto data = partition(generate_corpus(c, 4), PartitionSpec::label_skew(4, 5), c);
  ModelSpec spec{{5, 5}, Activation::relu, 1};
  ParameterVector p(manifest_for(spec));
  for (std::size_t i = 0; i < 5; ++i) p.weights(0)[i * 5 + i] = 1.0;
  auto rep = evaluate_final(p, spec, data.evals, data.clients);
  CHECK(rep.global.accuracy == 1.0);
  CHECK(rep.global.macro_f1 == 1.0);
  CHECK(rep.external.macro_precision == 1.0);
  CHECK(rep.external.macro_recall == 1.0);
  CHECK(rep.global_confidence.correct == rep.global_confidence.total);
}

TEST_CASE("metrics log lines are valid JSON mirroring the records") {
  World w;
  auto dir = std::filesystem::temp_directory_path() / "fedsel_log_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  auto cfg = fed_cfg(4, Workflow::industrial, 2);
  cfg.halting->threshold = 1.0;
  std::vector<RoundRecord> recs;
  {
    MetricsLog log(dir, "t1", cfg.workflow, cfg.local.strategy);
    FederationHooks hooks;
    hooks.on_round = [&](const RoundRecord& r) {
      log.append(r);
      recs.push_back(r);
    };
    run_federation(cfg, w.spec, w.data.clients, w.data.evals, hooks);
  }
  std::ifstream in(dir / "t1.metrics.jsonl");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    const auto& r = recs[n];
    CHECK(j["run_id"] == "t1");
    CHECK(j["round"] == r.round);
    CHECK(j["workflow"] == "industrial");
    CHECK(j["strategy"] == "oews");
    CHECK(j["halted"] == r.halted);
    CHECK(j["global"].is_null());
    CHECK(j["aggregated"]["accuracy"].get<double>() == doctest::Approx(r.aggregated_metrics->accuracy).epsilon(1e-6));
    CHECK(j["clients"].size() == 4);
    CHECK(j["selected_epochs"].get<std::vector<int>>() == r.selected_epochs);
    ++n;
  }
  CHECK(n == recs.size());
  CHECK(std::filesystem::exists(dir / "t1.metrics.txt"));
  std::filesystem::remove_all(dir);
}
