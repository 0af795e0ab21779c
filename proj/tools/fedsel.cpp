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

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fedsel/error.hpp"
#include "fedsel/experiment.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,
  kData = 3,
  kIo = 4,
  kSubRunFailed = 5,
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> strategy;
  std::optional<std::string> workflow;
  std::optional<int> rounds;
  std::optional<int> epochs;
  std::vector<std::string> overrides;
  std::vector<std::uint64_t> seeds;
};

fedsel::ExperimentConfig load(const Options& o) {
  fedsel::ConfigMap keys;
  if (!o.config.empty()) keys = fedsel::ConfigMap::load(o.config);
  if (const char* env = std::getenv("FEDSEL_SEED"); env && *env) keys.set("seed", env);
  for (const auto& kv : o.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw fedsel::ConfigError("--set expects key=value, got '" + kv + "'");
    keys.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) keys.set("seed", std::to_string(*o.seed));
  if (o.out) keys.set("output.dir", *o.out);
  if (o.strategy) keys.set("federation.strategy", *o.strategy);
  if (o.workflow) keys.set("federation.workflow", *o.workflow);
  if (o.rounds) keys.set("federation.rounds", std::to_string(*o.rounds));
  if (o.epochs) keys.set("federation.local_epochs", std::to_string(*o.epochs));
  // An explicit seed also pins the corpus and federation seeds.
  if (o.seed || std::getenv("FEDSEL_SEED")) {
    auto entries = keys.entries();
    fedsel::ConfigMap filtered;
    for (auto& [k, v] : entries) {
      if (k != "corpus.seed" && k != "federation.seed") filtered.set(k, v);
    }
    keys = filtered;
  }
  return fedsel::resolve_config(keys);
}

int run_command(const std::string& name, const Options& o) {
  const auto cfg = load(o);
  if (name == "generate") {
    auto r = fedsel::cmd_generate(cfg);
    std::cout << r.summary;
    std::cout << "wrote " << r.csv_path.string() << " and " << r.summary_path.string() << "\n";
    return kOk;
  }
  if (name == "run") {
    auto r = fedsel::cmd_run(cfg);
    if (r.federation) {
      for (const auto& rec : r.federation->records) {
        std::cout << fedsel::format_round_text(r.manifest.run_id, cfg.federation.workflow,
                                               cfg.federation.local.strategy, rec)
                  << "\n";
      }
      const auto& f = *r.federation_report;
      std::cout << fmt::format("federated: global f1={:.4f} external f1={:.4f}\n", f.global.macro_f1,
                               f.external.macro_f1);
    }
    if (r.centralized) {
      const auto& c = *r.centralized_report;
      std::cout << fmt::format("centralized: best_epoch={} global f1={:.4f} external f1={:.4f}\n",
                               r.centralized->best_epoch, c.global.macro_f1, c.external.macro_f1);
    }
    for (const auto& p : r.files) std::cout << "wrote " << p.string() << "\n";
    return kOk;
  }
  if (name == "compare") {
    std::vector<std::uint64_t> seeds = o.seeds;
    if (seeds.empty()) seeds = cfg.compare_seeds;
    if (seeds.empty()) {
      for (std::uint64_t s = 0; s < 10; ++s) seeds.push_back(cfg.federation.master_seed + s);
    }
    auto r = fedsel::cmd_compare(cfg, seeds);
    std::cout << r.global_summary.to_text() << "\n" << r.external_summary.to_text();
    for (const auto& f : r.failures) std::cerr << "sub-run failed: " << f << "\n";
    return r.failures.empty() ? kOk : kSubRunFailed;
  }
  if (name == "report") {
    std::cout << fedsel::cmd_report(cfg);
    return kOk;
  }
  return kInternal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedsel: federated weight-selection simulator"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "flat key = value config file");
    sub->add_option("--seed", o.seed, "master seed (corpus and federation)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--strategy", o.strategy, "fews|oews");
    sub->add_option("--workflow", o.workflow, "academic|industrial");
    sub->add_option("--rounds", o.rounds, "communication rounds");
    sub->add_option("--epochs", o.epochs, "local epochs per round");
    sub->add_option("--set", o.overrides, "override a config key (key=value)");
  };
  add_common(app.add_subcommand("generate", "write the synthetic dataset and partition summary"));
  add_common(app.add_subcommand("run", "train one federated and/or centralized model"));
  add_common(app.add_subcommand("report", "render logs and comparison tables in the output directory"));
  auto* compare = app.add_subcommand("compare", "multi-seed FEWS/OEWS/centralized comparison");
  add_common(compare);
  compare->add_option("--seeds", o.seeds, "explicit seed list");

  CLI11_PARSE(app, argc, argv);
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return run_command(name, o);
  } catch (const fedsel::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const fedsel::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const fedsel::ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const fedsel::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const fedsel::ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kSubRunFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
}
