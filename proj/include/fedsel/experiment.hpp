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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedsel/data.hpp"
#include "fedsel/orchestrator.hpp"

namespace fedsel {

// Flat `key = value` configuration text. `#` starts a comment.
class ConfigMap {
 public:
  static ConfigMap parse(std::string_view text, std::string_view source = "<config>");
  static ConfigMap load(const std::filesystem::path& path);

  void set(std::string key, std::string value) { entries_[std::move(key)] = std::move(value); }
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

// Named bundles of config keys applied before any explicit key.
std::vector<std::string> preset_names();
ConfigMap preset(std::string_view name);

// Every documented config key.
const std::vector<std::string>& known_config_keys();

enum class RunMode { federated, centralized, both };

struct ExperimentConfig {
  std::string preset = "epochs15_rounds5";
  CorpusSpec corpus;
  PartitionSpec partition = PartitionSpec::label_skew(4, 5);
  std::vector<std::size_t> hidden = {32};
  Activation activation = Activation::relu;
  FederationConfig federation;
  BaselineConfig baseline;
  RunMode run_mode = RunMode::federated;
  std::optional<std::filesystem::path> data_path;
  std::filesystem::path out_dir = "out";
  std::string run_id;  // empty: derived from the config hash
  std::vector<std::uint64_t> compare_seeds;

  void validate() const;
  ModelSpec model_spec() const;
  // Sets both the corpus seed and the federation master seed.
  void set_seed(std::uint64_t seed);
};

// Resolves preset + keys into a validated config. Unknown keys or bad values
// throw ConfigError naming the key.
ExperimentConfig resolve_config(const ConfigMap& keys);

// Sorted `key = value` dump of every resolved setting except output.*.
std::string canonical_config(const ExperimentConfig& cfg);

// Hex SHA-1 of `blob <size>\0<content>`, the object id git assigns to a file.
std::string git_blob_hash(std::string_view content);

struct RunManifest {
  std::string run_id;
  std::string config_snapshot;
  std::string config_hash;
  std::filesystem::path output_dir;

  static RunManifest create(const ExperimentConfig& cfg);
  std::string to_json() const;
};

// Text weights file: header, manifest, then one 17-digit value per line.
std::string format_weights(const ParameterVector& params);
ParameterVector parse_weights(std::string_view text);

struct Dataset {
  std::vector<ClientDataset> clients;
  EvalSets evals;
};

Dataset build_dataset(const ExperimentConfig& cfg);

struct GenerateOutcome {
  std::filesystem::path csv_path;
  std::filesystem::path summary_path;
  std::string summary;
};

GenerateOutcome cmd_generate(const ExperimentConfig& cfg);

struct RunOutcome {
  RunManifest manifest;
  std::optional<FederationResult> federation;
  std::optional<FinalReport> federation_report;
  std::optional<CentralizedResult> centralized;
  std::optional<FinalReport> centralized_report;
  std::vector<std::filesystem::path> files;
};

RunOutcome cmd_run(const ExperimentConfig& cfg);

// One row of a comparison table. `sd` is empty for single-seed tables.
struct TableRow {
  std::string key;
  bool failed = false;
  std::vector<double> mean;
  std::vector<double> sd;
};

struct ComparisonTable {
  std::string title;
  std::vector<std::string> columns = {"test_acc", "precision", "recall", "f1", "confidence"};
  std::vector<TableRow> rows;

  const TableRow& row(std::string_view key) const;
  std::string to_csv() const;
  std::string to_text() const;
  static ComparisonTable from_csv(std::string_view text);
};

struct VariantResult {
  std::string key;
  bool failed = false;
  std::string error;
  FinalReport report;
};

struct SeedComparison {
  std::uint64_t seed = 0;
  std::vector<VariantResult> variants;  // clients, fl_fews, fl_oews, centralized

  const VariantResult& variant(std::string_view key) const;
  ComparisonTable table(bool external) const;
};

// All model variants for one seed, evaluated on the same EvalSets.
SeedComparison compare_seed(const ExperimentConfig& cfg, std::uint64_t seed);

// Mean and sample standard deviation across seeds, per row and column.
ComparisonTable summarize(const std::vector<SeedComparison>& seeds, bool external);

struct CompareOutcome {
  std::vector<SeedComparison> seeds;
  ComparisonTable global_summary;
  ComparisonTable external_summary;
  std::vector<std::string> failures;
  std::vector<std::filesystem::path> files;
};

CompareOutcome cmd_compare(const ExperimentConfig& cfg, std::span<const std::uint64_t> seeds);

// Renders every metrics log and comparison CSV found in cfg.out_dir.
std::string cmd_report(const ExperimentConfig& cfg);

}  // namespace fedsel
