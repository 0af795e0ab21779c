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

#include "fedsel/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "fedsel/error.hpp"
#include "fedsel/io.hpp"

namespace fedsel {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  while (true) {
    auto pos = s.find(',');
    auto item = trim(s.substr(0, pos));
    if (!item.empty()) out.emplace_back(item);
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, std::string_view v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("invalid value for key '" + key + "': expected a nonnegative integer, got '" +
                      std::string(v) + "'");
  }
  return out;
}

double to_real(const std::string& key, std::string_view v) {
  try {
    const double d = parse_double(v);
    if (!std::isfinite(d)) throw DataError("not finite");
    return d;
  } catch (const DataError&) {
    throw ConfigError("invalid value for key '" + key + "': expected a number, got '" +
                      std::string(v) + "'");
  }
}

bool to_bool(const std::string& key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("invalid value for key '" + key + "': expected true|false");
}

template <typename Parse>
auto keyed(const std::string& key, Parse&& parse) {
  try {
    return parse();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.find("'" + key + "'") != std::string::npos) throw;
    throw ConfigError("invalid value for key '" + key + "': " + msg);
  }
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

struct ResolveState {
  bool missing_set = false;
  bool max_rounds_set = false;
};

std::map<std::string, Setter> make_setters(ResolveState& st) {
  std::map<std::string, Setter> s;
  s["preset"] = [](ExperimentConfig& c, const std::string&, const std::string& v) { c.preset = v; };
  s["seed"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.set_seed(to_u64(k, v)); };

  s["corpus.class_count"] = [](auto& c, auto& k, auto& v) { c.corpus.class_count = to_u64(k, v); };
  s["corpus.feature_dim"] = [](auto& c, auto& k, auto& v) { c.corpus.feature_dim = to_u64(k, v); };
  s["corpus.per_class_train"] = [](auto& c, auto& k, auto& v) { c.corpus.per_class_train = to_u64(k, v); };
  s["corpus.per_class_val"] = [](auto& c, auto& k, auto& v) { c.corpus.per_class_val = to_u64(k, v); };
  s["corpus.per_class_test"] = [](auto& c, auto& k, auto& v) { c.corpus.per_class_test = to_u64(k, v); };
  s["corpus.per_class_external"] = [](auto& c, auto& k, auto& v) { c.corpus.per_class_external = to_u64(k, v); };
  s["corpus.class_separation"] = [](auto& c, auto& k, auto& v) { c.corpus.class_separation = to_real(k, v); };
  s["corpus.noise_scale"] = [](auto& c, auto& k, auto& v) { c.corpus.noise_scale = to_real(k, v); };
  s["corpus.shift_magnitude"] = [](auto& c, auto& k, auto& v) { c.corpus.shift_magnitude = to_real(k, v); };
  s["corpus.seed"] = [](auto& c, auto& k, auto& v) { c.corpus.seed = to_u64(k, v); };

  s["partition.client_count"] = [](auto& c, auto& k, auto& v) {
    c.partition.client_count = to_u64(k, v);
    c.federation.client_count = c.partition.client_count;
  };
  s["partition.missing_classes"] = [&st](auto& c, auto& k, auto& v) {
    c.partition.missing_class.clear();
    for (const auto& item : split_list(v)) c.partition.missing_class.push_back(static_cast<int>(to_u64(k, item)));
    st.missing_set = true;
  };

  s["model.hidden"] = [](auto& c, auto& k, auto& v) {
    c.hidden.clear();
    for (const auto& item : split_list(v)) c.hidden.push_back(to_u64(k, item));
  };
  s["model.activation"] = [](auto& c, auto& k, auto& v) { c.activation = keyed(k, [&] { return parse_activation(v); }); };

  s["federation.rounds"] = [](auto& c, auto& k, auto& v) { c.federation.rounds = static_cast<int>(to_u64(k, v)); };
  s["federation.local_epochs"] = [](auto& c, auto& k, auto& v) { c.federation.local.epochs = static_cast<int>(to_u64(k, v)); };
  s["federation.strategy"] = [](auto& c, auto& k, auto& v) { c.federation.local.strategy = keyed(k, [&] { return parse_strategy(v); }); };
  s["federation.aggregation"] = [](auto& c, auto& k, auto& v) { c.federation.aggregation = keyed(k, [&] { return parse_aggregation(v); }); };
  s["federation.workflow"] = [](auto& c, auto& k, auto& v) { c.federation.workflow = keyed(k, [&] { return parse_workflow(v); }); };
  s["federation.selection_metric"] = [](auto& c, auto& k, auto& v) {
    c.federation.local.selection = keyed(k, [&] { return parse_selection_metric(v); });
  };
  s["federation.consider_incoming"] = [](auto& c, auto& k, auto& v) { c.federation.local.consider_incoming = to_bool(k, v); };
  s["federation.learning_rate"] = [](auto& c, auto& k, auto& v) { c.federation.local.optimizer.learning_rate = to_real(k, v); };
  s["federation.momentum"] = [](auto& c, auto& k, auto& v) { c.federation.local.optimizer.momentum = to_real(k, v); };
  s["federation.batch_size"] = [](auto& c, auto& k, auto& v) { c.federation.local.optimizer.batch_size = to_u64(k, v); };
  s["federation.seed"] = [](auto& c, auto& k, auto& v) { c.federation.master_seed = to_u64(k, v); };
  s["federation.parallel"] = [](auto& c, auto& k, auto& v) { c.federation.parallel = to_bool(k, v); };

  s["halting.metric"] = [](auto& c, auto& k, auto& v) { c.federation.halting->metric = keyed(k, [&] { return parse_halting_metric(v); }); };
  s["halting.threshold"] = [](auto& c, auto& k, auto& v) { c.federation.halting->threshold = to_real(k, v); };
  s["halting.max_rounds"] = [&st](auto& c, auto& k, auto& v) {
    c.federation.halting->max_rounds = static_cast<int>(to_u64(k, v));
    st.max_rounds_set = true;
  };

  s["baseline.max_epochs"] = [](auto& c, auto& k, auto& v) { c.baseline.max_epochs = static_cast<int>(to_u64(k, v)); };
  s["baseline.patience"] = [](auto& c, auto& k, auto& v) { c.baseline.patience = static_cast<int>(to_u64(k, v)); };
  s["baseline.learning_rate"] = [](auto& c, auto& k, auto& v) { c.baseline.optimizer.learning_rate = to_real(k, v); };
  s["baseline.momentum"] = [](auto& c, auto& k, auto& v) { c.baseline.optimizer.momentum = to_real(k, v); };
  s["baseline.batch_size"] = [](auto& c, auto& k, auto& v) { c.baseline.optimizer.batch_size = to_u64(k, v); };
  s["baseline.monitor"] = [](auto& c, auto& k, auto& v) { c.baseline.monitor = keyed(k, [&] { return parse_selection_metric(v); }); };

  s["run.mode"] = [](auto& c, auto& k, auto& v) {
    if (v == "federated") c.run_mode = RunMode::federated;
    else if (v == "centralized") c.run_mode = RunMode::centralized;
    else if (v == "both") c.run_mode = RunMode::both;
    else throw ConfigError("invalid value for key '" + k + "': expected federated|centralized|both");
  };
  s["data.path"] = [](auto& c, auto&, auto& v) {
    if (v.empty()) c.data_path.reset();
    else c.data_path = v;
  };
  s["output.dir"] = [](auto& c, auto&, auto& v) { c.out_dir = v; };
  s["output.run_id"] = [](auto& c, auto&, auto& v) { c.run_id = v; };
  s["compare.seeds"] = [](auto& c, auto& k, auto& v) {
    c.compare_seeds.clear();
    for (const auto& item : split_list(v)) c.compare_seeds.push_back(to_u64(k, item));
  };
  return s;
}

std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::federated: return "federated";
    case RunMode::centralized: return "centralized";
    case RunMode::both: return "both";
  }
  return "?";
}

}  // namespace

ConfigMap ConfigMap::parse(std::string_view text, std::string_view source) {
  ConfigMap m;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("{}:{}: expected 'key = value', got '{}'", source, line_no, line));
    }
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", source, line_no));
    m.set(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return m;
}

ConfigMap ConfigMap::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

std::vector<std::string> preset_names() {
  return {"epochs15_rounds5", "epochs10_rounds10", "noisy_peak", "hard_shift"};
}

ConfigMap preset(std::string_view name) {
  ConfigMap m;
  // Every preset starts from the 15 local epochs x 5 rounds schedule.
  m.set("federation.rounds", "5");
  m.set("federation.local_epochs", "15");
  if (name == "epochs15_rounds5") return m;
  if (name == "epochs10_rounds10") {
    m.set("federation.rounds", "10");
    m.set("federation.local_epochs", "10");
    return m;
  }
  if (name == "noisy_peak") {
    // Small noisy training sets and a large step size: local validation
    // scores peak early and then fall as the clients overfit.
    m.set("corpus.noise_scale", "3.0");
    m.set("corpus.feature_dim", "64");
    m.set("corpus.per_class_train", "10");
    m.set("corpus.per_class_val", "100");
    m.set("model.hidden", "64");
    m.set("federation.learning_rate", "0.1");
    return m;
  }
  if (name == "hard_shift") {
    m.set("corpus.shift_magnitude", "6.0");
    return m;
  }
  throw ConfigError("invalid value for key 'preset': unknown preset '" + std::string(name) + "'");
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = [] {
    ResolveState st;
    std::vector<std::string> k;
    for (const auto& [name, _] : make_setters(st)) k.push_back(name);
    return k;
  }();
  return keys;
}

void ExperimentConfig::validate() const {
  corpus.validate();
  partition.validate(corpus.class_count);
  if (federation.client_count != partition.client_count) {
    throw ConfigError("federation client count differs from partition.client_count");
  }
  federation.validate();
  baseline.validate();
  model_spec().validate();
}

ModelSpec ExperimentConfig::model_spec() const {
  ModelSpec spec;
  spec.layer_sizes.push_back(corpus.feature_dim);
  for (std::size_t h : hidden) spec.layer_sizes.push_back(h);
  spec.layer_sizes.push_back(corpus.class_count);
  spec.activation = activation;
  spec.seed = derive_seed(federation.master_seed, {0x40DE1ULL});
  return spec;
}

void ExperimentConfig::set_seed(std::uint64_t seed) {
  corpus.seed = seed;
  federation.master_seed = seed;
  baseline.seed = seed;
}

ExperimentConfig resolve_config(const ConfigMap& keys) {
  ExperimentConfig cfg;
  cfg.federation.halting = HaltingCriterion{};
  ResolveState st;
  const auto setters = make_setters(st);

  std::string preset_name = cfg.preset;
  if (auto it = keys.entries().find("preset"); it != keys.entries().end()) preset_name = it->second;
  auto apply = [&](const ConfigMap& m) {
    for (const auto& [k, v] : m.entries()) {
      auto it = setters.find(k);
      if (it == setters.end()) throw ConfigError("unknown config key '" + k + "'");
      it->second(cfg, k, v);
    }
  };
  apply(preset(preset_name));
  // `seed` first so that explicit corpus.seed / federation.seed win.
  if (auto it = keys.entries().find("seed"); it != keys.entries().end()) setters.at("seed")(cfg, "seed", it->second);
  ConfigMap rest;
  for (const auto& [k, v] : keys.entries()) {
    if (k != "seed") rest.set(k, v);
  }
  apply(rest);
  cfg.baseline.seed = cfg.federation.master_seed;

  if (!st.missing_set) {
    cfg.partition.missing_class =
        PartitionSpec::label_skew(cfg.partition.client_count, cfg.corpus.class_count).missing_class;
  }
  if (!st.max_rounds_set) cfg.federation.halting->max_rounds = cfg.federation.rounds;
  cfg.federation.client_count = cfg.partition.client_count;
  cfg.validate();
  return cfg;
}

std::string canonical_config(const ExperimentConfig& c) {
  std::map<std::string, std::string> kv;
  const auto& f = c.federation;
  kv["preset"] = c.preset;
  kv["corpus.class_count"] = std::to_string(c.corpus.class_count);
  kv["corpus.feature_dim"] = std::to_string(c.corpus.feature_dim);
  kv["corpus.per_class_train"] = std::to_string(c.corpus.per_class_train);
  kv["corpus.per_class_val"] = std::to_string(c.corpus.per_class_val);
  kv["corpus.per_class_test"] = std::to_string(c.corpus.per_class_test);
  kv["corpus.per_class_external"] = std::to_string(c.corpus.per_class_external);
  kv["corpus.class_separation"] = format_exact(c.corpus.class_separation);
  kv["corpus.noise_scale"] = format_exact(c.corpus.noise_scale);
  kv["corpus.shift_magnitude"] = format_exact(c.corpus.shift_magnitude);
  kv["corpus.seed"] = std::to_string(c.corpus.seed);
  kv["partition.client_count"] = std::to_string(c.partition.client_count);
  kv["partition.missing_classes"] = fmt::format("{}", fmt::join(c.partition.missing_class, ","));
  kv["model.hidden"] = fmt::format("{}", fmt::join(c.hidden, ","));
  kv["model.activation"] = std::string(to_string(c.activation));
  kv["federation.rounds"] = std::to_string(f.rounds);
  kv["federation.local_epochs"] = std::to_string(f.local.epochs);
  kv["federation.strategy"] = std::string(to_string(f.local.strategy));
  kv["federation.aggregation"] = std::string(to_string(f.aggregation));
  kv["federation.workflow"] = std::string(to_string(f.workflow));
  kv["federation.selection_metric"] = std::string(to_string(f.local.selection));
  kv["federation.consider_incoming"] = f.local.consider_incoming ? "true" : "false";
  kv["federation.learning_rate"] = format_exact(f.local.optimizer.learning_rate);
  kv["federation.momentum"] = format_exact(f.local.optimizer.momentum);
  kv["federation.batch_size"] = std::to_string(f.local.optimizer.batch_size);
  kv["federation.seed"] = std::to_string(f.master_seed);
  kv["federation.parallel"] = f.parallel ? "true" : "false";
  kv["halting.metric"] = std::string(to_string(f.halting->metric));
  kv["halting.threshold"] = format_exact(f.halting->threshold);
  kv["halting.max_rounds"] = std::to_string(f.halting->max_rounds);
  kv["baseline.max_epochs"] = std::to_string(c.baseline.max_epochs);
  kv["baseline.patience"] = std::to_string(c.baseline.patience);
  kv["baseline.learning_rate"] = format_exact(c.baseline.optimizer.learning_rate);
  kv["baseline.momentum"] = format_exact(c.baseline.optimizer.momentum);
  kv["baseline.batch_size"] = std::to_string(c.baseline.optimizer.batch_size);
  kv["baseline.monitor"] = std::string(to_string(c.baseline.monitor));
  kv["run.mode"] = to_string(c.run_mode);
  kv["data.path"] = c.data_path ? c.data_path->string() : "";
  kv["compare.seeds"] = fmt::format("{}", fmt::join(c.compare_seeds, ","));
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("EVP_MD_CTX_new failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("SHA-1 digest failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

RunManifest RunManifest::create(const ExperimentConfig& cfg) {
  RunManifest m;
  m.config_snapshot = canonical_config(cfg);
  m.config_hash = git_blob_hash(m.config_snapshot);
  m.run_id = cfg.run_id.empty()
                 ? fmt::format("{}-{}-{}", to_string(cfg.federation.local.strategy),
                               to_string(cfg.federation.workflow), m.config_hash.substr(0, 8))
                 : cfg.run_id;
  m.output_dir = cfg.out_dir;
  return m;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["run_id"] = run_id;
  j["config_hash"] = config_hash;
  j["output_dir"] = output_dir.string();
  j["config"] = config_snapshot;
  return j.dump(2) + "\n";
}

std::string format_weights(const ParameterVector& params) {
  std::string out = "fedsel-weights 1\n";
  out += fmt::format("layers {}\n", params.manifest().size());
  for (const auto& s : params.manifest()) out += fmt::format("{} {}\n", s.rows, s.cols);
  out += fmt::format("values {}\n", params.size());
  for (double v : params.values()) {
    out += format_exact(v);
    out += '\n';
  }
  return out;
}

ParameterVector parse_weights(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "fedsel-weights" || version != 1) {
    throw DataError("weights file: bad header");
  }
  std::size_t layers = 0;
  if (!(in >> tag >> layers) || tag != "layers") throw DataError("weights file: missing layer count");
  Manifest m(layers);
  for (auto& s : m) {
    if (!(in >> s.rows >> s.cols)) throw DataError("weights file: truncated manifest");
  }
  std::size_t n = 0;
  if (!(in >> tag >> n) || tag != "values") throw DataError("weights file: missing value count");
  std::vector<double> values;
  values.reserve(n);
  std::string tok;
  while (in >> tok) values.push_back(parse_double(tok));
  if (values.size() != n) {
    throw DataError(fmt::format("weights file: expected {} values, found {}", n, values.size()));
  }
  try {
    return ParameterVector(std::move(m), std::move(values));
  } catch (const ShapeError& e) {
    throw DataError(std::string("weights file: ") + e.what());
  }
}

Dataset build_dataset(const ExperimentConfig& cfg) {
  if (cfg.data_path) {
    auto loaded = read_dataset_csv(*cfg.data_path);
    if (loaded.clients.size() != cfg.partition.client_count) {
      throw DataError(fmt::format("{} holds {} clients, config expects {}", cfg.data_path->string(),
                                  loaded.clients.size(), cfg.partition.client_count));
    }
    return {std::move(loaded.clients), std::move(loaded.evals)};
  }
  auto pools = generate_corpus(cfg.corpus, cfg.partition.client_count);
  auto parts = partition(pools, cfg.partition, cfg.corpus);
  return {std::move(parts.clients), std::move(parts.evals)};
}

GenerateOutcome cmd_generate(const ExperimentConfig& cfg) {
  cfg.validate();
  auto pools = generate_corpus(cfg.corpus, cfg.partition.client_count);
  auto parts = partition(pools, cfg.partition, cfg.corpus);
  GenerateOutcome out;
  out.csv_path = cfg.out_dir / "dataset.csv";
  out.summary_path = cfg.out_dir / "partition_summary.txt";
  write_dataset_csv(out.csv_path, parts.clients, parts.evals);
  out.summary = render_partition_summary(parts.clients, parts.evals, cfg.corpus.class_count);
  write_file_atomic(out.summary_path, out.summary);
  return out;
}

namespace {

std::string final_report_json(const FinalReport& r) {
  auto metrics = [](const MetricsReport& m) {
    return fmt::format("{{\"accuracy\":{:.6f},\"precision\":{:.6f},\"recall\":{:.6f},\"f1\":{:.6f}}}",
                       m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1);
  };
  auto conf = [](const ConfidenceSummary& c) {
    return fmt::format("{{\"mean_confidence_correct\":{:.6f},\"mean_confidence_all\":{:.6f},\"correct\":{},\"total\":{}}}",
                       c.mean_confidence_correct, c.mean_confidence_all, c.correct, c.total);
  };
  std::vector<std::string> clients;
  for (const auto& m : r.per_client) clients.push_back(metrics(m));
  return fmt::format(
      "{{\"global\":{},\"external\":{},\"clients\":[{}],\"global_confidence\":{},\"external_confidence\":{}}}\n",
      metrics(r.global), metrics(r.external), fmt::join(clients, ","), conf(r.global_confidence),
      conf(r.external_confidence));
}

std::string centralized_log_text(const CentralizedResult& c) {
  std::string out;
  for (std::size_t e = 0; e < c.val_log.size(); ++e) {
    const auto& m = c.val_log[e];
    out += fmt::format("epoch={} val_acc={:.6f} val_f1={:.6f} val_loss={:.6f}{}\n", e + 1, m.accuracy,
                       m.macro_f1, m.mean_loss, static_cast<int>(e + 1) == c.best_epoch ? " best" : "");
  }
  out += fmt::format("best_epoch={} epochs_run={}\n", c.best_epoch, c.epochs_run);
  return out;
}

}  // namespace

RunOutcome cmd_run(const ExperimentConfig& cfg) {
  cfg.validate();
  RunOutcome out;
  out.manifest = RunManifest::create(cfg);
  const auto& id = out.manifest.run_id;
  const auto dir = cfg.out_dir;
  const Dataset data = build_dataset(cfg);
  const ModelSpec spec = cfg.model_spec();

  auto manifest_path = dir / (id + ".manifest.json");
  write_file_atomic(manifest_path, out.manifest.to_json());
  out.files.push_back(manifest_path);

  if (cfg.run_mode != RunMode::centralized) {
    MetricsLog log(dir, id, cfg.federation.workflow, cfg.federation.local.strategy);
    FederationHooks hooks;
    hooks.on_round = [&log](const RoundRecord& r) { log.append(r); };
    out.federation = run_federation(cfg.federation, spec, data.clients, data.evals, std::move(hooks));
    out.federation_report = evaluate_final(out.federation->final_params, spec, data.evals, data.clients);
    auto weights_path = dir / (id + ".weights.txt");
    write_file_atomic(weights_path, format_weights(out.federation->final_params));
    auto report_path = dir / (id + ".final.json");
    write_file_atomic(report_path, final_report_json(*out.federation_report));
    out.files.insert(out.files.end(), {log.jsonl_path(), log.text_path(), weights_path, report_path});
  }
  if (cfg.run_mode != RunMode::federated) {
    auto merged = merge_for_centralized(data.clients);
    out.centralized = run_centralized(cfg.baseline, merged.train, merged.val, spec);
    out.centralized_report = evaluate_final(out.centralized->params, spec, data.evals, data.clients);
    auto weights_path = dir / (id + ".centralized.weights.txt");
    write_file_atomic(weights_path, format_weights(out.centralized->params));
    auto log_path = dir / (id + ".centralized.log.txt");
    write_file_atomic(log_path, centralized_log_text(*out.centralized));
    auto report_path = dir / (id + ".centralized.final.json");
    write_file_atomic(report_path, final_report_json(*out.centralized_report));
    out.files.insert(out.files.end(), {weights_path, log_path, report_path});
  }
  return out;
}

const TableRow& ComparisonTable::row(std::string_view key) const {
  for (const auto& r : rows) {
    if (r.key == key) return r;
  }
  throw ConfigError("comparison table has no row '" + std::string(key) + "'");
}

std::string ComparisonTable::to_csv() const {
  const bool with_sd = std::any_of(rows.begin(), rows.end(), [](const TableRow& r) { return !r.sd.empty(); });
  std::string out = "model,status";
  for (const auto& c : columns) out += with_sd ? "," + c + "_mean," + c + "_sd" : "," + c;
  out += "\n";
  for (const auto& r : rows) {
    out += r.key + (r.failed ? ",failed" : ",ok");
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (r.failed) {
        out += with_sd ? ",," : ",";
        continue;
      }
      out += fmt::format(",{:.6f}", r.mean[i]);
      if (with_sd) out += fmt::format(",{:.6f}", r.sd.empty() ? 0.0 : r.sd[i]);
    }
    out += "\n";
  }
  return out;
}

std::string ComparisonTable::to_text() const {
  const bool with_sd = std::any_of(rows.begin(), rows.end(), [](const TableRow& r) { return !r.sd.empty(); });
  const int width = with_sd ? 20 : 12;
  std::string out = title + "\n" + fmt::format("{:<14}", "model");
  for (const auto& c : columns) out += fmt::format("{:>{}}", c, width);
  out += "\n";
  for (const auto& r : rows) {
    out += fmt::format("{:<14}", r.key);
    for (std::size_t i = 0; i < columns.size(); ++i) {
      std::string cell = r.failed ? "failed"
                         : with_sd ? fmt::format("{:.4f} ± {:.4f}", r.mean[i], r.sd.empty() ? 0.0 : r.sd[i])
                                   : fmt::format("{:.4f}", r.mean[i]);
      // "±" is two bytes but one column.
      out += fmt::format("{:>{}}", cell, width + (with_sd && !r.failed ? 1 : 0));
    }
    out += "\n";
  }
  return out;
}

ComparisonTable ComparisonTable::from_csv(std::string_view text) {
  ComparisonTable t;
  t.columns.clear();
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw DataError("comparison CSV: empty");
  auto header = split_list(line);
  if (header.size() < 2 || header[0] != "model" || header[1] != "status") {
    throw DataError("comparison CSV: bad header");
  }
  const bool with_sd = header.size() > 2 && header[2].ends_with("_mean");
  for (std::size_t i = 2; i < header.size(); i += with_sd ? 2 : 1) {
    std::string c = header[i];
    if (with_sd) c = c.substr(0, c.size() - 5);
    t.columns.push_back(c);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string_view rest(line);
    while (true) {
      auto pos = rest.find(',');
      f.emplace_back(rest.substr(0, pos));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    if (f.size() != header.size()) throw DataError("comparison CSV: ragged row");
    TableRow r;
    r.key = f[0];
    r.failed = f[1] == "failed";
    if (!r.failed) {
      for (std::size_t i = 2; i < f.size(); i += with_sd ? 2 : 1) {
        r.mean.push_back(parse_double(f[i]));
        if (with_sd) r.sd.push_back(parse_double(f[i + 1]));
      }
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

const VariantResult& SeedComparison::variant(std::string_view key) const {
  for (const auto& v : variants) {
    if (v.key == key) return v;
  }
  throw ConfigError("no variant '" + std::string(key) + "'");
}

namespace {

std::vector<double> table_cells(const FinalReport& r, bool external) {
  const auto& m = external ? r.external : r.global;
  const auto& c = external ? r.external_confidence : r.global_confidence;
  return {m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1, c.mean_confidence_correct};
}

}  // namespace

ComparisonTable SeedComparison::table(bool external) const {
  ComparisonTable t;
  t.title = fmt::format("seed {} - {} test set", seed, external ? "external" : "global");
  for (const auto& v : variants) {
    TableRow r{v.key, v.failed, {}, {}};
    if (!v.failed) r.mean = table_cells(v.report, external);
    t.rows.push_back(std::move(r));
  }
  return t;
}

SeedComparison compare_seed(const ExperimentConfig& base, std::uint64_t seed) {
  ExperimentConfig cfg = base;
  cfg.set_seed(seed);
  cfg.validate();
  const Dataset data = build_dataset(cfg);
  const ModelSpec spec = cfg.model_spec();

  SeedComparison out;
  out.seed = seed;
  auto attempt = [&](std::string key, auto&& produce) {
    VariantResult v;
    v.key = std::move(key);
    try {
      v.report = evaluate_final(produce(), spec, data.evals, data.clients);
    } catch (const std::exception& e) {
      v.failed = true;
      v.error = e.what();
    }
    out.variants.push_back(std::move(v));
  };

  for (std::size_t k = 0; k < data.clients.size(); ++k) {
    attempt(fmt::format("client{}", k + 1), [&] {
      const auto& cd = data.clients[k];
      return run_centralized(cfg.baseline, cd.train, cd.val, spec).params;
    });
  }
  for (StrategyKind s : {StrategyKind::fews, StrategyKind::oews}) {
    attempt(fmt::format("fl_{}", to_string(s)), [&] {
      FederationConfig fc = cfg.federation;
      fc.local.strategy = s;
      return run_federation(fc, spec, data.clients, data.evals).final_params;
    });
  }
  attempt("centralized", [&] {
    auto merged = merge_for_centralized(data.clients);
    return run_centralized(cfg.baseline, merged.train, merged.val, spec).params;
  });
  return out;
}

ComparisonTable summarize(const std::vector<SeedComparison>& seeds, bool external) {
  ComparisonTable t;
  t.title = fmt::format("mean ± sd over {} seeds - {} test set", seeds.size(), external ? "external" : "global");
  if (seeds.empty()) return t;
  for (const auto& proto : seeds.front().variants) {
    std::vector<std::vector<double>> samples;
    bool failed = false;
    for (const auto& s : seeds) {
      const auto& v = s.variant(proto.key);
      if (v.failed) {
        failed = true;
        continue;
      }
      samples.push_back(table_cells(v.report, external));
    }
    TableRow r{proto.key, failed || samples.empty(), {}, {}};
    if (!r.failed) {
      const std::size_t cols = samples.front().size();
      const auto n = static_cast<double>(samples.size());
      for (std::size_t c = 0; c < cols; ++c) {
        double mean = 0.0;
        for (const auto& s : samples) mean += s[c];
        mean /= n;
        double ss = 0.0;
        for (const auto& s : samples) ss += (s[c] - mean) * (s[c] - mean);
        r.mean.push_back(mean);
        r.sd.push_back(samples.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0);
      }
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

CompareOutcome cmd_compare(const ExperimentConfig& cfg, std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw ConfigError("compare needs at least one seed");
  cfg.validate();
  CompareOutcome out;
  auto emit = [&](const std::string& stem, const ComparisonTable& t) {
    auto csv = cfg.out_dir / (stem + ".csv");
    auto txt = cfg.out_dir / (stem + ".txt");
    write_file_atomic(csv, t.to_csv());
    write_file_atomic(txt, t.to_text());
    out.files.push_back(csv);
    out.files.push_back(txt);
  };
  for (std::uint64_t seed : seeds) {
    out.seeds.push_back(compare_seed(cfg, seed));
    const auto& sc = out.seeds.back();
    for (const auto& v : sc.variants) {
      if (v.failed) out.failures.push_back(fmt::format("seed {} {}: {}", seed, v.key, v.error));
    }
    emit(fmt::format("compare_seed{}_global", seed), sc.table(false));
    emit(fmt::format("compare_seed{}_external", seed), sc.table(true));
  }
  out.global_summary = summarize(out.seeds, false);
  out.external_summary = summarize(out.seeds, true);
  emit("compare_summary_global", out.global_summary);
  emit("compare_summary_external", out.external_summary);
  return out;
}

std::string cmd_report(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(cfg.out_dir)) throw IoError("no output directory " + cfg.out_dir.string());
  std::vector<fs::path> logs, tables;
  for (const auto& e : fs::directory_iterator(cfg.out_dir)) {
    const auto name = e.path().filename().string();
    if (name.ends_with(".metrics.jsonl")) logs.push_back(e.path());
    if (name.starts_with("compare_summary_") && name.ends_with(".csv")) tables.push_back(e.path());
  }
  std::sort(logs.begin(), logs.end());
  std::sort(tables.begin(), tables.end());
  std::string out;
  for (const auto& p : logs) {
    out += p.filename().string() + "\n";
    out += fmt::format("{:>6}{:>8}{:>12}{:>12}{:>12}{:>12}  {}\n", "round", "halted", "test_acc",
                       "precision", "recall", "f1", "selected_epochs");
    std::istringstream in(read_file(p));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      const auto& m = j["global"].is_null() ? j["aggregated"] : j["global"];
      std::vector<int> epochs = j["selected_epochs"].get<std::vector<int>>();
      out += fmt::format("{:>6}{:>8}{:>12.6f}{:>12.6f}{:>12.6f}{:>12.6f}  {}\n", j["round"].get<int>(),
                         j["halted"].get<bool>() ? "yes" : "no", m["accuracy"].get<double>(),
                         m["precision"].get<double>(), m["recall"].get<double>(), m["f1"].get<double>(),
                         fmt::join(epochs, ","));
    }
    out += "\n";
  }
  for (const auto& p : tables) {
    auto t = ComparisonTable::from_csv(read_file(p));
    t.title = p.filename().string();
    out += t.to_text() + "\n";
  }
  if (out.empty()) out = "nothing to report in " + cfg.out_dir.string() + "\n";
  return out;
}

}  // namespace fedsel
