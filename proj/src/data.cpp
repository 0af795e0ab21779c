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

#include "fedsel/data.hpp"

#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "fedsel/error.hpp"
#include "fedsel/io.hpp"
#include "fedsel/rng.hpp"

namespace fedsel {

namespace {

constexpr std::uint64_t kDirectionSeed = 0x5EEDD1AEC7105ULL;

std::vector<double> random_unit(std::size_t dim, std::uint64_t key) {
  Rng rng(derive_seed(kDirectionSeed, {key}));
  std::vector<double> v(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

Split draw(const std::vector<double>& mean, double noise, std::size_t count, int label,
           Rng& rng, std::uint64_t& next_id) {
  Split s;
  std::vector<double> x(mean.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t d = 0; d < mean.size(); ++d) x[d] = mean[d] + noise * rng.normal();
    s.append(x, label, next_id++);
  }
  return s;
}

void take(Split& dst, const Split& pool, std::size_t start, std::size_t count) {
  if (start + count > pool.size()) {
    throw ConfigError("sample pool too small: need " + std::to_string(start + count) +
                      " samples, pool holds " + std::to_string(pool.size()));
  }
  for (std::size_t i = start; i < start + count; ++i) {
    dst.append(pool.features.row(i), pool.labels[i], pool.ids[i]);
  }
}

}  // namespace

void CorpusSpec::validate() const {
  if (class_count < 2) throw ConfigError("corpus.class_count must be at least 2");
  if (feature_dim < 1) throw ConfigError("corpus.feature_dim must be positive");
  if (per_class_train < 1 || per_class_val < 1 || per_class_test < 1 || per_class_external < 1) {
    throw ConfigError("corpus per-class counts must be positive");
  }
  if (!(class_separation > 0.0)) throw ConfigError("corpus.class_separation must be positive");
  if (!(noise_scale > 0.0)) throw ConfigError("corpus.noise_scale must be positive");
  if (!(shift_magnitude >= 0.0)) throw ConfigError("corpus.shift_magnitude must be nonnegative");
}

PartitionSpec PartitionSpec::label_skew(std::size_t client_count, std::size_t class_count) {
  PartitionSpec p;
  p.client_count = client_count;
  if (client_count == 4 && class_count == 5) {
    p.missing_class = {1, 4, 3, 2};
  } else {
    for (std::size_t k = 0; k < client_count; ++k) {
      p.missing_class.push_back(static_cast<int>((k + 1) % class_count));
    }
  }
  return p;
}

void PartitionSpec::validate(std::size_t class_count) const {
  if (client_count < 1) throw ConfigError("partition.client_count must be positive");
  if (missing_class.size() != client_count) {
    throw ConfigError("partition.missing_classes must list one class per client");
  }
  for (int c : missing_class) {
    if (c < 0 || static_cast<std::size_t>(c) >= class_count) {
      throw ConfigError("partition missing class " + std::to_string(c) + " out of range");
    }
  }
}

std::vector<double> class_mean(const CorpusSpec& spec, std::size_t c) {
  std::vector<double> mean;
  if (spec.class_count <= spec.feature_dim) {
    mean.assign(spec.feature_dim, 0.0);
    mean[c] = 1.0;
  } else {
    mean = random_unit(spec.feature_dim, c);
  }
  for (double& m : mean) m *= spec.class_separation;
  return mean;
}

std::vector<double> shift_direction(const CorpusSpec& spec) {
  auto d = random_unit(spec.feature_dim, 0xE47E4A1ULL);
  if (spec.feature_dim > spec.class_count) {
    for (std::size_t c = 0; c < spec.class_count; ++c) d[c] = 0.0;
    double norm = 0.0;
    for (double x : d) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : d) x /= norm;
  }
  return d;
}

ClassPools generate_corpus(const CorpusSpec& spec, std::size_t client_count) {
  spec.validate();
  if (client_count < 1) throw ConfigError("client_count must be positive");
  ClassPools pools;
  pools.client_count = client_count;
  Rng rng(derive_seed(spec.seed, {0xC0E905ULL}));
  const auto shift = shift_direction(spec);
  std::uint64_t next_id = 0;
  for (std::size_t c = 0; c < spec.class_count; ++c) {
    const auto label = static_cast<int>(c);
    const auto mean = class_mean(spec, c);
    pools.train.push_back(draw(mean, spec.noise_scale, spec.per_class_train * client_count, label, rng, next_id));
    pools.val.push_back(draw(mean, spec.noise_scale, spec.per_class_val * client_count, label, rng, next_id));
    pools.test.push_back(draw(mean, spec.noise_scale, spec.per_class_test * client_count, label, rng, next_id));
    auto shifted = mean;
    for (std::size_t d = 0; d < shifted.size(); ++d) shifted[d] += spec.shift_magnitude * shift[d];
    pools.external.push_back(draw(shifted, spec.noise_scale, spec.per_class_external, label, rng, next_id));
  }
  return pools;
}

PartitionResult partition(const ClassPools& pools, const PartitionSpec& pspec,
                          const CorpusSpec& cspec) {
  cspec.validate();
  pspec.validate(cspec.class_count);
  if (pools.train.size() != cspec.class_count || pools.external.size() != cspec.class_count) {
    throw ConfigError("sample pools do not cover every class");
  }
  PartitionResult out;
  for (std::size_t k = 0; k < pspec.client_count; ++k) {
    ClientDataset cd;
    for (std::size_t c = 0; c < cspec.class_count; ++c) {
      if (static_cast<int>(c) != pspec.missing_class[k]) {
        take(cd.train, pools.train[c], k * cspec.per_class_train, cspec.per_class_train);
        take(cd.val, pools.val[c], k * cspec.per_class_val, cspec.per_class_val);
      }
      take(cd.test, pools.test[c], k * cspec.per_class_test, cspec.per_class_test);
    }
    out.evals.global_test.extend(cd.test);
    out.clients.push_back(std::move(cd));
  }
  for (std::size_t c = 0; c < cspec.class_count; ++c) {
    take(out.evals.external_test, pools.external[c], 0, cspec.per_class_external);
  }
  return out;
}

MergedData merge_for_centralized(const std::vector<ClientDataset>& clients) {
  if (clients.empty()) throw ConfigError("merge_for_centralized: no clients");
  MergedData m;
  for (const auto& c : clients) m.train.extend(c.train);
  for (const auto& c : clients) m.val.extend(c.val);
  return m;
}

ClassCounts count_classes(const std::vector<ClientDataset>& clients, std::size_t class_count) {
  ClassCounts counts;
  for (const auto& cd : clients) {
    std::vector<std::vector<std::size_t>> per_split;
    for (const Split* s : {&cd.train, &cd.val, &cd.test}) {
      std::vector<std::size_t> row(class_count, 0);
      for (int y : s->labels) ++row.at(static_cast<std::size_t>(y));
      per_split.push_back(std::move(row));
    }
    counts.push_back(std::move(per_split));
  }
  return counts;
}

std::string render_partition_summary(const std::vector<ClientDataset>& clients,
                                     const EvalSets& evals, std::size_t class_count) {
  std::string out = fmt::format("{:<14}{:<7}", "client", "set");
  for (std::size_t c = 0; c < class_count; ++c) out += fmt::format("{:>8}", fmt::format("class{}", c));
  out += "\n";
  static constexpr const char* kSplitNames[] = {"train", "val", "test"};
  const auto counts = count_classes(clients, class_count);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    for (std::size_t s = 0; s < 3; ++s) {
      out += fmt::format("{:<14}{:<7}", fmt::format("client{}", k + 1), kSplitNames[s]);
      for (std::size_t v : counts[k][s]) out += fmt::format("{:>8}", v);
      out += "\n";
    }
  }
  for (const auto& [name, split] : {std::pair{"global_test", &evals.global_test},
                                    std::pair{"external_test", &evals.external_test}}) {
    std::vector<std::size_t> row(class_count, 0);
    for (int y : split->labels) ++row.at(static_cast<std::size_t>(y));
    out += fmt::format("{:<14}{:<7}", name, "test");
    for (std::size_t v : row) out += fmt::format("{:>8}", v);
    out += "\n";
  }
  return out;
}

void write_dataset_csv(const std::filesystem::path& path,
                       const std::vector<ClientDataset>& clients, const EvalSets& evals) {
  std::size_t dim = evals.external_test.features.cols();
  if (dim == 0 && !clients.empty()) dim = clients.front().test.features.cols();
  std::string out = "split,client,class";
  for (std::size_t d = 0; d < dim; ++d) out += fmt::format(",f{}", d);
  out += "\n";
  auto emit = [&](const char* name, long client, const Split& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out += fmt::format("{},{},{}", name, client, s.labels[i]);
      for (double v : s.features.row(i)) {
        out += ',';
        out += format_exact(v);
      }
      out += "\n";
    }
  };
  for (std::size_t k = 0; k < clients.size(); ++k) {
    const auto id = static_cast<long>(k);
    emit("train", id, clients[k].train);
    emit("val", id, clients[k].val);
    emit("test", id, clients[k].test);
  }
  emit("external", -1, evals.external_test);
  write_file_atomic(path, out);
}

LoadedDataset read_dataset_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("split,client,class", 0) != 0) {
    throw DataError(path.string() + ": missing 'split,client,class,...' header");
  }
  std::size_t dim = 0;
  for (char ch : line) dim += ch == ',' ? 1 : 0;
  if (dim < 3) throw DataError(path.string() + ": header has no feature columns");
  dim -= 2;

  LoadedDataset ds;
  std::uint64_t next_id = 0;
  std::size_t line_no = 1;
  std::vector<double> x(dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      auto pos = rest.find(',');
      fields.push_back(rest.substr(0, pos));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    if (fields.size() != dim + 3) {
      throw DataError(fmt::format("{}:{}: expected {} fields, found {}", path.string(), line_no,
                                  dim + 3, fields.size()));
    }
    const auto client = static_cast<long>(parse_double(fields[1]));
    const auto label = static_cast<int>(parse_double(fields[2]));
    for (std::size_t d = 0; d < dim; ++d) x[d] = parse_double(fields[d + 3]);
    const std::string_view split = fields[0];
    if (split == "external") {
      ds.evals.external_test.append(x, label, next_id++);
      continue;
    }
    if (client < 0) throw DataError(fmt::format("{}:{}: negative client id", path.string(), line_no));
    if (ds.clients.size() <= static_cast<std::size_t>(client)) ds.clients.resize(static_cast<std::size_t>(client) + 1);
    auto& cd = ds.clients[static_cast<std::size_t>(client)];
    if (split == "train") {
      cd.train.append(x, label, next_id++);
    } else if (split == "val") {
      cd.val.append(x, label, next_id++);
    } else if (split == "test") {
      cd.test.append(x, label, next_id++);
    } else {
      throw DataError(fmt::format("{}:{}: unknown split '{}'", path.string(), line_no, split));
    }
  }
  for (const auto& cd : ds.clients) ds.evals.global_test.extend(cd.test);
  return ds;
}

}  // namespace fedsel
