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
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedsel/split.hpp"

namespace fedsel {

// Parameters of the synthetic Gaussian-cluster corpus.
struct CorpusSpec {
  std::size_t class_count = 5;
  std::size_t feature_dim = 16;
  std::size_t per_class_train = 80;
  std::size_t per_class_val = 20;
  std::size_t per_class_test = 20;
  std::size_t per_class_external = 20;
  double class_separation = 6.0;
  double noise_scale = 1.0;
  double shift_magnitude = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Client k never sees class missing_class[k] in its train or val splits.
struct PartitionSpec {
  std::size_t client_count = 4;
  std::vector<int> missing_class;

  // The default label-skew layout: for 4 clients over 5 classes the missing
  // classes are {1, 4, 3, 2}; otherwise client k misses class (k + 1) mod C.
  static PartitionSpec label_skew(std::size_t client_count, std::size_t class_count);

  void validate(std::size_t class_count) const;
};

struct ClientDataset {
  Split train;
  Split val;
  Split test;

  bool operator==(const ClientDataset&) const = default;
};

struct EvalSets {
  Split global_test;
  Split external_test;

  bool operator==(const EvalSets&) const = default;
};

// Per-class sample pools, indexed [class]. Each in-domain pool holds
// per_class_* x client_count samples; partition slices client k's share out
// of positions [k * n, (k + 1) * n).
struct ClassPools {
  std::size_t client_count = 0;
  std::vector<Split> train;
  std::vector<Split> val;
  std::vector<Split> test;
  std::vector<Split> external;
};

// Mean of class c: class_separation * u_c, where u_c is the c-th standard
// basis vector when C <= D and a fixed pseudo-random unit vector otherwise.
std::vector<double> class_mean(const CorpusSpec& spec, std::size_t c);

// Unit direction of the external-set mean displacement. Orthogonal to every
// class mean whenever D > C.
std::vector<double> shift_direction(const CorpusSpec& spec);

ClassPools generate_corpus(const CorpusSpec& spec, std::size_t client_count);

struct PartitionResult {
  std::vector<ClientDataset> clients;
  EvalSets evals;
};

PartitionResult partition(const ClassPools& pools, const PartitionSpec& pspec,
                          const CorpusSpec& cspec);

struct MergedData {
  Split train;
  Split val;
};

MergedData merge_for_centralized(const std::vector<ClientDataset>& clients);

// Per-client, per-split, per-class counts: counts[client][split][class] with
// split order train, val, test.
using ClassCounts = std::vector<std::vector<std::vector<std::size_t>>>;
ClassCounts count_classes(const std::vector<ClientDataset>& clients, std::size_t class_count);

std::string render_partition_summary(const std::vector<ClientDataset>& clients,
                                     const EvalSets& evals, std::size_t class_count);

// CSV dump: header `split,client,class,f0..f{D-1}`; split is one of
// train|val|test|external; external rows carry client -1. Values are written
// with 17 significant digits.
void write_dataset_csv(const std::filesystem::path& path,
                       const std::vector<ClientDataset>& clients, const EvalSets& evals);

struct LoadedDataset {
  std::vector<ClientDataset> clients;
  EvalSets evals;
};

// Inverse of write_dataset_csv. global_test is rebuilt as the concatenation
// of client test splits; sample ids are assigned in file order.
LoadedDataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace fedsel
