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
#include <initializer_list>
#include <random>

namespace fedsel {

// SplitMix64 finalizer. Used to turn (seed, key...) tuples into independent
// engine seeds.
std::uint64_t splitmix64(std::uint64_t x);

// Derives a child seed from a parent seed and an ordered list of keys.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> keys);

// Deterministic random stream. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the real-valued conversions below are
// implemented here instead of using <random> distributions, whose algorithms
// are implementation-defined. This keeps every draw bit-reproducible across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the second variate is cached.
  double normal();

  // Uniform integer on [0, n). Rejection sampling, no modulo bias.
  std::size_t index(std::size_t n);

  // Independent child stream keyed by the given path.
  static Rng child(std::uint64_t parent, std::initializer_list<std::uint64_t> keys) {
    return Rng(derive_seed(parent, keys));
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fedsel
