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
#include <span>
#include <vector>

#include "fedsel/nn.hpp"
#include "fedsel/split.hpp"

namespace fedsel {

// Classification quality of one model on one split. confusion[true][pred].
// Precision, recall and F1 are macro averages over all C classes; a class
// with an empty denominator scores 0 and still counts toward C.
struct MetricsReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double mean_loss = 0.0;
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t sample_count = 0;

  std::size_t class_count() const { return confusion.size(); }
  bool operator==(const MetricsReport&) const = default;
};

// Scalar metrics derived from a confusion matrix. mean_loss is left at 0.
MetricsReport report_from_confusion(std::vector<std::vector<std::size_t>> confusion);

MetricsReport report_from_predictions(std::span<const int> predicted, std::span<const int> labels,
                                      std::size_t class_count);

// Index of the largest probability; the lowest index wins ties.
std::vector<int> argmax_rows(const Matrix& probs);

MetricsReport evaluate(const ParameterVector& params, const ModelSpec& spec, const Split& split);

}  // namespace fedsel
