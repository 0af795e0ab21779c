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

#include "fedsel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedsel/error.hpp"

namespace fedsel {

MetricsReport report_from_confusion(std::vector<std::vector<std::size_t>> confusion) {
  MetricsReport r;
  const std::size_t c_count = confusion.size();
  std::vector<std::size_t> predicted(c_count, 0);
  std::vector<std::size_t> actual(c_count, 0);
  std::size_t correct = 0;
  for (std::size_t t = 0; t < c_count; ++t) {
    if (confusion[t].size() != c_count) throw ShapeError("confusion matrix is not square");
    for (std::size_t p = 0; p < c_count; ++p) {
      actual[t] += confusion[t][p];
      predicted[p] += confusion[t][p];
      r.sample_count += confusion[t][p];
    }
    correct += confusion[t][t];
  }
  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  for (std::size_t c = 0; c < c_count; ++c) {
    const double tp = static_cast<double>(confusion[c][c]);
    const double prec = predicted[c] ? tp / static_cast<double>(predicted[c]) : 0.0;
    const double rec = actual[c] ? tp / static_cast<double>(actual[c]) : 0.0;
    const double f1 = (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    p_sum += prec;
    r_sum += rec;
    f_sum += f1;
  }
  if (c_count > 0) {
    const auto c = static_cast<double>(c_count);
    r.macro_precision = p_sum / c;
    r.macro_recall = r_sum / c;
    r.macro_f1 = f_sum / c;
  }
  if (r.sample_count > 0) {
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.sample_count);
  }
  r.confusion = std::move(confusion);
  return r;
}

MetricsReport report_from_predictions(std::span<const int> predicted, std::span<const int> labels,
                                      std::size_t class_count) {
  if (predicted.size() != labels.size()) throw ShapeError("prediction and label counts differ");
  std::vector<std::vector<std::size_t>> confusion(class_count, std::vector<std::size_t>(class_count, 0));
  const auto c_max = static_cast<int>(class_count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= c_max || predicted[i] < 0 || predicted[i] >= c_max) {
      throw DataError("class index out of range at sample " + std::to_string(i));
    }
    ++confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predicted[i])];
  }
  return report_from_confusion(std::move(confusion));
}

std::vector<int> argmax_rows(const Matrix& probs) {
  std::vector<int> out(probs.rows());
  for (std::size_t n = 0; n < probs.rows(); ++n) {
    auto r = probs.row(n);
    std::size_t best = 0;
    for (std::size_t j = 1; j < r.size(); ++j) {
      if (r[j] > r[best]) best = j;
    }
    out[n] = static_cast<int>(best);
  }
  return out;
}

MetricsReport evaluate(const ParameterVector& params, const ModelSpec& spec, const Split& split) {
  if (split.empty()) throw DataError("evaluate: empty split");
  const Matrix probs = forward(params, spec, split.features);
  auto report = report_from_predictions(argmax_rows(probs), split.labels, spec.class_count());
  double loss = 0.0;
  for (std::size_t n = 0; n < split.size(); ++n) {
    // Probabilities can underflow to zero for confidently wrong rows.
    loss -= std::log(std::max(probs(n, static_cast<std::size_t>(split.labels[n])), 1e-300));
  }
  report.mean_loss = loss / static_cast<double>(split.size());
  return report;
}

}  // namespace fedsel
