// Copyright 2026 The streamgcd Authors.
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

#include "streamgcd/evaluation.h"

#include <algorithm>
#include <limits>
#include <map>

#include "streamgcd/errors.h"

namespace streamgcd {
namespace {

// Dense index for each distinct value, in ascending value order.
std::map<int, std::size_t> IndexValues(std::span<const int> values) {
  std::map<int, std::size_t> index;
  for (int v : values) index.emplace(v, 0);
  std::size_t next = 0;
  for (auto& [value, idx] : index) idx = next++;
  return index;
}

}  // namespace

std::vector<int> MinCostAssignment(const Matrix& cost) {
  if (cost.rows() == 0 || cost.cols() == 0) {
    throw InputError("assignment on an empty matrix");
  }
  if (!cost.AllFinite()) throw DomainError("assignment cost is not finite");
  const std::size_t n = std::max(cost.rows(), cost.cols());
  auto a = [&](std::size_t i, std::size_t j) {
    return (i <= cost.rows() && j <= cost.cols()) ? cost(i - 1, j - 1) : 0.0;
  };

  // Shortest augmenting path with potentials, 1-based; column 0 is a
  // sentinel.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(cost.rows(), -1);
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t i = p[j];
    if (i >= 1 && i <= cost.rows() && j <= cost.cols()) {
      row_to_col[i - 1] = static_cast<int>(j - 1);
    }
  }
  return row_to_col;
}

AssignmentResult MatchContingency(const Matrix& contingency) {
  if (contingency.rows() == 0 || contingency.cols() == 0) {
    throw InputError("matching on an empty contingency table");
  }
  double peak = 0.0;
  double total = 0.0;
  for (double v : contingency.values()) {
    peak = std::max(peak, v);
    total += v;
  }
  Matrix cost(contingency.rows(), contingency.cols());
  for (std::size_t i = 0; i < cost.size(); ++i) {
    cost.values()[i] = peak - contingency.values()[i];
  }
  AssignmentResult out;
  out.mapping = MinCostAssignment(cost);
  out.total = total;
  for (std::size_t r = 0; r < out.mapping.size(); ++r) {
    if (out.mapping[r] >= 0) {
      out.matched_count +=
          contingency(r, static_cast<std::size_t>(out.mapping[r]));
    }
  }
  return out;
}

ClusteringAccuracy ClusteringAccuracyOf(std::span<const int> predictions,
                                        std::span<const int> labels,
                                        std::span<const bool> is_old) {
  if (predictions.size() != labels.size() ||
      is_old.size() != labels.size()) {
    throw ShapeError("prediction, label and subset lengths differ");
  }
  if (labels.empty()) throw InputError("accuracy of an empty set");
  const auto pred_index = IndexValues(predictions);
  const auto label_index = IndexValues(labels);
  Matrix contingency(pred_index.size(), label_index.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    contingency(pred_index.at(predictions[i]), label_index.at(labels[i])) +=
        1.0;
  }
  const AssignmentResult match = MatchContingency(contingency);

  std::size_t hits[2] = {0, 0};
  std::size_t counts[2] = {0, 0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int mapped = match.mapping[pred_index.at(predictions[i])];
    const bool hit =
        mapped >= 0 &&
        static_cast<std::size_t>(mapped) == label_index.at(labels[i]);
    const int group = is_old[i] ? 0 : 1;
    ++counts[group];
    if (hit) ++hits[group];
  }
  ClusteringAccuracy out;
  out.all = static_cast<double>(hits[0] + hits[1]) /
            static_cast<double>(labels.size());
  if (counts[0] > 0) {
    out.old_classes =
        static_cast<double>(hits[0]) / static_cast<double>(counts[0]);
  }
  if (counts[1] > 0) {
    out.new_classes =
        static_cast<double>(hits[1]) / static_cast<double>(counts[1]);
  }
  return out;
}

double Forgetting(double m_old_base, double m_old_inc) {
  return m_old_base - m_old_inc;
}

}  // namespace streamgcd
