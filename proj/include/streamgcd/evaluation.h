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

#ifndef STREAMGCD_EVALUATION_H_
#define STREAMGCD_EVALUATION_H_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "streamgcd/matrix.h"

namespace streamgcd {

// Minimum-cost assignment for a rows×cols cost matrix, padded to square with
// zero-cost dummies. Entry r is the column assigned to row r, or -1 when row
// r landed on a dummy column.
std::vector<int> MinCostAssignment(const Matrix& cost);

struct AssignmentResult {
  // mapping[p] = ground-truth index matched to prediction index p, or -1.
  std::vector<int> mapping;
  double matched_count = 0.0;
  double total = 0.0;

  double accuracy() const { return total > 0.0 ? matched_count / total : 0.0; }
};

// Maximum-agreement matching on a prediction × ground-truth contingency
// table. Throws InputError on an empty table.
AssignmentResult MatchContingency(const Matrix& contingency);

struct ClusteringAccuracy {
  double all = 0.0;
  std::optional<double> old_classes;  // absent when the subset is empty
  std::optional<double> new_classes;
};

// Hungarian-matched accuracy. One matching is computed over every sample and
// reused for the old/new subsets.
ClusteringAccuracy ClusteringAccuracyOf(std::span<const int> predictions,
                                        std::span<const int> labels,
                                        std::span<const bool> is_old);

// M_old at the end of the base session minus M_old after the stream.
double Forgetting(double m_old_base, double m_old_inc);

struct SessionMetrics {
  std::optional<double> m_all;
  std::optional<double> m_old;
  std::optional<double> m_new;
  std::optional<double> forgetting;
  std::optional<double> m_ps_all;
  std::optional<double> m_ps_old;
  std::optional<double> m_ps_new;
  std::optional<double> m_old_base;
};

}  // namespace streamgcd

#endif  // STREAMGCD_EVALUATION_H_
