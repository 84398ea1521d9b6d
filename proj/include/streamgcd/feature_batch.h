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

#ifndef STREAMGCD_FEATURE_BATCH_H_
#define STREAMGCD_FEATURE_BATCH_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "streamgcd/matrix.h"

namespace streamgcd {

// n×d feature rows with per-sample identifiers and optional labels.
struct FeatureBatch {
  Matrix features;
  std::vector<std::uint64_t> ids;
  std::optional<std::vector<int>> labels;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  bool has_labels() const { return labels.has_value(); }

  // Throws ShapeError when ids/labels lengths disagree with the row count.
  void Validate() const;

  FeatureBatch Select(std::span<const std::size_t> indices) const;
  // Copy with labels removed.
  FeatureBatch WithoutLabels() const;
};

// Builds a batch with ids 0..n-1.
FeatureBatch MakeBatch(Matrix features,
                       std::optional<std::vector<int>> labels = std::nullopt);

}  // namespace streamgcd

#endif  // STREAMGCD_FEATURE_BATCH_H_
