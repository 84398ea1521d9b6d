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

#include "streamgcd/feature_batch.h"

#include <numeric>
#include <utility>

#include "streamgcd/errors.h"

namespace streamgcd {

void FeatureBatch::Validate() const {
  if (ids.size() != features.rows()) {
    throw ShapeError("FeatureBatch has " + std::to_string(ids.size()) +
                     " ids for " + std::to_string(features.rows()) + " rows");
  }
  if (labels && labels->size() != features.rows()) {
    throw ShapeError("FeatureBatch label count does not match row count");
  }
}

FeatureBatch FeatureBatch::Select(std::span<const std::size_t> indices) const {
  FeatureBatch out;
  out.features = features.SelectRows(indices);
  out.ids.reserve(indices.size());
  for (std::size_t i : indices) out.ids.push_back(ids.at(i));
  if (labels) {
    std::vector<int> picked;
    picked.reserve(indices.size());
    for (std::size_t i : indices) picked.push_back(labels->at(i));
    out.labels = std::move(picked);
  }
  return out;
}

FeatureBatch FeatureBatch::WithoutLabels() const {
  FeatureBatch out;
  out.features = features;
  out.ids = ids;
  return out;
}

FeatureBatch MakeBatch(Matrix features, std::optional<std::vector<int>> labels) {
  FeatureBatch batch;
  batch.ids.resize(features.rows());
  std::iota(batch.ids.begin(), batch.ids.end(), std::uint64_t{0});
  batch.features = std::move(features);
  batch.labels = std::move(labels);
  batch.Validate();
  return batch;
}

}  // namespace streamgcd
