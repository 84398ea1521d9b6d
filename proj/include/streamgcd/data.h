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

#ifndef STREAMGCD_DATA_H_
#define STREAMGCD_DATA_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "streamgcd/feature_batch.h"

namespace streamgcd {

// Synthetic or ingested scenario. Classes [0, n_base_classes) are known;
// [n_base_classes, n_base_classes + n_novel_classes) only appear unlabeled.
struct ScenarioSpec {
  std::size_t n_base_classes = 8;
  std::size_t n_novel_classes = 2;
  double labeled_ratio = 0.8;
  std::size_t feature_dim = 16;
  std::size_t samples_per_class = 100;
  double blob_separation = 12.0;
  double blob_std = 1.0;
  // Held-out test fraction per class. Synthetic generation draws this many
  // extra samples; MakeSplits carves them out of the given data.
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field.
  void Validate() const;
  std::size_t num_classes() const { return n_base_classes + n_novel_classes; }
};

// Training and evaluation splits. inc_unlabeled carries no labels; its
// ground truth lives in inc_truth, which only evaluation reads.
struct SplitBundle {
  FeatureBatch base_labeled;
  FeatureBatch inc_unlabeled;
  std::vector<int> inc_truth;
  FeatureBatch test_base;
  FeatureBatch test_inc;
  std::size_t n_base_classes = 0;
};

// Class means on a sphere of radius blob_separation, at least 3·blob_std
// apart; isotropic Gaussian samples around them. Deterministic per seed.
SplitBundle GenerateSynthetic(const ScenarioSpec& spec);

// Per-class split: test_fraction held out, then labeled_ratio of the rest of
// each known class labeled; novel classes go entirely to the stream.
SplitBundle MakeSplits(const Matrix& features, std::span<const int> labels,
                       const ScenarioSpec& spec);

// CSV with header f0,...,f{d-1}[,label]. A label of -1 marks an unlabeled
// row; a column of only -1 loads as an unlabeled batch. Row ids are the
// 0-based data-row numbers.
FeatureBatch LoadFeatureCsv(const std::filesystem::path& path);
// Shortest round-trip formatting, so LoadFeatureCsv reads back identical
// values. The label column is written only when the batch has labels.
void WriteFeatureCsv(const std::filesystem::path& path,
                     const FeatureBatch& batch);

// Count of labeled/unlabeled/test rows a class of `n` samples yields.
struct ClassSplitCounts {
  std::size_t test = 0;
  std::size_t labeled = 0;
  std::size_t unlabeled = 0;
};
ClassSplitCounts SplitCounts(std::size_t n, bool known,
                             const ScenarioSpec& spec);

}  // namespace streamgcd

#endif  // STREAMGCD_DATA_H_
