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

#ifndef STREAMGCD_LABELING_H_
#define STREAMGCD_LABELING_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "streamgcd/discovery.h"
#include "streamgcd/feature_batch.h"
#include "streamgcd/matrix.h"
#include "streamgcd/model.h"
#include "streamgcd/rng.h"

namespace streamgcd {

// Where the per-dimension augmentation spread comes from.
enum class VarianceSource {
  kUnseen,   // features of the current UNSEEN rows
  kBatch,    // features of the whole current batch
  kLabeled,  // features of the labeled base set, fixed after the base session
};

std::string ToString(VarianceSource s);
VarianceSource VarianceSourceFromString(const std::string& name);

// Precomputed standard deviations for the non-default sources.
struct VarianceReferences {
  std::vector<double> batch_std;
  std::vector<double> labeled_std;
};

// Originals followed by K draws per original: row n + i·K + j is the j-th
// draw around original i. Total rows = n·(K + 1).
struct AugmentedFeatures {
  Matrix rows;
  std::size_t n_original = 0;
  std::size_t k = 0;
  std::vector<double> sigma;
  // UNSEEN spread was undefined (single row) and the batch spread was used.
  bool fell_back_to_batch = false;
};

// Variance-based feature augmentation. Draws for original i come from
// rng.Fork(i), so they do not depend on how many rows precede it.
AugmentedFeatures VfaAugment(const Matrix& unseen_features, std::size_t k,
                             const Rng& rng, VarianceSource source,
                             const VarianceReferences& refs = {});

struct ApOptions {
  double damping = 0.5;
  // Self-similarity; the median off-diagonal similarity when absent.
  std::optional<double> preference;
  int max_iterations = 200;
  int convergence_window = 15;
};

struct ApResult {
  std::vector<std::size_t> exemplars;   // ascending point indices
  std::vector<std::size_t> assignment;  // exemplar point index, per point
  std::size_t n_clusters = 0;
  int iterations = 0;
  bool converged = false;
};

// Affinity propagation on s(i,k) = -||x_i - x_k||². Non-exemplars join their
// most similar exemplar; exemplars are self-assigned. Throws InputError on
// an empty input or a damping outside [0.5, 1).
ApResult AffinityPropagation(const Matrix& points, const ApOptions& options = {});

enum class SampleSource { kKnown, kSeen, kUnseen };
std::string ToString(SampleSource s);

// One pseudo-label per batch row, in batch order.
struct PseudoLabeledBatch {
  Matrix inputs;
  std::vector<std::uint64_t> ids;
  std::vector<int> labels;
  std::vector<SampleSource> source;
};

struct ExpansionRequest {
  std::size_t n_clusters = 0;
  Matrix exemplar_features;  // n_clusters × d

  bool empty() const { return n_clusters == 0; }
};

struct LabelingOptions {
  std::size_t vfa_k = 5;
  VarianceSource variance_source = VarianceSource::kUnseen;
  ApOptions ap;
};

struct LabelingResult {
  PseudoLabeledBatch batch;
  ExpansionRequest expansion;
  std::optional<ApResult> clustering;  // set when UNSEEN rows were clustered
  bool vfa_fell_back = false;
};

// KNOWN rows take the offline argmax, SEEN rows the online argmax over the
// novel nodes, UNSEEN rows are augmented, clustered, and each cluster that
// holds an original row becomes a fresh class (ordered by exemplar index).
// refs.batch_std is filled from the batch when empty.
LabelingResult AssignPseudoLabels(const BatchPartition& partition,
                                  const FeatureBatch& batch,
                                  const Model& offline, const Model& online,
                                  const LabelingOptions& options,
                                  VarianceReferences refs, const Rng& rng);

}  // namespace streamgcd

#endif  // STREAMGCD_LABELING_H_
