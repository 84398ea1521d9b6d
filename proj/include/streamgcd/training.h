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

#ifndef STREAMGCD_TRAINING_H_
#define STREAMGCD_TRAINING_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamgcd/discovery.h"
#include "streamgcd/feature_batch.h"
#include "streamgcd/labeling.h"
#include "streamgcd/losses.h"
#include "streamgcd/model.h"
#include "streamgcd/optimizer.h"
#include "streamgcd/rng.h"

namespace streamgcd {

struct StreamConfig {
  std::size_t batch_size = 64;
  // Gradient steps on each incremental batch before it is discarded.
  std::size_t inner_steps = 15;
  std::size_t base_epochs = 30;
  std::uint64_t seed = 0;
  bool shuffle_stream = true;

  // Throws ConfigError for batch_size < 2 or inner_steps < 1.
  void Validate() const;
};

enum class RunMode {
  kDean,
  // Reference run: no energy split, no augmentation, no energy loss; the
  // whole network is trained on its own full-head predictions.
  kFineTune,
  // Reference run: ground-truth labels in the incremental session.
  kSupervised,
};

std::string ToString(RunMode m);
RunMode RunModeFromString(const std::string& name);

struct BaseSessionResult {
  Model offline;  // trained, every parameter frozen
  EnergyStats calibration;  // energies of the labeled training data
  std::vector<double> labeled_feature_std;
  double train_accuracy = 0.0;
  std::vector<double> epoch_losses;
};

// Supervised cross-entropy training of every parameter for cfg.base_epochs
// shuffled passes. The returned model is frozen; copy it to start the online
// model.
BaseSessionResult TrainBase(Model model, const FeatureBatch& labeled,
                            const StreamConfig& cfg,
                            const AdamWOptions& optimizer = {});

struct IncrementalOptions {
  RunMode mode = RunMode::kDean;
  std::size_t inner_steps = 15;
  DiscoveryOptions discovery;
  LabelingOptions labeling;
  EnergyContrastiveOptions energy_loss;
  AdamWOptions optimizer;
};

// Record of one processed batch.
struct BatchOutcome {
  std::size_t batch_index = 0;
  BatchPartition partition;
  PseudoLabeledBatch pseudo;
  std::size_t nodes_added = 0;
  std::vector<LossBreakdown> losses;  // one per inner step
  std::optional<EnergySplit> stage1;
  std::optional<EnergySplit> stage2;
  std::optional<ApResult> clustering;
  bool vfa_fell_back = false;
};

// Ids of the samples whose rows fed each gradient step, tagged with the batch
// that was current. Lets tests audit the single-pass constraint.
struct AccessLog {
  std::vector<std::pair<std::size_t, std::uint64_t>> uses;
};

// The online incremental session. Batches are processed strictly in order and
// nothing from a batch is retained after ProcessBatch returns.
class IncrementalSession {
 public:
  IncrementalSession(Model offline, Model online, EnergyStats calibration,
                     std::vector<double> labeled_feature_std,
                     IncrementalOptions options, Rng rng);

  // discover → pseudo-label → expand → inner_steps updates. `oracle_labels`
  // is required in SUPERVISED mode and ignored otherwise. Throws
  // TrainingError when a loss turns non-finite.
  BatchOutcome ProcessBatch(const FeatureBatch& batch,
                            std::optional<std::span<const int>> oracle_labels =
                                std::nullopt);

  const Model& online() const { return online_; }
  const Model& offline() const { return offline_; }
  std::size_t batches_processed() const { return batch_index_; }
  const std::optional<EnergyStats>& seen_stats() const { return seen_stats_; }
  void set_access_log(AccessLog* log) { access_log_ = log; }

 private:
  void Label(const FeatureBatch& batch,
             std::optional<std::span<const int>> oracle, BatchOutcome& out);
  void LabelFineTune(const FeatureBatch& batch, BatchOutcome& out);
  void LabelSupervised(const FeatureBatch& batch, std::span<const int> truth,
                       BatchOutcome& out);
  void Update(const FeatureBatch& batch, BatchOutcome& out);

  Model offline_;
  Model online_;
  EnergyStats calibration_;
  std::vector<double> labeled_feature_std_;
  IncrementalOptions options_;
  Rng rng_;
  AdamW optimizer_;
  std::size_t batch_index_ = 0;
  std::optional<EnergyStats> seen_stats_;
  double seen_sum_ = 0.0;
  double seen_sum_sq_ = 0.0;
  std::size_t seen_count_ = 0;
  // SUPERVISED mode: ground-truth novel class → head node.
  std::map<int, int> oracle_nodes_;
  AccessLog* access_log_ = nullptr;
};

}  // namespace streamgcd

#endif  // STREAMGCD_TRAINING_H_
