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

#ifndef STREAMGCD_SCENARIO_H_
#define STREAMGCD_SCENARIO_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "streamgcd/data.h"
#include "streamgcd/evaluation.h"
#include "streamgcd/labeling.h"
#include "streamgcd/model.h"
#include "streamgcd/optimizer.h"
#include "streamgcd/training.h"

namespace streamgcd {

// Everything a run needs. Reproducible from its JSON form plus the seed.
struct RunConfig {
  RunMode mode = RunMode::kDean;
  std::uint64_t seed = 0;
  ScenarioSpec scenario;
  // Directory written by `generate`; when empty the scenario is synthesized.
  std::filesystem::path data_dir;
  StreamConfig stream;
  std::vector<std::size_t> hidden_dims = {64, 64};
  std::size_t feature_dim = 32;
  Activation activation = Activation::kTanh;
  std::size_t vfa_k = 5;
  VarianceSource variance_source = VarianceSource::kUnseen;
  std::size_t lora_rank = 5;
  std::size_t lora_layers = 5;
  bool egd_fallback = false;
  double ap_damping = 0.5;
  std::optional<double> ap_preference;
  AdamWOptions optimizer;
  std::filesystem::path out_dir;

  // Throws ConfigError naming the offending field.
  void Validate() const;
};

nlohmann::json ToJson(const ScenarioSpec& spec);
// Missing fields keep their defaults; unknown fields and type mismatches
// throw ConfigError naming the field.
ScenarioSpec ScenarioSpecFromJson(const nlohmann::json& j);
ScenarioSpec LoadScenarioSpec(const std::filesystem::path& path);

nlohmann::json ToJson(const RunConfig& cfg);
RunConfig RunConfigFromJson(const nlohmann::json& j);
RunConfig LoadRunConfig(const std::filesystem::path& path);

// FNV-1a 64 of the compact JSON form (keys sorted), as 16 hex digits.
std::string ConfigHash(const RunConfig& cfg);

// Split directory layout: base_labeled.csv, inc_unlabeled.csv, test_base.csv,
// test_inc.csv, and the evaluation-only inc_truth.labels sidecar.
void WriteSplitDirectory(const std::filesystem::path& dir,
                         const SplitBundle& bundle);
SplitBundle LoadSplitDirectory(const std::filesystem::path& dir,
                               std::size_t n_base_classes);
SplitBundle LoadScenarioData(const RunConfig& cfg);

struct RunResult {
  SessionMetrics metrics;
  Model base_model;
  Model final_model;
  double base_train_accuracy = 0.0;
  std::vector<nlohmann::json> batch_log;
  std::size_t nodes_added = 0;
  // Per stream row (inc_unlabeled order): the pseudo-label and its source.
  std::vector<int> stream_pseudo_labels;
  std::vector<SampleSource> stream_sources;
};

using ProgressFn = std::function<void(const std::string&)>;

// Base session, one shuffled pass over the stream, then evaluation on the
// held-out test splits.
RunResult RunScenario(const RunConfig& cfg, const SplitBundle& data,
                      const ProgressFn& progress = nullptr);

// Full-head predictions of `model` on test_base ∪ test_inc, Hungarian
// matched with one shared mapping.
ClusteringAccuracy EvaluateModel(const Model& model, const FeatureBatch& test_base,
                                 const FeatureBatch& test_inc,
                                 std::size_t n_base_classes);

nlohmann::json MetricsJson(const SessionMetrics& m, const RunConfig& cfg);
// config.json, base_checkpoint.bin, final_checkpoint.bin, batch_log.jsonl,
// metrics.json.
void WriteRunDirectory(const std::filesystem::path& dir, const RunConfig& cfg,
                       const RunResult& result);

}  // namespace streamgcd

#endif  // STREAMGCD_SCENARIO_H_
