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

#include "streamgcd/training.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>

#include "streamgcd/errors.h"
#include "streamgcd/numeric.h"

namespace streamgcd {
namespace {

constexpr std::uint64_t kBaseShuffleStream = 11;

std::vector<std::size_t> Iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

void CheckFinite(double loss, const char* what, std::size_t batch) {
  if (!std::isfinite(loss)) {
    throw TrainingError(std::string(what) + " loss is not finite on batch " +
                        std::to_string(batch));
  }
}

}  // namespace

void StreamConfig::Validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (inner_steps < 1) throw ConfigError("inner_steps must be >= 1");
}

std::string ToString(RunMode m) {
  switch (m) {
    case RunMode::kDean:
      return "DEAN";
    case RunMode::kFineTune:
      return "FINE_TUNE";
    case RunMode::kSupervised:
      return "SUPERVISED";
  }
  return "UNKNOWN";
}

RunMode RunModeFromString(const std::string& name) {
  if (name == "DEAN") return RunMode::kDean;
  if (name == "FINE_TUNE") return RunMode::kFineTune;
  if (name == "SUPERVISED") return RunMode::kSupervised;
  throw ConfigError("unknown mode '" + name +
                    "' (expected DEAN, FINE_TUNE or SUPERVISED)");
}

BaseSessionResult TrainBase(Model model, const FeatureBatch& labeled,
                            const StreamConfig& cfg,
                            const AdamWOptions& optimizer) {
  labeled.Validate();
  if (!labeled.labels) throw InputError("base session needs labeled data");
  if (labeled.size() == 0) throw ConfigError("base session data is empty");
  const std::vector<int>& labels = *labeled.labels;
  const std::size_t n_classes = model.num_classes();
  std::vector<char> present(n_classes, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
      throw InputError("base label " + std::to_string(y) + " outside [0, " +
                       std::to_string(n_classes) + ")");
    }
    present[static_cast<std::size_t>(y)] = 1;
  }

  BaseSessionResult result;
  model.SetFrozen(false);
  AdamW opt(optimizer);
  Rng shuffle = Rng(cfg.seed).Fork(kBaseShuffleStream);
  std::vector<std::size_t> order = Iota(labeled.size());
  const std::size_t bs = std::max<std::size_t>(cfg.batch_size, 1);
  for (std::size_t epoch = 0; epoch < cfg.base_epochs; ++epoch) {
    shuffle.Shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      const Matrix x = labeled.features.SelectRows(idx);
      std::vector<int> y;
      for (std::size_t i : idx) y.push_back(labels[i]);
      const LossWithGrad ce = CrossEntropyLoss(model.Forward(x).logits, y);
      CheckFinite(ce.loss, "base cross-entropy", epoch);
      opt.Step(model.TrainableParameters(), model.Backward(x, ce.grad_logits));
      epoch_loss += ce.loss * static_cast<double>(idx.size());
    }
    result.epoch_losses.push_back(epoch_loss /
                                  static_cast<double>(labeled.size()));
  }

  const ForwardOutput out = model.Forward(labeled.features);
  result.calibration = EnergyStats::From(RowEnergies(out.logits));
  result.labeled_feature_std = ColumnStdDevs(out.features);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < labeled.size(); ++r) {
    if (static_cast<int>(ArgMax(out.logits.row(r))) == labels[r]) ++correct;
  }
  result.train_accuracy =
      static_cast<double>(correct) / static_cast<double>(labeled.size());
  model.SetFrozen(true);
  result.offline = std::move(model);
  return result;
}

IncrementalSession::IncrementalSession(Model offline, Model online,
                                       EnergyStats calibration,
                                       std::vector<double> labeled_feature_std,
                                       IncrementalOptions options, Rng rng)
    : offline_(std::move(offline)),
      online_(std::move(online)),
      calibration_(calibration),
      labeled_feature_std_(std::move(labeled_feature_std)),
      options_(std::move(options)),
      rng_(rng),
      optimizer_(options_.optimizer) {
  if (options_.inner_steps < 1) {
    throw ConfigError("inner_steps must be >= 1");
  }
}

BatchOutcome IncrementalSession::ProcessBatch(
    const FeatureBatch& batch, std::optional<std::span<const int>> oracle) {
  batch.Validate();
  if (batch.size() < 2) {
    throw InputError("incremental batches need at least two rows");
  }
  BatchOutcome out;
  out.batch_index = batch_index_;
  Label(batch, oracle, out);
  out.partition.Validate(batch.size());
  Update(batch, out);
  ++batch_index_;
  return out;
}

void IncrementalSession::Label(const FeatureBatch& batch,
                               std::optional<std::span<const int>> oracle,
                               BatchOutcome& out) {
  switch (options_.mode) {
    case RunMode::kFineTune:
      LabelFineTune(batch, out);
      return;
    case RunMode::kSupervised:
      if (!oracle || oracle->size() != batch.size()) {
        throw InputError("SUPERVISED mode needs one oracle label per row");
      }
      LabelSupervised(batch, *oracle, out);
      return;
    case RunMode::kDean:
      break;
  }

  EnergySplit stage1 = SplitKnownUnknown(batch.features, offline_,
                                         calibration_, options_.discovery);
  out.partition.known = stage1.lower;
  const Matrix unknown = batch.features.SelectRows(stage1.upper);
  EnergySplit stage2 = SplitSeenUnseen(unknown, online_, batch_index_ == 0,
                                       seen_stats_, options_.discovery);
  for (std::size_t i : stage2.lower) out.partition.seen.push_back(stage1.upper[i]);
  for (std::size_t i : stage2.upper) {
    out.partition.unseen.push_back(stage1.upper[i]);
  }
  std::sort(out.partition.seen.begin(), out.partition.seen.end());
  std::sort(out.partition.unseen.begin(), out.partition.unseen.end());
  out.partition.Validate(batch.size());

  VarianceReferences refs;
  refs.labeled_std = labeled_feature_std_;
  LabelingResult labeled =
      AssignPseudoLabels(out.partition, batch, offline_, online_,
                         options_.labeling, refs, rng_.Fork(batch_index_));
  if (!labeled.expansion.empty()) {
    online_.ExpandClassifier(labeled.expansion.n_clusters,
                             &labeled.expansion.exemplar_features);
    out.nodes_added = labeled.expansion.n_clusters;
  }
  out.pseudo = std::move(labeled.batch);
  out.clustering = std::move(labeled.clustering);
  out.vfa_fell_back = labeled.vfa_fell_back;
  out.stage1 = std::move(stage1);
  out.stage2 = std::move(stage2);
}

void IncrementalSession::LabelFineTune(const FeatureBatch& batch,
                                       BatchOutcome& out) {
  const std::size_t before = online_.num_classes();
  const Matrix h = online_.Features(batch.features);
  ApResult ap = AffinityPropagation(h, options_.labeling.ap);
  const Matrix init = h.SelectRows(ap.exemplars);
  online_.ExpandClassifier(ap.n_clusters, &init);
  out.nodes_added = ap.n_clusters;
  out.clustering = std::move(ap);

  const Matrix logits = online_.Forward(batch.features).logits;
  PseudoLabeledBatch& pl = out.pseudo;
  pl.inputs = batch.features;
  pl.ids = batch.ids;
  const std::size_t old_count = online_.head().old_count;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const std::size_t label = ArgMax(logits.row(r));
    pl.labels.push_back(static_cast<int>(label));
    if (label < old_count) {
      pl.source.push_back(SampleSource::kKnown);
      out.partition.known.push_back(r);
    } else if (label < before) {
      pl.source.push_back(SampleSource::kSeen);
      out.partition.seen.push_back(r);
    } else {
      pl.source.push_back(SampleSource::kUnseen);
      out.partition.unseen.push_back(r);
    }
  }
}

void IncrementalSession::LabelSupervised(const FeatureBatch& batch,
                                         std::span<const int> truth,
                                         BatchOutcome& out) {
  const int old_count = static_cast<int>(online_.head().old_count);
  std::set<int> fresh;
  for (int y : truth) {
    if (y >= old_count && !oracle_nodes_.count(y)) fresh.insert(y);
  }
  if (!fresh.empty()) {
    const Matrix h = online_.Features(batch.features);
    Matrix init(fresh.size(), h.cols());
    int next = static_cast<int>(online_.num_classes());
    std::size_t k = 0;
    for (int y : fresh) {
      std::size_t count = 0;
      for (std::size_t r = 0; r < batch.size(); ++r) {
        if (truth[r] != y) continue;
        for (std::size_t c = 0; c < h.cols(); ++c) init(k, c) += h(r, c);
        ++count;
      }
      for (std::size_t c = 0; c < h.cols(); ++c) {
        init(k, c) /= static_cast<double>(count);
      }
      oracle_nodes_[y] = next++;
      ++k;
    }
    online_.ExpandClassifier(fresh.size(), &init);
    out.nodes_added = fresh.size();
  }
  PseudoLabeledBatch& pl = out.pseudo;
  pl.inputs = batch.features;
  pl.ids = batch.ids;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const int y = truth[r];
    if (y < old_count) {
      pl.labels.push_back(y);
      pl.source.push_back(SampleSource::kKnown);
      out.partition.known.push_back(r);
    } else {
      pl.labels.push_back(oracle_nodes_.at(y));
      const bool is_fresh = fresh.count(y) != 0;
      pl.source.push_back(is_fresh ? SampleSource::kUnseen
                                   : SampleSource::kSeen);
      (is_fresh ? out.partition.unseen : out.partition.seen).push_back(r);
    }
  }
}

void IncrementalSession::Update(const FeatureBatch& batch, BatchOutcome& out) {
  const Matrix& x = batch.features;
  const std::vector<int>& labels = out.pseudo.labels;
  const std::vector<std::size_t> novel = out.partition.Novel();
  const ClassifierHead& head = online_.head();
  const bool use_ec = options_.mode != RunMode::kFineTune && !novel.empty() &&
                      !head.old_range().empty() && !head.new_range().empty();

  for (std::size_t step = 0; step < options_.inner_steps; ++step) {
    const Matrix logits = online_.Forward(x).logits;
    LossWithGrad ce = CrossEntropyLoss(logits, labels);
    CheckFinite(ce.loss, "cross-entropy", batch_index_);
    double ec_value = 0.0;
    if (use_ec) {
      const LossWithGrad ec =
          EnergyContrastiveLoss(logits.SelectRows(novel), head.old_range(),
                                head.new_range(), options_.energy_loss);
      CheckFinite(ec.loss, "energy-contrastive", batch_index_);
      ec_value = ec.loss;
      for (std::size_t k = 0; k < novel.size(); ++k) {
        auto dst = ce.grad_logits.row(novel[k]);
        auto src = ec.grad_logits.row(k);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
      }
    }
    out.losses.push_back(LossBreakdown::Of(ce.loss, ec_value));
    const Gradients grads = online_.Backward(x, ce.grad_logits);
    optimizer_.Step(online_.TrainableParameters(), grads);
    if (access_log_) {
      for (std::uint64_t id : batch.ids) {
        access_log_->uses.emplace_back(batch_index_, id);
      }
    }
  }

  if (!novel.empty() && !online_.head().new_range().empty()) {
    const Matrix logits = online_.Forward(x.SelectRows(novel)).logits;
    for (double e : RowEnergies(logits)) {
      seen_sum_ += e;
      seen_sum_sq_ += e * e;
      ++seen_count_;
    }
    const double n = static_cast<double>(seen_count_);
    const double mean = seen_sum_ / n;
    const double var = std::max(seen_sum_sq_ / n - mean * mean, 0.0);
    seen_stats_ = EnergyStats{mean, std::sqrt(var), seen_count_};
  }
}

}  // namespace streamgcd
