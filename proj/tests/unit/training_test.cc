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

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "streamgcd/checkpoint.h"
#include "streamgcd/data.h"
#include "streamgcd/errors.h"
#include "streamgcd/training.h"

namespace streamgcd {
namespace {

ScenarioSpec SmallSpec(std::uint64_t seed, double separation = 12.0) {
  ScenarioSpec spec;
  spec.seed = seed;
  spec.blob_separation = separation;
  return spec;
}

Model FreshModel(const SplitBundle& data, std::uint64_t seed) {
  ModelConfig mc;
  mc.input_dim = data.base_labeled.dim();
  mc.num_classes = data.n_base_classes;
  Rng rng(seed);
  return Model::Create(mc, rng);
}

StreamConfig FastStream(std::uint64_t seed, std::size_t epochs = 30) {
  StreamConfig sc;
  sc.seed = seed;
  sc.base_epochs = epochs;
  return sc;
}

TEST_CASE("stream config validation and mode names") {
  StreamConfig sc;
  CHECK_NOTHROW(sc.Validate());
  CHECK(sc.batch_size == 64u);
  CHECK(sc.inner_steps == 15u);
  CHECK(sc.base_epochs == 30u);
  sc.batch_size = 1;
  CHECK_THROWS_AS(sc.Validate(), ConfigError);
  sc.batch_size = 2;
  sc.inner_steps = 0;
  CHECK_THROWS_AS(sc.Validate(), ConfigError);
  for (RunMode m : {RunMode::kDean, RunMode::kFineTune, RunMode::kSupervised}) {
    CHECK(RunModeFromString(ToString(m)) == m);
  }
  CHECK_THROWS_AS(RunModeFromString("dean"), ConfigError);
}

TEST_CASE("base session reaches high training accuracy") {
  const SplitBundle data = GenerateSynthetic(SmallSpec(3, 6.0));
  const BaseSessionResult base =
      TrainBase(FreshModel(data, 1), data.base_labeled, FastStream(3));
  CHECK(base.train_accuracy >= 0.99);
  CHECK(base.epoch_losses.size() == 30u);
  CHECK(base.epoch_losses.back() < base.epoch_losses.front());
  CHECK(base.calibration.count == data.base_labeled.size());
  CHECK(base.labeled_feature_std.size() == base.offline.feature_dim());
  for (const auto& layer : base.offline.layers()) CHECK(layer.frozen);
  CHECK(base.offline.head().frozen);
}

TEST_CASE("zero epochs only changes freeze flags") {
  const SplitBundle data = GenerateSynthetic(SmallSpec(4));
  const Model start = FreshModel(data, 2);
  const BaseSessionResult base =
      TrainBase(start, data.base_labeled, FastStream(4, 0));
  Model refrozen = start;
  refrozen.SetFrozen(true);
  CHECK(base.offline == refrozen);
  CHECK(base.epoch_losses.empty());
}

TEST_CASE("base session is deterministic") {
  const SplitBundle data = GenerateSynthetic(SmallSpec(5));
  const auto a = TrainBase(FreshModel(data, 3), data.base_labeled, FastStream(5, 5));
  const auto b = TrainBase(FreshModel(data, 3), data.base_labeled, FastStream(5, 5));
  CHECK(SerializeModel(a.offline) == SerializeModel(b.offline));
  const auto c = TrainBase(FreshModel(data, 3), data.base_labeled, FastStream(6, 5));
  CHECK(SerializeModel(a.offline) != SerializeModel(c.offline));
}

TEST_CASE("base session rejects unusable labels") {
  const SplitBundle data = GenerateSynthetic(SmallSpec(5));
  CHECK_THROWS(TrainBase(FreshModel(data, 3), data.base_labeled.WithoutLabels(),
                         FastStream(5, 1)));
}

// Base model plus an online copy with adapters, as the scenario runner builds
// them.
struct SessionFixture {
  SplitBundle data;
  BaseSessionResult base;
  Model online;

  explicit SessionFixture(std::uint64_t seed)
      : data(GenerateSynthetic(SmallSpec(seed))),
        base(TrainBase(FreshModel(data, seed), data.base_labeled,
                       FastStream(seed))),
        online(base.offline) {
    online.SetFrozen(false);
    online.SetBackboneFrozen(true);
    Rng rng(seed + 100);
    online.AttachAdapters(online.LastLayers(), 5, rng);
  }

  IncrementalSession Session(IncrementalOptions opt) const {
    return IncrementalSession(base.offline, online, base.calibration,
                              base.labeled_feature_std, opt, Rng(7));
  }

  // Stream rows whose hidden class satisfies `keep`, up to `limit`, skipping
  // the first `skip` matches.
  FeatureBatch Rows(bool novel, std::size_t limit, std::size_t skip = 0,
                    int only_class = -1) const {
    std::vector<std::size_t> idx;
    std::size_t seen = 0;
    for (std::size_t i = 0; i < data.inc_truth.size() && idx.size() < limit; ++i) {
      const int y = data.inc_truth[i];
      const bool is_novel = y >= static_cast<int>(data.n_base_classes);
      if (is_novel != novel) continue;
      if (only_class >= 0 && y != only_class) continue;
      if (seen++ < skip) continue;
      idx.push_back(i);
    }
    return data.inc_unlabeled.Select(idx);
  }
};

// Known rows inside the calibration threshold; rows in the upper tail of the
// known energies are legitimately flagged by the threshold rule.
TEST_CASE("known-only batch causes no expansion and no energy term") {
  SessionFixture fx(11);
  IncrementalOptions opt;
  opt.discovery.fallback_enabled = true;
  opt.inner_steps = 3;
  IncrementalSession session = fx.Session(opt);
  const FeatureBatch pool = fx.Rows(false, 80);
  const std::vector<double> energies =
      RowEnergies(fx.base.offline.Forward(pool.features).logits);
  std::vector<std::size_t> inside;
  for (std::size_t i = 0; i < pool.size() && inside.size() < 40; ++i) {
    if (energies[i] <= fx.base.calibration.Threshold()) inside.push_back(i);
  }
  REQUIRE(inside.size() == 40u);
  const FeatureBatch batch = pool.Select(inside);
  const BatchOutcome out = session.ProcessBatch(batch);
  CHECK(out.partition.known.size() == batch.size());
  CHECK(out.partition.seen.empty());
  CHECK(out.partition.unseen.empty());
  CHECK(out.nodes_added == 0u);
  CHECK(session.online().num_classes() == fx.data.n_base_classes);
  REQUIRE(out.losses.size() == 3u);
  for (const LossBreakdown& l : out.losses) {
    CHECK(l.ec == 0.0);
    CHECK(l.total == l.ce);
  }
}

TEST_CASE("frozen base weights survive a session bit for bit") {
  SessionFixture fx(12);
  IncrementalOptions opt;
  opt.inner_steps = 4;
  IncrementalSession session = fx.Session(opt);
  const auto before = fx.online.layers();
  for (std::size_t b = 0; b < 4; ++b) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 64 * b; i < 64 * (b + 1); ++i) idx.push_back(i);
    session.ProcessBatch(fx.data.inc_unlabeled.Select(idx));
    const auto& now = session.online().layers();
    for (std::size_t l = 0; l < now.size(); ++l) {
      CHECK(now[l].weight == before[l].weight);
      CHECK(now[l].bias == before[l].bias);
    }
  }
  CHECK(session.offline() == fx.base.offline);
}

TEST_CASE("gradients only touch the current batch") {
  SessionFixture fx(13);
  IncrementalOptions opt;
  opt.inner_steps = 2;
  IncrementalSession session = fx.Session(opt);
  AccessLog log;
  session.set_access_log(&log);
  std::map<std::uint64_t, std::size_t> batch_of;
  for (std::size_t b = 0; b < 5; ++b) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 64 * b; i < 64 * (b + 1); ++i) idx.push_back(i);
    const FeatureBatch batch = fx.data.inc_unlabeled.Select(idx);
    for (std::uint64_t id : batch.ids) batch_of[id] = b;
    session.ProcessBatch(batch);
  }
  CHECK(session.batches_processed() == 5u);
  CHECK(log.uses.size() == 5u * 2u * 64u);
  std::set<std::uint64_t> touched;
  for (const auto& [batch, id] : log.uses) {
    REQUIRE(batch_of.count(id));
    CHECK(batch_of[id] == batch);
    touched.insert(id);
  }
  CHECK(touched.size() == batch_of.size());
}

TEST_CASE("a repeated novel class is routed to seen") {
  for (std::uint64_t seed : {21, 22, 23}) {
    SessionFixture fx(seed);
    IncrementalOptions opt;
    opt.discovery.fallback_enabled = true;
    IncrementalSession session = fx.Session(opt);
    const int novel = static_cast<int>(fx.data.n_base_classes);
    const FeatureBatch first = fx.Rows(true, 40, 0, novel);
    const BatchOutcome a = session.ProcessBatch(first);
    CHECK(a.nodes_added >= 1u);
    CHECK(a.partition.seen.empty());
    const FeatureBatch second = fx.Rows(true, 40, 40, novel);
    REQUIRE(second.size() >= 20u);
    const BatchOutcome b = session.ProcessBatch(second);
    const double seen_share =
        static_cast<double>(b.partition.seen.size()) / second.size();
    CHECK(seen_share >= 0.8);
  }
}

TEST_CASE("pseudo-label sources follow the partition") {
  SessionFixture fx(14);
  IncrementalOptions opt;
  opt.inner_steps = 2;
  IncrementalSession session = fx.Session(opt);
  for (std::size_t b = 0; b < 3; ++b) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 64 * b; i < 64 * (b + 1); ++i) idx.push_back(i);
    const std::size_t before = session.online().num_classes();
    const BatchOutcome out =
        session.ProcessBatch(fx.data.inc_unlabeled.Select(idx));
    CHECK(session.online().num_classes() == before + out.nodes_added);
    for (std::size_t i : out.partition.known) {
      CHECK(out.pseudo.source[i] == SampleSource::kKnown);
      CHECK(out.pseudo.labels[i] < static_cast<int>(fx.data.n_base_classes));
    }
    for (std::size_t i : out.partition.unseen) {
      CHECK(out.pseudo.source[i] == SampleSource::kUnseen);
      CHECK(out.pseudo.labels[i] >= static_cast<int>(before));
    }
  }
}

TEST_CASE("supervised mode needs oracle labels") {
  SessionFixture fx(15);
  IncrementalOptions opt;
  opt.mode = RunMode::kSupervised;
  opt.inner_steps = 1;
  IncrementalSession session = fx.Session(opt);
  std::vector<std::size_t> idx(32);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const FeatureBatch batch = fx.data.inc_unlabeled.Select(idx);
  CHECK_THROWS_AS(session.ProcessBatch(batch), InputError);
  const std::vector<int> truth(fx.data.inc_truth.begin(),
                               fx.data.inc_truth.begin() + 32);
  const BatchOutcome out = session.ProcessBatch(batch, truth);
  std::set<int> novel;
  for (int y : truth) {
    if (y >= static_cast<int>(fx.data.n_base_classes)) novel.insert(y);
  }
  CHECK(out.nodes_added == novel.size());
}

TEST_CASE("undersized batches are rejected") {
  SessionFixture fx(16);
  IncrementalSession session = fx.Session({});
  const std::vector<std::size_t> one = {0};
  CHECK_THROWS(session.ProcessBatch(fx.data.inc_unlabeled.Select(one)));
}

}  // namespace
}  // namespace streamgcd
