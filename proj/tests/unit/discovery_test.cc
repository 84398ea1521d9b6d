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

#include <cmath>
#include <vector>

#include "../oracles.h"
#include "doctest.h"
#include "streamgcd/discovery.h"
#include "streamgcd/errors.h"
#include "streamgcd/model.h"
#include "streamgcd/rng.h"

namespace streamgcd {
namespace {

using doctest::Approx;

TEST_CASE("energy values") {
  CHECK(Energy(std::vector<double>{0.0, 0.0}) == Approx(-std::log(2.0)));
  CHECK(Energy(std::vector<double>{0.0}) == 0.0);
  CHECK(Energy(std::vector<double>{1.0, 2.0, 3.0}) ==
        Approx(-oracle::NaiveLogSumExp({1.0, 2.0, 3.0})).epsilon(1e-12));
  CHECK(Energy(std::vector<double>{1.0, 2.0, 3.0}) ==
        Approx(-3.40760596).epsilon(1e-8));
  CHECK_THROWS_AS(Energy(std::vector<double>{}), DomainError);
}

TEST_CASE("energy shift property") {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(1 + rng.NextIndex(9));
    for (double& x : v) x = 3.0 * rng.NextNormal();
    const double c = 10.0 * rng.NextNormal();
    std::vector<double> s = v;
    for (double& x : s) x += c;
    CHECK(std::abs(Energy(s) - (Energy(v) - c)) < 1e-10);
  }
}

TEST_CASE("row energies over a column range") {
  const Matrix logits(2, 3, std::vector<double>{0, 0, 5, 1, 2, 3});
  const auto all = RowEnergies(logits);
  const auto first_two = RowEnergies(logits, IndexRange{0, 2});
  CHECK(all[1] == Approx(-3.40760596).epsilon(1e-8));
  CHECK(first_two[0] == Approx(-std::log(2.0)));
  CHECK_THROWS_AS(RowEnergies(logits, IndexRange{2, 4}), DomainError);
}

TEST_CASE("mixture fit on a symmetric two-point set") {
  const std::vector<double> s = {-1.0, -1.0, 1.0, 1.0};
  const GmmSplit g = FitGmm1d(s);
  CHECK(g.means[0] == Approx(-1.0).epsilon(1e-6));
  CHECK(g.means[1] == Approx(1.0).epsilon(1e-6));
  CHECK(g.assignments == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("mixture fit recovers generated components") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::vector<double> s;
    std::vector<int> truth;
    for (int i = 0; i < 50; ++i) {
      s.push_back(-12.0 + 0.1 * rng.NextNormal());
      truth.push_back(0);
      s.push_back(-2.0 + 0.1 * rng.NextNormal());
      truth.push_back(1);
    }
    const GmmSplit g = FitGmm1d(s);
    CHECK(std::abs(g.means[0] + 12.0) < 0.2);
    CHECK(std::abs(g.means[1] + 2.0) < 0.2);
    CHECK(g.assignments == truth);
    CHECK(g.weights[0] + g.weights[1] == Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("mixture fit errors") {
  CHECK_THROWS_AS(FitGmm1d(std::vector<double>{1.0}), InputError);
  CHECK_THROWS_AS(FitGmm1d(std::vector<double>{2.0, 2.0, 2.0}),
                  DegenerateInputError);
}

TEST_CASE("EM log-likelihood never decreases and matches the direct sum") {
  Rng rng(77);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 10 + rng.NextIndex(491);
    const double m0 = 5.0 * rng.NextNormal(), m1 = 5.0 * rng.NextNormal();
    const double s0 = 0.2 + 2.0 * rng.NextUniform();
    const double s1 = 0.2 + 2.0 * rng.NextUniform();
    const double w = 0.1 + 0.8 * rng.NextUniform();
    std::vector<double> x(n);
    for (double& v : x) {
      v = rng.NextUniform() < w ? m0 + s0 * rng.NextNormal()
                                : m1 + s1 * rng.NextNormal();
    }
    const GmmSplit g = FitGmm1d(x);
    for (std::size_t i = 1; i < g.log_likelihood_trace.size(); ++i) {
      CHECK(g.log_likelihood_trace[i] >=
            g.log_likelihood_trace[i - 1] - 1e-9 * std::abs(g.log_likelihood_trace[i - 1]));
    }
    CHECK(g.means[0] <= g.means[1]);
    CHECK(g.variances[0] >= 1e-8);
    CHECK(g.variances[1] >= 1e-8);
    CHECK(std::abs(g.weights[0] + g.weights[1] - 1.0) < 1e-9);
    const double means[2] = {g.means[0], g.means[1]};
    const double vars[2] = {g.variances[0], g.variances[1]};
    const double ws[2] = {g.weights[0], g.weights[1]};
    CHECK(g.log_likelihood ==
          Approx(oracle::MixtureLogLikelihood(x, means, vars, ws)).epsilon(1e-9));
  }
}

TEST_CASE("energy split on four points") {
  const std::vector<double> e = {-12.1, -11.9, -2.2, -1.8};
  const EnergySplit s = SplitByEnergy(e, std::nullopt, {});
  CHECK(s.lower == std::vector<std::size_t>{0, 1});
  CHECK(s.upper == std::vector<std::size_t>{2, 3});
  CHECK_FALSE(s.used_fallback);
}

TEST_CASE("degenerate batches use the threshold rule") {
  const EnergyStats ref{-10.0, 1.0, 100};
  CHECK(ref.Threshold() == -8.0);
  const std::vector<double> flat = {-11.0, -11.0, -11.0};
  const EnergySplit s = SplitByEnergy(flat, ref, {});
  CHECK(s.used_fallback);
  CHECK_FALSE(s.reason.empty());
  CHECK(s.lower.size() == 3u);
  CHECK(s.upper.empty());

  const EnergySplit none = SplitByEnergy(flat, std::nullopt, {});
  CHECK(none.used_fallback);
  CHECK(none.upper.size() == 3u);
}

TEST_CASE("fallback flag controls non-straddling splits") {
  const EnergyStats ref{-10.0, 1.0, 100};
  const std::vector<double> all_known = {-11.0, -10.5, -10.4, -9.9, -9.5, -11.2};
  DiscoveryOptions off;
  const EnergySplit forced = SplitByEnergy(all_known, ref, off);
  CHECK_FALSE(forced.used_fallback);
  CHECK_FALSE(forced.upper.empty());

  DiscoveryOptions on;
  on.fallback_enabled = true;
  const EnergySplit kept = SplitByEnergy(all_known, ref, on);
  CHECK(kept.used_fallback);
  CHECK(kept.upper.empty());
  CHECK(kept.lower.size() == all_known.size());

  const std::vector<double> mixed = {-11.0, -10.5, -10.0, -3.0, -2.5, -2.0};
  const EnergySplit normal = SplitByEnergy(mixed, ref, on);
  CHECK_FALSE(normal.used_fallback);
  CHECK(normal.upper == std::vector<std::size_t>{3, 4, 5});
}

TEST_CASE("well-separated energies give an accurate split") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<double> e;
    std::vector<bool> truth;
    for (int i = 0; i < 64; ++i) {
      const bool unknown = rng.NextUniform() < 0.3;
      e.push_back((unknown ? -4.0 : -10.0) + rng.NextNormal());
      truth.push_back(unknown);
    }
    const EnergySplit s = SplitByEnergy(e, std::nullopt, {});
    std::vector<bool> flagged(e.size(), false);
    for (std::size_t i : s.upper) flagged[i] = true;
    CHECK(oracle::F1(truth, flagged) >= 0.95);
  }
}

Model TinyModel(std::size_t classes) {
  Rng rng(3);
  ModelConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden_dims = {4};
  cfg.feature_dim = 3;
  cfg.num_classes = classes;
  return Model::Create(cfg, rng);
}

TEST_CASE("stage two marks everything unseen on the first batch") {
  Model online = TinyModel(3);
  online.ExpandClassifier(1);
  Rng rng(4);
  Matrix x(10, 3);
  for (double& v : x.values()) v = rng.NextNormal();
  const EnergySplit first = SplitSeenUnseen(x, online, true, std::nullopt, {});
  CHECK(first.lower.empty());
  CHECK(first.upper.size() == 10u);

  const Model no_new = TinyModel(3);
  const EnergySplit later = SplitSeenUnseen(x, no_new, false, std::nullopt, {});
  CHECK(later.upper.size() == 10u);

  const EnergySplit empty = SplitSeenUnseen(Matrix(0, 3), online, false,
                                            std::nullopt, {});
  CHECK(empty.lower.empty());
  CHECK(empty.upper.empty());
}

TEST_CASE("stage one uses the offline head") {
  Model m = TinyModel(2);
  m.SetFrozen(true);
  Rng rng(6);
  Matrix x(12, 3);
  for (double& v : x.values()) v = rng.NextNormal();
  const EnergySplit s = SplitKnownUnknown(x, m, {0.0, 1.0, 1}, {});
  CHECK(s.energies == RowEnergies(m.Forward(x).logits));
  CHECK(s.lower.size() + s.upper.size() == 12u);
  CHECK_THROWS_AS(SplitKnownUnknown(Matrix(0, 3), m, {}, {}), InputError);
}

TEST_CASE("batch partition validation") {
  BatchPartition p{{0, 3}, {1}, {2, 4}};
  CHECK_NOTHROW(p.Validate(5));
  CHECK(p.Novel() == std::vector<std::size_t>{1, 2, 4});
  CHECK_THROWS_AS(p.Validate(6), InvariantError);
  BatchPartition overlap{{0, 1}, {1}, {2}};
  CHECK_THROWS_AS(overlap.Validate(3), InvariantError);
  BatchPartition outside{{0, 1}, {}, {5}};
  CHECK_THROWS_AS(outside.Validate(3), InvariantError);
}

}  // namespace
}  // namespace streamgcd
