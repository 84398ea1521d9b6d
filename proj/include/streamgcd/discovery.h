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

// Energy-guided discovery: per-sample energy scores and the two-stage split
// of an unlabeled batch into KNOWN, SEEN and UNSEEN samples.

#ifndef STREAMGCD_DISCOVERY_H_
#define STREAMGCD_DISCOVERY_H_

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamgcd/matrix.h"
#include "streamgcd/model.h"

namespace streamgcd {

// E = -log Σ exp(logit_j). Lower means more confidently recognized.
double Energy(std::span<const double> logits);
// Energy of every row, optionally restricted to a column range.
std::vector<double> RowEnergies(const Matrix& logits);
std::vector<double> RowEnergies(const Matrix& logits, IndexRange columns);

struct GmmOptions {
  double tolerance = 1e-6;
  int max_iterations = 100;
  double variance_floor = 1e-8;
};

// Two-component 1-D Gaussian mixture. Component 0 has the lower mean.
struct GmmSplit {
  std::array<double, 2> means{};
  std::array<double, 2> variances{};
  std::array<double, 2> weights{};
  std::vector<int> assignments;
  double log_likelihood = 0.0;
  int iterations = 0;
  // Log-likelihood after initialization and after every EM iteration.
  std::vector<double> log_likelihood_trace;
};

// EM from a deterministic median-split initialization. Hard assignments take
// the larger responsibility, except that scores at or beyond a component
// mean on its outer side always go to that component.
//
// Throws InputError for fewer than two scores and DegenerateInputError when
// all scores are identical.
GmmSplit FitGmm1d(std::span<const double> scores, const GmmOptions& options = {});

// Mean/std of a reference energy population. Scores above
// mean + 2·std are treated as belonging to the upper (unfamiliar) group when
// the mixture split is unavailable or rejected.
struct EnergyStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;

  double Threshold() const { return mean + 2.0 * std; }
  static EnergyStats From(std::span<const double> energies);
};

struct DiscoveryOptions {
  // When set, a mixture split whose component means do not straddle the
  // reference threshold is replaced by the threshold rule. Degenerate inputs
  // always use the threshold rule.
  bool fallback_enabled = false;
  GmmOptions gmm;
};

// Result of one energy split. Indices refer to rows of the input.
struct EnergySplit {
  std::vector<std::size_t> lower;  // familiar: KNOWN (stage 1) / SEEN (stage 2)
  std::vector<std::size_t> upper;  // unfamiliar: unknown / UNSEEN
  std::vector<double> energies;
  std::optional<GmmSplit> gmm;
  bool used_fallback = false;
  std::string reason;  // why the fallback fired, empty otherwise
};

EnergySplit SplitByEnergy(std::span<const double> energies,
                          const std::optional<EnergyStats>& reference,
                          const DiscoveryOptions& options);

// Stage 1: offline-model energies; lower component is KNOWN.
EnergySplit SplitKnownUnknown(const Matrix& inputs, const Model& offline,
                              const EnergyStats& calibration,
                              const DiscoveryOptions& options);

// Stage 2: full online-head energies; lower component is SEEN. On the first
// incremental batch, or before any novel node exists, everything is UNSEEN.
EnergySplit SplitSeenUnseen(const Matrix& unknown_inputs, const Model& online,
                            bool is_first_batch,
                            const std::optional<EnergyStats>& seen_stats,
                            const DiscoveryOptions& options);

struct BatchPartition {
  std::vector<std::size_t> known;
  std::vector<std::size_t> seen;
  std::vector<std::size_t> unseen;

  // Throws InvariantError unless the three sets are disjoint and cover
  // [0, batch_size).
  void Validate(std::size_t batch_size) const;
  std::vector<std::size_t> Novel() const;  // seen ∪ unseen, ascending
};

}  // namespace streamgcd

#endif  // STREAMGCD_DISCOVERY_H_
