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

#include "streamgcd/discovery.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "streamgcd/errors.h"
#include "streamgcd/numeric.h"

namespace streamgcd {
namespace {

double MedianOfSorted(std::span<const double> sorted) {
  const std::size_t n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

double Variance(std::span<const double> v) {
  const double s = StdDev(v);
  return s * s;
}

// Fills `resp` with component-1 responsibilities and returns the total
// log-likelihood under the given parameters.
double ExpectationStep(std::span<const double> x, const GmmSplit& g,
                       std::vector<double>& resp) {
  double ll = 0.0;
  resp.resize(x.size());
  std::array<double, 2> log_norm{};
  for (int k = 0; k < 2; ++k) {
    log_norm[k] = std::log(g.weights[k]) -
                  0.5 * std::log(2.0 * std::numbers::pi * g.variances[k]);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::array<double, 2> lp{};
    for (int k = 0; k < 2; ++k) {
      const double d = x[i] - g.means[k];
      lp[k] = log_norm[k] - 0.5 * d * d / g.variances[k];
    }
    const double lse = LogSumExp(lp);
    resp[i] = std::exp(lp[1] - lse);
    ll += lse;
  }
  return ll;
}

void MaximizationStep(std::span<const double> x,
                      const std::vector<double>& resp, double variance_floor,
                      GmmSplit& g) {
  std::array<double, 2> mass{};
  std::array<double, 2> sum{};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r1 = resp[i];
    const double r0 = 1.0 - r1;
    mass[0] += r0;
    mass[1] += r1;
    sum[0] += r0 * x[i];
    sum[1] += r1 * x[i];
  }
  const double n = static_cast<double>(x.size());
  for (int k = 0; k < 2; ++k) {
    // A component that lost all its mass keeps its previous location.
    if (mass[k] < 1e-12) continue;
    const double mean = sum[k] / mass[k];
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = k == 1 ? resp[i] : 1.0 - resp[i];
      sq += r * (x[i] - mean) * (x[i] - mean);
    }
    g.means[k] = mean;
    g.variances[k] = std::max(sq / mass[k], variance_floor);
  }
  constexpr double kMinWeight = 1e-12;
  g.weights[0] = std::clamp(mass[0] / n, kMinWeight, 1.0 - kMinWeight);
  g.weights[1] = 1.0 - g.weights[0];
}

}  // namespace

double Energy(std::span<const double> logits) { return -LogSumExp(logits); }

std::vector<double> RowEnergies(const Matrix& logits) {
  return RowEnergies(logits, {0, logits.cols()});
}

std::vector<double> RowEnergies(const Matrix& logits, IndexRange columns) {
  if (columns.end > logits.cols() || columns.empty()) {
    throw DomainError("energy column range is empty or out of bounds");
  }
  std::vector<double> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    out[r] = Energy(logits.row(r).subspan(columns.begin, columns.size()));
  }
  return out;
}

GmmSplit FitGmm1d(std::span<const double> scores, const GmmOptions& options) {
  if (scores.size() < 2) {
    throw InputError("mixture fit needs at least two scores");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw DomainError("mixture input is not finite");
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) {
    throw DegenerateInputError("all scores are identical");
  }

  const std::size_t half = sorted.size() / 2;
  std::span<const double> lower(sorted.data(), half);
  std::span<const double> upper(sorted.data() + half, sorted.size() - half);

  GmmSplit g;
  g.means = {MedianOfSorted(lower), MedianOfSorted(upper)};
  g.variances = {std::max(Variance(lower), options.variance_floor),
                 std::max(Variance(upper), options.variance_floor)};
  g.weights = {0.5, 0.5};

  std::vector<double> resp;
  double ll = ExpectationStep(scores, g, resp);
  g.log_likelihood_trace.push_back(ll);
  for (int it = 1; it <= options.max_iterations; ++it) {
    MaximizationStep(scores, resp, options.variance_floor, g);
    const double next = ExpectationStep(scores, g, resp);
    g.log_likelihood_trace.push_back(next);
    g.iterations = it;
    const bool done = std::abs(next - ll) < options.tolerance;
    ll = next;
    if (done) break;
  }
  g.log_likelihood = ll;

  if (g.means[0] > g.means[1]) {
    std::swap(g.means[0], g.means[1]);
    std::swap(g.variances[0], g.variances[1]);
    std::swap(g.weights[0], g.weights[1]);
    for (double& r : resp) r = 1.0 - r;
  }
  g.assignments.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] <= g.means[0]) {
      g.assignments[i] = 0;
    } else if (scores[i] >= g.means[1]) {
      g.assignments[i] = 1;
    } else {
      g.assignments[i] = resp[i] > 0.5 ? 1 : 0;
    }
  }
  return g;
}

EnergyStats EnergyStats::From(std::span<const double> energies) {
  return {Mean(energies), StdDev(energies), energies.size()};
}

EnergySplit SplitByEnergy(std::span<const double> energies,
                          const std::optional<EnergyStats>& reference,
                          const DiscoveryOptions& options) {
  EnergySplit out;
  out.energies.assign(energies.begin(), energies.end());
  if (energies.empty()) return out;

  auto by_threshold = [&](std::string reason) {
    out.used_fallback = true;
    out.reason = std::move(reason);
    out.lower.clear();
    out.upper.clear();
    if (!reference) {
      // Nothing to compare against: everything is unfamiliar.
      for (std::size_t i = 0; i < energies.size(); ++i) out.upper.push_back(i);
      return;
    }
    const double t = reference->Threshold();
    for (std::size_t i = 0; i < energies.size(); ++i) {
      (energies[i] > t ? out.upper : out.lower).push_back(i);
    }
  };

  try {
    out.gmm = FitGmm1d(energies, options.gmm);
  } catch (const InputError& e) {
    by_threshold(e.what());
    return out;
  }
  if (options.fallback_enabled && reference) {
    const double t = reference->Threshold();
    if (!(out.gmm->means[0] <= t && t < out.gmm->means[1])) {
      by_threshold("mixture means do not straddle the reference threshold");
      return out;
    }
  }
  for (std::size_t i = 0; i < energies.size(); ++i) {
    (out.gmm->assignments[i] == 0 ? out.lower : out.upper).push_back(i);
  }
  return out;
}

EnergySplit SplitKnownUnknown(const Matrix& inputs, const Model& offline,
                              const EnergyStats& calibration,
                              const DiscoveryOptions& options) {
  if (inputs.rows() == 0) throw InputError("cannot split an empty batch");
  const Matrix logits = offline.Forward(inputs).logits;
  return SplitByEnergy(RowEnergies(logits), calibration, options);
}

EnergySplit SplitSeenUnseen(const Matrix& unknown_inputs, const Model& online,
                            bool is_first_batch,
                            const std::optional<EnergyStats>& seen_stats,
                            const DiscoveryOptions& options) {
  EnergySplit out;
  if (unknown_inputs.rows() == 0) return out;
  const bool has_new_nodes = !online.head().new_range().empty();
  if (is_first_batch || !has_new_nodes) {
    for (std::size_t i = 0; i < unknown_inputs.rows(); ++i) {
      out.upper.push_back(i);
    }
    out.energies = RowEnergies(online.Forward(unknown_inputs).logits);
    return out;
  }
  const Matrix logits = online.Forward(unknown_inputs).logits;
  return SplitByEnergy(RowEnergies(logits), seen_stats, options);
}

void BatchPartition::Validate(std::size_t batch_size) const {
  std::vector<int> hits(batch_size, 0);
  for (const auto* part : {&known, &seen, &unseen}) {
    for (std::size_t i : *part) {
      if (i >= batch_size) {
        throw InvariantError("partition index out of range");
      }
      ++hits[i];
    }
  }
  for (int h : hits) {
    if (h != 1) {
      throw InvariantError("partition does not cover the batch exactly once");
    }
  }
}

std::vector<std::size_t> BatchPartition::Novel() const {
  std::vector<std::size_t> out = seen;
  out.insert(out.end(), unseen.begin(), unseen.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace streamgcd
