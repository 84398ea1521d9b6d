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

#include "streamgcd/labeling.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>

#include "streamgcd/errors.h"
#include "streamgcd/numeric.h"

namespace streamgcd {

std::string ToString(VarianceSource s) {
  switch (s) {
    case VarianceSource::kUnseen:
      return "UNSEEN";
    case VarianceSource::kBatch:
      return "BATCH";
    case VarianceSource::kLabeled:
      return "LABELED";
  }
  return "UNKNOWN";
}

VarianceSource VarianceSourceFromString(const std::string& name) {
  if (name == "UNSEEN") return VarianceSource::kUnseen;
  if (name == "BATCH") return VarianceSource::kBatch;
  if (name == "LABELED") return VarianceSource::kLabeled;
  throw ConfigError("unknown variance source '" + name +
                    "' (expected UNSEEN, BATCH or LABELED)");
}

std::string ToString(SampleSource s) {
  switch (s) {
    case SampleSource::kKnown:
      return "KNOWN";
    case SampleSource::kSeen:
      return "SEEN";
    case SampleSource::kUnseen:
      return "UNSEEN";
  }
  return "UNKNOWN";
}

AugmentedFeatures VfaAugment(const Matrix& unseen_features, std::size_t k,
                             const Rng& rng, VarianceSource source,
                             const VarianceReferences& refs) {
  const std::size_t n = unseen_features.rows();
  const std::size_t d = unseen_features.cols();
  AugmentedFeatures out;
  out.n_original = n;
  out.k = k;
  if (k == 0) {
    out.rows = unseen_features;
    return out;
  }
  if (n == 0) throw InputError("augmentation with K > 0 needs unseen rows");

  auto checked = [&](const std::vector<double>& sigma, const char* what) {
    if (sigma.size() != d) {
      throw ShapeError(std::string(what) + " spread has wrong dimension");
    }
    return sigma;
  };
  switch (source) {
    case VarianceSource::kUnseen:
      if (n >= 2) {
        out.sigma = ColumnStdDevs(unseen_features);
      } else {
        out.fell_back_to_batch = true;
        out.sigma = refs.batch_std.empty() ? std::vector<double>(d, 0.0)
                                           : checked(refs.batch_std, "batch");
      }
      break;
    case VarianceSource::kBatch:
      out.sigma = checked(refs.batch_std, "batch");
      break;
    case VarianceSource::kLabeled:
      out.sigma = checked(refs.labeled_std, "labeled");
      break;
  }

  Matrix augmented(n * k, d);
  for (std::size_t i = 0; i < n; ++i) {
    Rng draws = rng.Fork(i);
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> row =
          SampleGaussian(draws, unseen_features.row(i), out.sigma);
      std::copy(row.begin(), row.end(), augmented.row(i * k + j).begin());
    }
  }
  out.rows = VStack(unseen_features, augmented);
  return out;
}

ApResult AffinityPropagation(const Matrix& points, const ApOptions& options) {
  const std::size_t n = points.rows();
  if (n == 0) throw InputError("affinity propagation on an empty set");
  if (!(options.damping >= 0.5 && options.damping < 1.0)) {
    throw InputError("affinity propagation damping must lie in [0.5, 1)");
  }
  ApResult result;
  if (n == 1) {
    result.exemplars = {0};
    result.assignment = {0};
    result.n_clusters = 1;
    result.converged = true;
    return result;
  }

  Matrix sim(n, n);
  std::vector<double> off_diagonal;
  off_diagonal.reserve(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      if (i == k) continue;
      sim(i, k) = -SquaredDistance(points.row(i), points.row(k));
      off_diagonal.push_back(sim(i, k));
    }
  }
  const auto lo = std::min_element(off_diagonal.begin(), off_diagonal.end());
  if (*lo == 0.0) {
    // Every point is identical: one cluster.
    result.exemplars = {0};
    result.assignment.assign(n, 0);
    result.n_clusters = 1;
    result.converged = true;
    return result;
  }
  double preference;
  if (options.preference) {
    preference = *options.preference;
  } else {
    std::vector<double> tmp = off_diagonal;
    const std::size_t mid = tmp.size() / 2;
    std::nth_element(tmp.begin(), tmp.begin() + mid, tmp.end());
    const double upper = tmp[mid];
    if (tmp.size() % 2 == 1) {
      preference = upper;
    } else {
      const double lower = *std::max_element(tmp.begin(), tmp.begin() + mid);
      preference = 0.5 * (lower + upper);
    }
  }
  for (std::size_t k = 0; k < n; ++k) sim(k, k) = preference;

  // Tiny fixed-seed jitter breaks exact ties between duplicate points.
  Matrix s = sim;
  {
    Rng jitter(0x5eed);
    constexpr double kEps = std::numeric_limits<double>::epsilon();
    constexpr double kTiny = std::numeric_limits<double>::min() * 100.0;
    for (double& v : s.values()) v += (kEps * v + kTiny) * jitter.NextNormal();
  }

  const double lambda = options.damping;
  Matrix resp(n, n);
  Matrix avail(n, n);
  std::vector<char> is_exemplar(n, 0);
  std::vector<char> previous(n, 0);
  int stable = 0;
  int it = 0;
  for (it = 1; it <= options.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      double second = best;
      std::size_t best_k = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const double v = avail(i, k) + s(i, k);
        if (v > best) {
          second = best;
          best = v;
          best_k = k;
        } else if (v > second) {
          second = v;
        }
      }
      for (std::size_t k = 0; k < n; ++k) {
        const double fresh = s(i, k) - (k == best_k ? second : best);
        resp(i, k) = lambda * resp(i, k) + (1.0 - lambda) * fresh;
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      double col = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        col += i == k ? resp(k, k) : std::max(resp(i, k), 0.0);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double own = i == k ? resp(k, k) : std::max(resp(i, k), 0.0);
        double fresh = col - own;
        if (i != k) fresh = std::min(fresh, 0.0);
        avail(i, k) = lambda * avail(i, k) + (1.0 - lambda) * fresh;
      }
    }
    bool any = false;
    for (std::size_t k = 0; k < n; ++k) {
      is_exemplar[k] = resp(k, k) + avail(k, k) > 0.0 ? 1 : 0;
      any = any || is_exemplar[k];
    }
    if (any && is_exemplar == previous) {
      ++stable;
    } else {
      stable = 0;
    }
    previous = is_exemplar;
    if (stable >= options.convergence_window) {
      result.converged = true;
      break;
    }
  }
  result.iterations = std::min(it, options.max_iterations);

  for (std::size_t k = 0; k < n; ++k) {
    if (is_exemplar[k]) result.exemplars.push_back(k);
  }
  if (result.exemplars.empty()) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k) {
      if (resp(k, k) + avail(k, k) > resp(best, best) + avail(best, best)) {
        best = k;
      }
    }
    result.exemplars = {best};
  }
  result.n_clusters = result.exemplars.size();
  result.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (is_exemplar[i] &&
        std::binary_search(result.exemplars.begin(), result.exemplars.end(),
                           i)) {
      result.assignment[i] = i;
      continue;
    }
    std::size_t best = result.exemplars.front();
    for (std::size_t e : result.exemplars) {
      if (sim(i, e) > sim(i, best)) best = e;
    }
    result.assignment[i] = best;
  }
  return result;
}

LabelingResult AssignPseudoLabels(const BatchPartition& partition,
                                  const FeatureBatch& batch,
                                  const Model& offline, const Model& online,
                                  const LabelingOptions& options,
                                  VarianceReferences refs, const Rng& rng) {
  partition.Validate(batch.size());
  const std::size_t n = batch.size();
  LabelingResult out;
  PseudoLabeledBatch& pl = out.batch;
  pl.inputs = batch.features;
  pl.ids = batch.ids;
  pl.labels.assign(n, -1);
  pl.source.assign(n, SampleSource::kKnown);

  if (!partition.known.empty()) {
    const Matrix x = batch.features.SelectRows(partition.known);
    const Matrix logits = offline.Forward(x).logits;
    const IndexRange old = offline.head().old_range();
    for (std::size_t r = 0; r < partition.known.size(); ++r) {
      const std::size_t label =
          old.begin + ArgMax(logits.row(r).subspan(old.begin, old.size()));
      pl.labels[partition.known[r]] = static_cast<int>(label);
      pl.source[partition.known[r]] = SampleSource::kKnown;
    }
  }

  if (!partition.seen.empty()) {
    const IndexRange fresh = online.head().new_range();
    if (fresh.empty()) {
      throw InvariantError("SEEN samples present but the head has no novel "
                           "nodes");
    }
    const Matrix x = batch.features.SelectRows(partition.seen);
    const Matrix logits = online.Forward(x).logits;
    for (std::size_t r = 0; r < partition.seen.size(); ++r) {
      const std::size_t label =
          fresh.begin +
          ArgMax(logits.row(r).subspan(fresh.begin, fresh.size()));
      pl.labels[partition.seen[r]] = static_cast<int>(label);
      pl.source[partition.seen[r]] = SampleSource::kSeen;
    }
  }

  if (!partition.unseen.empty()) {
    if (refs.batch_std.empty()) {
      refs.batch_std = ColumnStdDevs(online.Features(batch.features));
    }
    const Matrix h = online.Features(batch.features.SelectRows(partition.unseen));
    AugmentedFeatures aug =
        VfaAugment(h, options.vfa_k, rng, options.variance_source, refs);
    out.vfa_fell_back = aug.fell_back_to_batch;
    ApResult ap = AffinityPropagation(aug.rows, options.ap);

    std::vector<std::size_t> used;
    for (std::size_t i = 0; i < aug.n_original; ++i) {
      used.push_back(ap.assignment[i]);
    }
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());

    const int first_label = static_cast<int>(online.num_classes());
    std::map<std::size_t, int> label_of;
    out.expansion.n_clusters = used.size();
    out.expansion.exemplar_features = aug.rows.SelectRows(used);
    for (std::size_t j = 0; j < used.size(); ++j) {
      label_of[used[j]] = first_label + static_cast<int>(j);
    }
    for (std::size_t r = 0; r < partition.unseen.size(); ++r) {
      pl.labels[partition.unseen[r]] = label_of.at(ap.assignment[r]);
      pl.source[partition.unseen[r]] = SampleSource::kUnseen;
    }
    out.clustering = std::move(ap);
  }
  return out;
}

}  // namespace streamgcd
