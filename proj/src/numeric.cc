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

#include "streamgcd/numeric.h"

#include <algorithm>
#include <cmath>
#include <iterator>

#include "streamgcd/errors.h"

namespace streamgcd {

double LogSumExp(std::span<const double> v) {
  if (v.empty()) throw DomainError("LogSumExp of an empty sequence");
  double max = v[0];
  for (double x : v) {
    if (!std::isfinite(x)) throw DomainError("LogSumExp input is not finite");
    max = std::max(max, x);
  }
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - max);
  return max + std::log(sum);
}

std::vector<double> Softmax(std::span<const double> v) {
  const double lse = LogSumExp(v);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::exp(v[i] - lse);
  return out;
}

std::vector<double> SampleGaussian(Rng& rng, std::span<const double> mean,
                                   std::span<const double> std_dev) {
  if (mean.size() != std_dev.size()) {
    throw DomainError("SampleGaussian mean/std length mismatch");
  }
  std::vector<double> out(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (!(std_dev[i] >= 0.0)) {
      throw DomainError("SampleGaussian standard deviation must be >= 0");
    }
    // Draw even when std is zero so the stream position does not depend on
    // the data.
    const double z = rng.NextNormal();
    out[i] = std_dev[i] == 0.0 ? mean[i] : mean[i] + std_dev[i] * z;
  }
  return out;
}

std::size_t ArgMax(std::span<const double> v) {
  if (v.empty()) throw DomainError("ArgMax of an empty sequence");
  return static_cast<std::size_t>(
      std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

double Mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

double StdDev(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = Mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace streamgcd
