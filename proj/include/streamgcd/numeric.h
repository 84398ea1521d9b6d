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

#ifndef STREAMGCD_NUMERIC_H_
#define STREAMGCD_NUMERIC_H_

#include <span>
#include <vector>

#include "streamgcd/rng.h"

namespace streamgcd {

// log Σ exp(v_j), evaluated with max-subtraction. Throws DomainError on an
// empty or non-finite input.
double LogSumExp(std::span<const double> v);

// exp(v_j - LogSumExp(v)).
std::vector<double> Softmax(std::span<const double> v);

// Element-wise independent N(mean_i, std_i²) draws. A zero std returns the
// mean exactly.
std::vector<double> SampleGaussian(Rng& rng, std::span<const double> mean,
                                   std::span<const double> std_dev);

// Index of the first maximum.
std::size_t ArgMax(std::span<const double> v);

double Mean(std::span<const double> v);
// Population standard deviation.
double StdDev(std::span<const double> v);

}  // namespace streamgcd

#endif  // STREAMGCD_NUMERIC_H_
