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

#ifndef STREAMGCD_LOSSES_H_
#define STREAMGCD_LOSSES_H_

#include <span>
#include <vector>

#include "streamgcd/matrix.h"
#include "streamgcd/model.h"

namespace streamgcd {

struct LossWithGrad {
  double loss = 0.0;
  Matrix grad_logits;  // same shape as the logits
};

// Mean over rows of -log softmax(logits)_label; gradient (softmax - onehot)/n.
// Throws InputError for an out-of-range label.
LossWithGrad CrossEntropyLoss(const Matrix& logits, std::span<const int> labels);

struct EnergyContrastiveOptions {
  // Lower bound on 1 + E_new/E_old inside the log. The clamped region has
  // zero gradient.
  double clamp = 1e-6;
  // |E_old| below this is replaced by ±min_abs_old, keeping the sign.
  double min_abs_old = 1e-12;
};

// Per-sample diagnostics of the energy-contrastive term.
struct EnergyContrastiveTerm {
  double energy_old = 0.0;
  double energy_new = 0.0;
  double value = 0.0;
  bool clamped = false;
};

// Mean over rows of log(1 + E_new / E_old), where E_old and E_new are the
// energies of the old and new logit ranges of each row. Every row is treated
// as a novel sample. Throws InputError when a range or the input is empty.
LossWithGrad EnergyContrastiveLoss(
    const Matrix& logits, IndexRange old_range, IndexRange new_range,
    const EnergyContrastiveOptions& options = {},
    std::vector<EnergyContrastiveTerm>* terms = nullptr);

// Same, starting from backbone features and a classifier head.
LossWithGrad EnergyContrastiveLoss(
    const Matrix& features, const ClassifierHead& head,
    const EnergyContrastiveOptions& options = {},
    std::vector<EnergyContrastiveTerm>* terms = nullptr);

struct LossBreakdown {
  double ce = 0.0;
  double ec = 0.0;
  double total = 0.0;

  static LossBreakdown Of(double ce, double ec) { return {ce, ec, ce + ec}; }
};

}  // namespace streamgcd

#endif  // STREAMGCD_LOSSES_H_
