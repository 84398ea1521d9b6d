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

#include "streamgcd/losses.h"

#include <cmath>
#include <string>

#include "streamgcd/errors.h"
#include "streamgcd/numeric.h"

namespace streamgcd {

LossWithGrad CrossEntropyLoss(const Matrix& logits,
                              std::span<const int> labels) {
  if (labels.size() != logits.rows()) {
    throw ShapeError("cross-entropy label count does not match logit rows");
  }
  if (logits.rows() == 0) throw InputError("cross-entropy on an empty batch");
  const double n = static_cast<double>(logits.rows());
  LossWithGrad out{0.0, Matrix(logits.rows(), logits.cols())};
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols()) {
      throw InputError("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(logits.cols()) + ")");
    }
    const double lse = LogSumExp(logits.row(r));
    out.loss += lse - logits(r, static_cast<std::size_t>(y));
    auto g = out.grad_logits.row(r);
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      g[c] = std::exp(logits(r, c) - lse) / n;
    }
    g[static_cast<std::size_t>(y)] -= 1.0 / n;
  }
  out.loss /= n;
  return out;
}

LossWithGrad EnergyContrastiveLoss(const Matrix& logits, IndexRange old_range,
                                   IndexRange new_range,
                                   const EnergyContrastiveOptions& options,
                                   std::vector<EnergyContrastiveTerm>* terms) {
  if (logits.rows() == 0) {
    throw InputError("energy-contrastive loss needs at least one novel sample");
  }
  if (old_range.empty() || new_range.empty() ||
      old_range.end > logits.cols() || new_range.end > logits.cols()) {
    throw InputError("energy-contrastive loss needs non-empty old and new "
                     "node ranges");
  }
  const double n = static_cast<double>(logits.rows());
  LossWithGrad out{0.0, Matrix(logits.rows(), logits.cols())};
  if (terms) terms->clear();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    auto old_logits = row.subspan(old_range.begin, old_range.size());
    auto new_logits = row.subspan(new_range.begin, new_range.size());
    const double lse_old = LogSumExp(old_logits);
    const double lse_new = LogSumExp(new_logits);
    double e_old = -lse_old;
    const double e_new = -lse_new;
    if (std::abs(e_old) < options.min_abs_old) {
      e_old = e_old < 0.0 ? -options.min_abs_old : options.min_abs_old;
    }
    const double u = 1.0 + e_new / e_old;
    EnergyContrastiveTerm term{e_old, e_new, 0.0, false};
    if (u < options.clamp) {
      term.value = std::log(options.clamp);
      term.clamped = true;
    } else {
      term.value = std::log(u);
      // d/dE_new and d/dE_old of log(1 + E_new/E_old); dE/dz = -softmax.
      const double d_new = 1.0 / (u * e_old) / n;
      const double d_old = -e_new / (e_old * e_old * u) / n;
      auto g = out.grad_logits.row(r);
      for (std::size_t j = 0; j < old_logits.size(); ++j) {
        g[old_range.begin + j] -=
            d_old * std::exp(old_logits[j] - lse_old);
      }
      for (std::size_t j = 0; j < new_logits.size(); ++j) {
        g[new_range.begin + j] -=
            d_new * std::exp(new_logits[j] - lse_new);
      }
    }
    out.loss += term.value;
    if (terms) terms->push_back(term);
  }
  out.loss /= n;
  return out;
}

LossWithGrad EnergyContrastiveLoss(const Matrix& features,
                                   const ClassifierHead& head,
                                   const EnergyContrastiveOptions& options,
                                   std::vector<EnergyContrastiveTerm>* terms) {
  Matrix logits = MatMul(features, head.weight);
  AddRowBroadcast(logits, head.bias);
  return EnergyContrastiveLoss(logits, head.old_range(), head.new_range(),
                               options, terms);
}

}  // namespace streamgcd
