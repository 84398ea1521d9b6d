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

#include "streamgcd/optimizer.h"

#include <cmath>

#include "streamgcd/errors.h"

namespace streamgcd {

void AdamW::Step(std::span<const ParameterRef> params, const Gradients& grads) {
  for (const ParameterRef& p : params) {
    if (!grads.contains(p.name)) continue;
    const Matrix& g = grads.at(p.name);
    if (!g.SameShape(*p.value)) {
      throw ShapeError("gradient shape mismatch for " + p.name);
    }
    if (!g.AllFinite()) {
      throw TrainingError("non-finite gradient for " + p.name +
                          "; step rejected");
    }
  }

  const AdamWOptions& o = options_;
  for (const ParameterRef& p : params) {
    if (!grads.contains(p.name)) continue;
    const Matrix& g = grads.at(p.name);
    Slot& slot = slots_[p.name];
    if (!slot.first.SameShape(*p.value)) {
      slot.first = Matrix(p.value->rows(), p.value->cols());
      slot.second = Matrix(p.value->rows(), p.value->cols());
      slot.step = 0;
    }
    ++slot.step;
    const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(slot.step));
    const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(slot.step));
    auto w = p.value->values();
    auto m = slot.first.values();
    auto v = slot.second.values();
    auto gv = g.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] *= 1.0 - o.learning_rate * o.weight_decay;
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * gv[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * gv[i] * gv[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
  ++steps_;
}

std::int64_t AdamW::parameter_steps(const std::string& name) const {
  auto it = slots_.find(name);
  return it == slots_.end() ? 0 : it->second.step;
}

}  // namespace streamgcd
