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

#ifndef STREAMGCD_OPTIMIZER_H_
#define STREAMGCD_OPTIMIZER_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "streamgcd/matrix.h"
#include "streamgcd/model.h"

namespace streamgcd {

struct AdamWOptions {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with decoupled weight decay. Moments are tracked per parameter name;
// when a parameter changes shape (classifier expansion) its state restarts.
class AdamW {
 public:
  explicit AdamW(AdamWOptions options = {}) : options_(options) {}

  // Updates every parameter that has a gradient entry. Throws TrainingError
  // without touching any state if a gradient is non-finite.
  void Step(std::span<const ParameterRef> params, const Gradients& grads);

  const AdamWOptions& options() const { return options_; }
  std::int64_t steps() const { return steps_; }
  // Per-parameter step count, 0 if unseen.
  std::int64_t parameter_steps(const std::string& name) const;

 private:
  struct Slot {
    Matrix first;
    Matrix second;
    std::int64_t step = 0;
  };

  AdamWOptions options_;
  std::map<std::string, Slot> slots_;
  std::int64_t steps_ = 0;
};

}  // namespace streamgcd

#endif  // STREAMGCD_OPTIMIZER_H_
