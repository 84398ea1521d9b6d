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

#ifndef STREAMGCD_MODEL_H_
#define STREAMGCD_MODEL_H_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamgcd/matrix.h"
#include "streamgcd/rng.h"

namespace streamgcd {

// Smooth activations only, so finite-difference checks stay clean.
enum class Activation { kTanh, kSilu };

std::string ToString(Activation a);
Activation ActivationFromString(const std::string& name);

// Half-open index interval [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return end == begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
};

// Low-rank additive update: delta = scale * down · up. `up` starts at zero so
// a freshly attached adapter contributes exactly nothing.
struct LoraAdapter {
  Matrix down;  // d_in × rank
  Matrix up;    // rank × d_out
  double scale = 1.0;

  std::size_t rank() const { return down.cols(); }
  Matrix Delta() const;

  bool operator==(const LoraAdapter&) const = default;
};

struct AffineLayer {
  Matrix weight;  // d_in × d_out
  Matrix bias;    // 1 × d_out
  bool frozen = false;
  std::optional<LoraAdapter> adapter;

  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }

  bool operator==(const AffineLayer&) const = default;
};

// Linear classifier over backbone features. Columns [0, old_count) are the
// base-session classes; the rest were appended during the stream.
struct ClassifierHead {
  Matrix weight;  // d × C
  Matrix bias;    // 1 × C
  std::size_t old_count = 0;
  bool frozen = false;

  std::size_t num_classes() const { return weight.cols(); }
  std::size_t feature_dim() const { return weight.rows(); }
  IndexRange old_range() const { return {0, old_count}; }
  IndexRange new_range() const { return {old_count, num_classes()}; }

  bool operator==(const ClassifierHead&) const = default;
};

struct ModelConfig {
  std::size_t input_dim = 16;
  // Widths of the hidden layers; the backbone has hidden_dims.size() + 1
  // affine layers.
  std::vector<std::size_t> hidden_dims = {64, 64};
  std::size_t feature_dim = 32;
  std::size_t num_classes = 8;
  Activation activation = Activation::kTanh;
};

struct ForwardOutput {
  Matrix features;  // n × d
  Matrix logits;    // n × C
};

// Gradient record keyed by parameter name. Frozen parameters have no entry.
struct Gradients {
  std::map<std::string, Matrix> entries;

  bool contains(const std::string& name) const {
    return entries.count(name) != 0;
  }
  const Matrix& at(const std::string& name) const { return entries.at(name); }
  bool AllFinite() const;
};

struct ParameterRef {
  std::string name;
  Matrix* value;
};

// Backbone f (affine layers, activation after every layer but the last, with
// optional LoRA adapters) followed by the classifier head g.
class Model {
 public:
  Model() = default;
  Model(std::vector<AffineLayer> layers, ClassifierHead head,
        Activation activation);

  // Random initialization: weights N(0, 1/d_in), zero biases.
  static Model Create(const ModelConfig& config, Rng& rng);

  ForwardOutput Forward(const Matrix& x) const;
  Matrix Features(const Matrix& x) const;
  // Head applied to precomputed features.
  Matrix Logits(const Matrix& features) const;

  // Gradients of a loss with respect to every trainable parameter, given the
  // loss gradient on the logits of Forward(x).
  Gradients Backward(const Matrix& x, const Matrix& grad_logits) const;

  std::vector<ParameterRef> TrainableParameters();
  std::vector<std::pair<std::string, const Matrix*>> AllParameters() const;

  void SetBackboneFrozen(bool frozen);
  void SetFrozen(bool frozen);
  bool has_adapters() const;

  // Attaches zero-contribution adapters of `rank` to the listed layers.
  // LoRA scale is alpha / rank; alpha defaults to rank.
  void AttachAdapters(std::span<const std::size_t> layer_indices,
                      std::size_t rank, Rng& rng,
                      std::optional<double> alpha = std::nullopt);
  // The last `count` layers, or every layer when the backbone is shallower.
  std::vector<std::size_t> LastLayers(std::size_t count = 5) const;

  // Appends k_new classes. `init_vectors` (k_new × d) seed the new class
  // vectors after rescaling to the mean norm of the existing ones; without
  // it they start at zero. New biases are zero.
  void ExpandClassifier(std::size_t k_new,
                        const Matrix* init_vectors = nullptr);

  const std::vector<AffineLayer>& layers() const { return layers_; }
  std::vector<AffineLayer>& mutable_layers() { return layers_; }
  const ClassifierHead& head() const { return head_; }
  ClassifierHead& mutable_head() { return head_; }
  Activation activation() const { return activation_; }
  std::size_t input_dim() const { return layers_.front().in_dim(); }
  std::size_t feature_dim() const { return head_.feature_dim(); }
  std::size_t num_classes() const { return head_.num_classes(); }

  bool operator==(const Model&) const = default;

 private:
  struct Trace {
    std::vector<Matrix> inputs;        // input to each layer
    std::vector<Matrix> pre;           // pre-activation of each layer
    std::vector<Matrix> adapter_low;   // input · down, per adapted layer
    Matrix features;
    Matrix logits;
  };

  Trace Run(const Matrix& x) const;
  void CheckInput(const Matrix& x) const;

  std::vector<AffineLayer> layers_;
  ClassifierHead head_;
  Activation activation_ = Activation::kTanh;
};

}  // namespace streamgcd

#endif  // STREAMGCD_MODEL_H_
