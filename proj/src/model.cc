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

#include "streamgcd/model.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>

#include "streamgcd/errors.h"

namespace streamgcd {
namespace {

double Activate(Activation a, double z) {
  switch (a) {
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kSilu:
      return z / (1.0 + std::exp(-z));
  }
  return z;
}

double ActivateDerivative(Activation a, double z) {
  switch (a) {
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::kSilu: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 + z * (1.0 - s));
    }
  }
  return 1.0;
}

Matrix RandomNormal(std::size_t rows, std::size_t cols, double stddev,
                    Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = stddev * rng.NextNormal();
  return m;
}

std::string LayerName(std::size_t i, const char* what) {
  return "layer" + std::to_string(i) + "." + what;
}

double RowNorm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

std::string ToString(Activation a) {
  switch (a) {
    case Activation::kTanh:
      return "tanh";
    case Activation::kSilu:
      return "silu";
  }
  return "unknown";
}

Activation ActivationFromString(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "silu") return Activation::kSilu;
  throw ConfigError("unknown activation '" + name + "'");
}

Matrix LoraAdapter::Delta() const {
  Matrix delta = MatMul(down, up);
  for (double& v : delta.values()) v *= scale;
  return delta;
}

bool Gradients::AllFinite() const {
  return std::all_of(entries.begin(), entries.end(),
                     [](const auto& kv) { return kv.second.AllFinite(); });
}

Model::Model(std::vector<AffineLayer> layers, ClassifierHead head,
             Activation activation)
    : layers_(std::move(layers)), head_(std::move(head)),
      activation_(activation) {
  if (layers_.empty()) throw ConfigError("backbone needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const AffineLayer& l = layers_[i];
    if (l.bias.rows() != 1 || l.bias.cols() != l.out_dim()) {
      throw ShapeError("layer " + std::to_string(i) + " bias shape mismatch");
    }
    if (i > 0 && layers_[i - 1].out_dim() != l.in_dim()) {
      throw ShapeError("layer " + std::to_string(i) +
                       " input does not chain with previous output");
    }
    if (l.adapter && (l.adapter->down.rows() != l.in_dim() ||
                      l.adapter->up.cols() != l.out_dim() ||
                      l.adapter->down.cols() != l.adapter->up.rows())) {
      throw ShapeError("layer " + std::to_string(i) + " adapter shape mismatch");
    }
  }
  if (head_.feature_dim() != layers_.back().out_dim()) {
    throw ShapeError("classifier input does not match backbone output");
  }
  if (head_.bias.rows() != 1 || head_.bias.cols() != head_.num_classes()) {
    throw ShapeError("classifier bias shape mismatch");
  }
  if (head_.old_count > head_.num_classes()) {
    throw ShapeError("classifier old range exceeds class count");
  }
}

Model Model::Create(const ModelConfig& config, Rng& rng) {
  if (config.input_dim == 0 || config.feature_dim == 0 ||
      config.num_classes == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  std::vector<std::size_t> dims = {config.input_dim};
  dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
  dims.push_back(config.feature_dim);

  std::vector<AffineLayer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    if (dims[i + 1] == 0) throw ConfigError("layer width must be positive");
    AffineLayer layer;
    layer.weight = RandomNormal(dims[i], dims[i + 1],
                                1.0 / std::sqrt(static_cast<double>(dims[i])),
                                rng);
    layer.bias = Matrix(1, dims[i + 1]);
    layers.push_back(std::move(layer));
  }
  ClassifierHead head;
  head.weight = RandomNormal(
      config.feature_dim, config.num_classes,
      1.0 / std::sqrt(static_cast<double>(config.feature_dim)), rng);
  head.bias = Matrix(1, config.num_classes);
  head.old_count = config.num_classes;
  return Model(std::move(layers), std::move(head), config.activation);
}

void Model::CheckInput(const Matrix& x) const {
  if (x.cols() != input_dim()) {
    throw ShapeError("input has " + std::to_string(x.cols()) +
                     " columns, backbone expects " +
                     std::to_string(input_dim()));
  }
}

Model::Trace Model::Run(const Matrix& x) const {
  CheckInput(x);
  Trace t;
  t.inputs.reserve(layers_.size());
  t.pre.reserve(layers_.size());
  t.adapter_low.resize(layers_.size());
  Matrix a = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const AffineLayer& layer = layers_[i];
    Matrix z = MatMul(a, layer.weight);
    AddRowBroadcast(z, layer.bias);
    if (layer.adapter) {
      Matrix low = MatMul(a, layer.adapter->down);
      AddScaled(z, MatMul(low, layer.adapter->up), layer.adapter->scale);
      t.adapter_low[i] = std::move(low);
    }
    t.inputs.push_back(std::move(a));
    Matrix out = z;
    if (i + 1 < layers_.size()) {
      for (double& v : out.values()) v = Activate(activation_, v);
    }
    t.pre.push_back(std::move(z));
    a = std::move(out);
  }
  t.features = std::move(a);
  t.logits = Logits(t.features);
  return t;
}

ForwardOutput Model::Forward(const Matrix& x) const {
  Trace t = Run(x);
  return {std::move(t.features), std::move(t.logits)};
}

Matrix Model::Features(const Matrix& x) const { return Run(x).features; }

Matrix Model::Logits(const Matrix& features) const {
  if (features.cols() != head_.feature_dim()) {
    throw ShapeError("feature width does not match classifier input");
  }
  Matrix logits = MatMul(features, head_.weight);
  AddRowBroadcast(logits, head_.bias);
  return logits;
}

Gradients Model::Backward(const Matrix& x, const Matrix& grad_logits) const {
  if (grad_logits.rows() != x.rows() ||
      grad_logits.cols() != num_classes()) {
    throw ShapeError("logit gradient must be " + std::to_string(x.rows()) +
                     "x" + std::to_string(num_classes()));
  }
  const Trace t = Run(x);
  Gradients grads;
  if (!head_.frozen) {
    grads.entries["head.weight"] = MatMulTransA(t.features, grad_logits);
    grads.entries["head.bias"] = ColumnSums(grad_logits);
  }

  // Earliest layer that owns a trainable parameter; below it there is
  // nothing left to propagate into.
  std::size_t lowest = layers_.size();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (!layers_[i].frozen || layers_[i].adapter) {
      lowest = i;
      break;
    }
  }
  if (lowest == layers_.size()) return grads;

  Matrix upstream = MatMulTransB(grad_logits, head_.weight);
  for (std::size_t i = layers_.size(); i-- > lowest;) {
    const AffineLayer& layer = layers_[i];
    Matrix dz = std::move(upstream);
    if (i + 1 < layers_.size()) {
      auto pre = t.pre[i].values();
      auto g = dz.values();
      for (std::size_t k = 0; k < g.size(); ++k) {
        g[k] *= ActivateDerivative(activation_, pre[k]);
      }
    }
    const Matrix& input = t.inputs[i];
    if (!layer.frozen) {
      grads.entries[LayerName(i, "weight")] = MatMulTransA(input, dz);
      grads.entries[LayerName(i, "bias")] = ColumnSums(dz);
    }
    Matrix dz_up;  // dz · upᵀ, shared by the adapter and input gradients
    if (layer.adapter) {
      const LoraAdapter& ad = *layer.adapter;
      dz_up = MatMulTransB(dz, ad.up);
      Matrix d_up = MatMulTransA(t.adapter_low[i], dz);
      for (double& v : d_up.values()) v *= ad.scale;
      Matrix d_down = MatMulTransA(input, dz_up);
      for (double& v : d_down.values()) v *= ad.scale;
      grads.entries[LayerName(i, "lora_down")] = std::move(d_down);
      grads.entries[LayerName(i, "lora_up")] = std::move(d_up);
    }
    if (i > lowest) {
      upstream = MatMulTransB(dz, layer.weight);
      if (layer.adapter) {
        AddScaled(upstream, MatMulTransB(dz_up, layer.adapter->down),
                  layer.adapter->scale);
      }
    }
  }
  return grads;
}

std::vector<ParameterRef> Model::TrainableParameters() {
  std::vector<ParameterRef> params;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    AffineLayer& l = layers_[i];
    if (!l.frozen) {
      params.push_back({LayerName(i, "weight"), &l.weight});
      params.push_back({LayerName(i, "bias"), &l.bias});
    }
    if (l.adapter) {
      params.push_back({LayerName(i, "lora_down"), &l.adapter->down});
      params.push_back({LayerName(i, "lora_up"), &l.adapter->up});
    }
  }
  if (!head_.frozen) {
    params.push_back({"head.weight", &head_.weight});
    params.push_back({"head.bias", &head_.bias});
  }
  return params;
}

std::vector<std::pair<std::string, const Matrix*>> Model::AllParameters()
    const {
  std::vector<std::pair<std::string, const Matrix*>> params;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const AffineLayer& l = layers_[i];
    params.emplace_back(LayerName(i, "weight"), &l.weight);
    params.emplace_back(LayerName(i, "bias"), &l.bias);
    if (l.adapter) {
      params.emplace_back(LayerName(i, "lora_down"), &l.adapter->down);
      params.emplace_back(LayerName(i, "lora_up"), &l.adapter->up);
    }
  }
  params.emplace_back("head.weight", &head_.weight);
  params.emplace_back("head.bias", &head_.bias);
  return params;
}

void Model::SetBackboneFrozen(bool frozen) {
  for (AffineLayer& l : layers_) l.frozen = frozen;
}

void Model::SetFrozen(bool frozen) {
  SetBackboneFrozen(frozen);
  head_.frozen = frozen;
}

bool Model::has_adapters() const {
  return std::any_of(layers_.begin(), layers_.end(),
                     [](const AffineLayer& l) { return l.adapter.has_value(); });
}

void Model::AttachAdapters(std::span<const std::size_t> layer_indices,
                           std::size_t rank, Rng& rng,
                           std::optional<double> alpha) {
  if (rank == 0) throw ConfigError("adapter rank must be positive");
  std::set<std::size_t> seen;
  for (std::size_t idx : layer_indices) {
    if (idx >= layers_.size()) {
      throw ConfigError("adapter layer index " + std::to_string(idx) +
                        " beyond backbone depth " +
                        std::to_string(layers_.size()));
    }
    if (!seen.insert(idx).second || layers_[idx].adapter) {
      throw ConfigError("adapter already attached to layer " +
                        std::to_string(idx));
    }
  }
  const double scale = alpha.value_or(static_cast<double>(rank)) /
                       static_cast<double>(rank);
  for (std::size_t idx : layer_indices) {
    AffineLayer& l = layers_[idx];
    LoraAdapter ad;
    ad.down = RandomNormal(l.in_dim(), rank,
                           1.0 / std::sqrt(static_cast<double>(l.in_dim())),
                           rng);
    ad.up = Matrix(rank, l.out_dim());
    ad.scale = scale;
    l.adapter = std::move(ad);
  }
}

std::vector<std::size_t> Model::LastLayers(std::size_t count) const {
  const std::size_t depth = layers_.size();
  const std::size_t first = depth > count ? depth - count : 0;
  std::vector<std::size_t> out;
  for (std::size_t i = first; i < depth; ++i) out.push_back(i);
  return out;
}

void Model::ExpandClassifier(std::size_t k_new, const Matrix* init_vectors) {
  if (k_new == 0) throw InputError("classifier expansion needs k_new >= 1");
  const std::size_t d = head_.feature_dim();
  const std::size_t c = head_.num_classes();
  if (init_vectors &&
      (init_vectors->rows() != k_new || init_vectors->cols() != d)) {
    throw ShapeError("expansion init vectors must be " +
                     std::to_string(k_new) + "x" + std::to_string(d));
  }
  double target_norm = 0.0;
  if (init_vectors && c > 0) {
    const Matrix cols = Transpose(head_.weight);
    for (std::size_t j = 0; j < c; ++j) target_norm += RowNorm(cols.row(j));
    target_norm /= static_cast<double>(c);
  }
  Matrix weight(d, c + k_new);
  Matrix bias(1, c + k_new);
  for (std::size_t r = 0; r < d; ++r) {
    std::copy_n(head_.weight.row(r).begin(), c, weight.row(r).begin());
  }
  std::copy_n(head_.bias.row(0).begin(), c, bias.row(0).begin());
  if (init_vectors) {
    for (std::size_t k = 0; k < k_new; ++k) {
      const double norm = RowNorm(init_vectors->row(k));
      const double s = norm > 0.0 ? target_norm / norm : 0.0;
      for (std::size_t r = 0; r < d; ++r) {
        weight(r, c + k) = s * (*init_vectors)(k, r);
      }
    }
  }
  head_.weight = std::move(weight);
  head_.bias = std::move(bias);
}

}  // namespace streamgcd
