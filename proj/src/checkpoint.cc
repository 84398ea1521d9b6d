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

#include "streamgcd/checkpoint.h"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <utility>
#include <vector>

#include "streamgcd/errors.h"

namespace streamgcd {
namespace {

constexpr char kMagic[8] = {'S', 'G', 'C', 'D', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void U8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) U8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void U64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) U8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }
  void Mat(const Matrix& m) {
    U64(m.rows());
    U64(m.cols());
    for (double v : m.values()) F64(v);
  }
  void Raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string Take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  std::uint8_t U8() {
    Need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t U32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(U8()) << (8 * i);
    return v;
  }
  std::uint64_t U64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(U8()) << (8 * i);
    return v;
  }
  double F64() { return std::bit_cast<double>(U64()); }
  Matrix Mat() {
    const std::uint64_t rows = U64();
    const std::uint64_t cols = U64();
    if (rows > 0 && cols > (in_.size() - pos_) / 8 / rows) {
      throw ParseError("checkpoint matrix size exceeds file length");
    }
    std::vector<double> values(rows * cols);
    for (double& v : values) v = F64();
    return Matrix(rows, cols, std::move(values));
  }
  bool AtEnd() const { return pos_ == in_.size(); }
  void Need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw ParseError("checkpoint truncated");
  }
  std::string Bytes(std::size_t n) {
    Need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string SerializeModel(const Model& model) {
  Writer w;
  w.Raw(kMagic, sizeof(kMagic));
  w.U32(kCheckpointVersion);
  w.U32(static_cast<std::uint32_t>(model.activation()));
  w.U64(model.layers().size());
  for (const AffineLayer& l : model.layers()) {
    w.U8(l.frozen ? 1 : 0);
    w.Mat(l.weight);
    w.Mat(l.bias);
    w.U8(l.adapter ? 1 : 0);
    if (l.adapter) {
      w.Mat(l.adapter->down);
      w.Mat(l.adapter->up);
      w.F64(l.adapter->scale);
    }
  }
  const ClassifierHead& h = model.head();
  w.Mat(h.weight);
  w.Mat(h.bias);
  w.U64(h.old_count);
  w.U8(h.frozen ? 1 : 0);
  return w.Take();
}

Model DeserializeModel(const std::string& bytes) {
  Reader r(bytes);
  if (r.Bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw ParseError("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " +
                     std::to_string(version));
  }
  const std::uint32_t act = r.U32();
  if (act > static_cast<std::uint32_t>(Activation::kSilu)) {
    throw ParseError("unknown activation code in checkpoint");
  }
  const std::uint64_t n_layers = r.U64();
  std::vector<AffineLayer> layers;
  for (std::uint64_t i = 0; i < n_layers; ++i) {
    AffineLayer l;
    l.frozen = r.U8() != 0;
    l.weight = r.Mat();
    l.bias = r.Mat();
    if (r.U8() != 0) {
      LoraAdapter ad;
      ad.down = r.Mat();
      ad.up = r.Mat();
      ad.scale = r.F64();
      l.adapter = std::move(ad);
    }
    layers.push_back(std::move(l));
  }
  ClassifierHead h;
  h.weight = r.Mat();
  h.bias = r.Mat();
  h.old_count = r.U64();
  h.frozen = r.U8() != 0;
  if (!r.AtEnd()) throw ParseError("trailing bytes after checkpoint");
  return Model(std::move(layers), std::move(h), static_cast<Activation>(act));
}

void SaveCheckpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  const std::string bytes = SerializeModel(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

Model LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return DeserializeModel(bytes);
}

}  // namespace streamgcd
