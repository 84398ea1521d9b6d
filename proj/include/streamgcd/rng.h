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

#ifndef STREAMGCD_RNG_H_
#define STREAMGCD_RNG_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace streamgcd {

// Counter-based generator. The n-th draw is a pure function of (key, n), so
// two generators built from the same seed produce the same stream on every
// platform, and Fork() derives independent child streams without consuming
// draws from the parent. Used instead of <random> distributions because their
// output is not specified across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(Mix(seed)) {}

  std::uint64_t NextU64();
  // Uniform on the open interval (0, 1).
  double NextUniform();
  double NextNormal();
  // Uniform integer in [0, n).
  std::size_t NextIndex(std::size_t n);

  // Child generator keyed by (this key, stream). Does not advance this one.
  Rng Fork(std::uint64_t stream) const;

  template <typename T>
  void Shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = NextIndex(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t counter() const { return counter_; }

 private:
  struct FromKey {};
  Rng(FromKey, std::uint64_t key) : key_(key) {}

  static std::uint64_t Mix(std::uint64_t x);

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace streamgcd

#endif  // STREAMGCD_RNG_H_
