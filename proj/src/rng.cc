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

#include "streamgcd/rng.h"

#include <cmath>
#include <numbers>

namespace streamgcd {

// SplitMix64 finalizer.
std::uint64_t Rng::Mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t Rng::NextU64() {
  const std::uint64_t n = counter_++;
  return Mix(key_ ^ Mix(n));
}

double Rng::NextUniform() {
  // 53 random mantissa bits, shifted by half an ulp to exclude 0 and 1.
  return (static_cast<double>(NextU64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::NextNormal() {
  const double u1 = NextUniform();
  const double u2 = NextUniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::NextIndex(std::size_t n) {
  if (n <= 1) return 0;
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = NextU64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

Rng Rng::Fork(std::uint64_t stream) const {
  return Rng(FromKey{}, Mix(key_ + Mix(stream ^ 0xD1B54A32D192ED03ULL)));
}

}  // namespace streamgcd
