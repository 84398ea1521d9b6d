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

#ifndef STREAMGCD_CHECKPOINT_H_
#define STREAMGCD_CHECKPOINT_H_

#include <filesystem>
#include <string>

#include "streamgcd/model.h"

namespace streamgcd {

// Binary checkpoint, little-endian:
//   "SGCDCKPT" u32 version u32 activation u64 n_layers
//   per layer: u8 frozen, matrix weight, matrix bias, u8 has_adapter,
//              [matrix down, matrix up, f64 scale]
//   head: matrix weight, matrix bias, u64 old_count, u8 frozen
// where matrix = u64 rows, u64 cols, rows*cols f64 (IEEE-754 bit patterns).
// Loading a saved model reproduces it bit for bit.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string SerializeModel(const Model& model);
Model DeserializeModel(const std::string& bytes);

void SaveCheckpoint(const Model& model, const std::filesystem::path& path);
Model LoadCheckpoint(const std::filesystem::path& path);

}  // namespace streamgcd

#endif  // STREAMGCD_CHECKPOINT_H_
