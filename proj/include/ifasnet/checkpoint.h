// Copyright 2026 The ifasnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Binary container of named 64-bit tensors. Layout, all integers
// little-endian:
//
//   "IFSN"            4 bytes magic
//   version           u32 (currently 1)
//   count             u32
//   count times:
//     name_len        u32, followed by name_len bytes of UTF-8
//     rank            u32
//     dims            rank x u64
//     payload         prod(dims) x f64 (IEEE-754, little-endian)

#ifndef IFASNET_CHECKPOINT_H_
#define IFASNET_CHECKPOINT_H_

#include <string>
#include <utility>
#include <vector>

#include "ifasnet/tensor.h"

namespace ifasnet {

inline constexpr uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void SaveCheckpoint(const std::string &path, const NamedTensors &tensors);
NamedTensors LoadCheckpoint(const std::string &path);

std::string SerializeTensors(const NamedTensors &tensors);
NamedTensors DeserializeTensors(const std::string &bytes);

}  // namespace ifasnet

#endif  // IFASNET_CHECKPOINT_H_
