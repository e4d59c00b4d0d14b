// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoints: the resolved run config followed by named float32
// tensors (parameters and normalization buffers).
//
// Layout, little-endian:
//   "MTDACKPT" | u32 version | u64 config bytes | config JSON
//   u64 tensor count | per tensor: u32 name bytes | name | u32 rank |
//   u64 dims[rank] | f32 values

#pragma once

#include <filesystem>
#include <string>

#include "mtda/model.hpp"

namespace mtda {

struct CheckpointData {
  std::string config_json;
  ParamList<float> tensors;
};

/// Writes parameters then buffers in model order.
void save_checkpoint(const std::filesystem::path& path, const std::string& config_json,
                     const DualBranchModel<float>& model);

/// Throws ConfigError for a missing, truncated, or foreign file.
CheckpointData read_checkpoint(const std::filesystem::path& path);

/// Copies every stored tensor into the matching model tensor. Throws
/// ConfigError listing each missing, unexpected, or mis-shaped name.
void load_into(const CheckpointData& data, const DualBranchModel<float>& model);

}  // namespace mtda
