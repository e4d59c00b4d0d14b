// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: a nested JSON document with model, data, train, and
// eval sections. Every field has a default; unknown keys are rejected with
// their dotted path.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mtda/data.hpp"
#include "mtda/model.hpp"
#include "mtda/train.hpp"

namespace mtda {

struct RunConfig {
  std::uint64_t seed = 7;  // model initialization and training randomness
  ModelConfig model;       // grid and class counts are taken from `data`
  DataConfig data;
  TrainConfig train;
  EvalConfig eval;

  /// Model geometry with input grid and class counts filled in from `data`.
  ModelConfig model_config() const;
  TrainConfig train_config() const;
  EvalConfig eval_config() const;
  /// Throws ConfigError on any inconsistency.
  void validate() const;
};

/// Pretty-printed JSON with every field, in a stable key order.
std::string to_json_string(const RunConfig& config);

/// Parses a (possibly partial) document on top of the defaults.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies `key=value` with a dotted key such as `train.epochs`. The value
/// is read as JSON when it parses, otherwise as a string.
void apply_override(RunConfig& config, const std::string& assignment);

/// Dotted paths whose values differ between two configs.
std::vector<std::string> config_diff(const RunConfig& a, const RunConfig& b);

}  // namespace mtda
