// SPDX-License-Identifier: Apache-2.0
//
// Adam and exponential moving averages over named parameter lists.

#pragma once

#include <cstddef>
#include <vector>

#include "mtda/nn.hpp"

namespace mtda {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moments are kept in double regardless of the parameter precision.
struct AdamState {
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update of every parameter from its accumulated
/// gradient (a parameter without a gradient buffer counts as zero gradient).
/// Initializes `state` on first use; throws ContractError if the parameter
/// list changed shape since.
template <typename T>
void adam_step(const ParamList<T>& params, AdamState& state, const AdamConfig& config);

/// teacher <- decay * teacher + (1 - decay) * student, entry by entry.
/// Throws ContractError when names or shapes differ or decay is outside [0, 1].
template <typename T>
void ema_update(const ParamList<T>& teacher, const ParamList<T>& student, double decay);

template <typename T>
void zero_grads(const ParamList<T>& params);

}  // namespace mtda
