// SPDX-License-Identifier: Apache-2.0
//
// Differentiable ops on single-clip feature maps laid out channel x time x freq.

#pragma once

#include <vector>

#include "mtda/tensor.hpp"

namespace mtda {

/// Stride-1 convolution with zero padding k/2 for an odd square kernel.
/// x: [c_in, t, f], weight: [c_out, c_in, k, k], bias: [c_out] or undefined.
template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
struct ChannelStats {
  std::vector<T> mean;
  std::vector<T> var;  // biased, over the t*f positions of each channel
};

/// Normalizes each channel with its own statistics over the t*f positions.
template <typename T>
Tensor<T> batch_norm_batch_stats(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                 T eps, ChannelStats<T>* stats);

/// Normalizes each channel with fixed (running) statistics.
template <typename T>
Tensor<T> batch_norm_fixed_stats(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                 const std::vector<T>& mean, const std::vector<T>& var, T eps);

/// Averages adjacent pairs along the last axis: [c, t, f] -> [c, t, f/2].
/// A trailing odd bin is dropped.
template <typename T>
Tensor<T> avg_pool_freq2(const Tensor<T>& x);

}  // namespace mtda
