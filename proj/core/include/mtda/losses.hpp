// SPDX-License-Identifier: Apache-2.0
//
// Frame-level training losses.

#pragma once

#include "mtda/tensor.hpp"

namespace mtda {

/// Masked mean binary cross-entropy over [t, K] scores in (0, 1).
///
/// mask[k] in {0, 1} selects the classes annotated for the clip; the mean is
/// taken over t * (number of selected classes). Log arguments are clamped at
/// 1e-7. An all-zero mask yields 0 with zero gradients. Throws ContractError
/// for targets outside [0, 1] and DimensionError for shape mismatches.
template <typename T>
Tensor<T> bce_loss(const Tensor<T>& scores, const Tensor<T>& targets, const Tensor<T>& mask);

/// Mean squared difference. Gradient reaches `student` only; `teacher` is
/// treated as a constant even when it requires grad. Throws ContractError on
/// a shape mismatch.
template <typename T>
Tensor<T> consistency_loss(const Tensor<T>& student, const Tensor<T>& teacher);

}  // namespace mtda
