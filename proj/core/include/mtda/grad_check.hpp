// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mtda/tensor.hpp"

namespace mtda {

using NamedTensors = std::vector<std::pair<std::string, Tensor<double>>>;

struct GradCheckOptions {
  double step = 1e-5;
  double tol = 1e-5;
  /// Denominator floor for the relative error, so that near-zero gradients
  /// are compared on an absolute scale instead of amplifying round-off.
  double magnitude_floor = 1e-5;
  /// A probe whose window straddles a kink (ReLU at 0) has a central
  /// difference that averages two different slopes. Such an entry is set
  /// aside when the analytic value matches one one-sided difference to
  /// `kink_match_tol` while the two one-sided differences disagree by at
  /// least 10x that. At most `max_kink_fraction` of all entries may be set
  /// aside.
  bool skip_kinks = true;
  double kink_match_tol = 1e-3;
  double max_kink_fraction = 0.01;
};

struct TensorGradReport {
  std::string name;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t kinks = 0;  // entries set aside as nondifferentiable probes
  bool finite = true;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<TensorGradReport> tensors;
  double tol = 0.0;
  bool too_many_kinks = false;

  bool passed() const;
  std::size_t kinks() const;
  double max_rel_error() const;
  std::vector<std::string> failing() const;
};

/// Compares tape gradients of a scalar function against central differences
/// (f(θ+h) - f(θ-h)) / 2h for every entry of every parameter.
///
/// `loss` must build its result from the given parameters with whatever tape
/// is active when it runs; it is called once under a fresh tape and 2·P times
/// without one. Parameter values are restored exactly after each probe.
GradCheckReport grad_check(const std::function<Tensor<double>()>& loss, const NamedTensors& params,
                           const GradCheckOptions& options = {});

}  // namespace mtda
