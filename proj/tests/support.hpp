// SPDX-License-Identifier: Apache-2.0
//
// Helpers shared by the unit tests.

#pragma once

#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mtda/grad_check.hpp"
#include "mtda/tensor.hpp"

namespace mtda::test {

using Rng64 = std::mt19937_64;

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng64& rng, double lo = -1.0, double hi = 1.0,
                        bool parameter = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<T> values(numel(shape));
  for (T& v : values) v = static_cast<T>(u(rng));
  return parameter ? Tensor<T>::parameter(std::move(shape), std::move(values))
                   : Tensor<T>(std::move(shape), std::move(values));
}

/// sum(y ⊙ W) for a fixed random W of y's shape: a scalar whose gradient
/// with respect to y is W, so every output entry contributes distinctly.
inline Tensor<double> probe_loss(const Tensor<double>& y, const Tensor<double>& w) {
  return sum(mul(y, w));
}

inline ::testing::AssertionResult passes(const GradCheckReport& report) {
  if (report.passed()) return ::testing::AssertionSuccess();
  auto failure = ::testing::AssertionFailure();
  for (const auto& t : report.tensors) {
    failure << t.name << " max_rel=" << t.max_rel_error << " kinks=" << t.kinks
            << (t.passed ? "" : " FAIL") << "; ";
  }
  if (report.too_many_kinks) failure << "too many kinks";
  return failure;
}

inline GradCheckOptions tol(double t) {
  GradCheckOptions o;
  o.tol = t;
  return o;
}

/// Fresh empty directory under the system temp dir, unique per test.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  std::string name = std::string(info->test_suite_name()) + "_" + info->name() + "_" + tag;
  for (char& c : name) {
    if (c == '/') c = '_';
  }
  const auto dir = std::filesystem::temp_directory_path() / "mtda_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<float> as_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }

}  // namespace mtda::test
