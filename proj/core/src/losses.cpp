// SPDX-License-Identifier: Apache-2.0

#include "mtda/losses.hpp"

#include <algorithm>
#include <cmath>

#include "mtda/error.hpp"

namespace mtda {
namespace {

template <typename T>
constexpr T kLogClamp = T(1e-7);

}  // namespace

template <typename T>
Tensor<T> bce_loss(const Tensor<T>& scores, const Tensor<T>& targets, const Tensor<T>& mask) {
  if (scores.rank() != 2 || targets.shape() != scores.shape()) {
    throw DimensionError("bce_loss: scores " + to_string(scores.shape()) + " vs targets " +
                         to_string(targets.shape()));
  }
  const std::size_t rows = scores.dim(0), cols = scores.dim(1);
  if (mask.rank() != 1 || mask.dim(0) != cols) {
    throw DimensionError("bce_loss: mask " + to_string(mask.shape()) + " does not match " +
                         std::to_string(cols) + " classes");
  }
  for (T y : targets.values()) {
    if (!(y >= T(0) && y <= T(1))) throw ContractError("bce_loss: target outside [0, 1]");
  }
  T active = T(0);
  for (T m : mask.values()) active += m;
  const T count = active * static_cast<T>(rows);

  const bool track = should_record<T>({&scores});
  Tensor<T> out = make_result<T>(Shape{1}, track);
  if (count == T(0)) return out;
  T total = T(0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (mask[c] == T(0)) continue;
      const T p = scores(r, c), y = targets(r, c);
      total -= mask[c] * (y * std::log(std::max(p, kLogClamp<T>)) +
                          (T(1) - y) * std::log(std::max(T(1) - p, kLogClamp<T>)));
    }
  }
  out[0] = total / count;
  if (track) {
    Tape<T>::active()->record(out, [ss = scores.storage(), st = targets.storage(),
                                    sm = mask.storage(), so = out.storage(), rows, cols, count]() {
      const T g = so->grad[0] / count;
      T* gs = grad_of<T>(*ss).data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          const T m = sm->data[c];
          if (m == T(0)) continue;
          const std::size_t i = r * cols + c;
          const T p = ss->data[i], y = st->data[i];
          T d = T(0);
          if (p > kLogClamp<T>) d -= y / p;
          if (T(1) - p > kLogClamp<T>) d += (T(1) - y) / (T(1) - p);
          gs[i] += g * m * d;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> consistency_loss(const Tensor<T>& student, const Tensor<T>& teacher) {
  if (student.shape() != teacher.shape()) {
    throw ContractError("consistency_loss: student " + to_string(student.shape()) + " vs teacher " +
                        to_string(teacher.shape()));
  }
  const std::size_t n = student.size();
  const bool track = should_record<T>({&student});
  Tensor<T> out = make_result<T>(Shape{1}, track);
  T total = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    const T d = student[i] - teacher[i];
    total += d * d;
  }
  out[0] = total / static_cast<T>(n);
  if (track) {
    Tape<T>::active()->record(
        out, [ss = student.storage(), st = teacher.storage(), so = out.storage(), n]() {
          const T g = T(2) * so->grad[0] / static_cast<T>(n);
          T* gs = grad_of<T>(*ss).data();
          for (std::size_t i = 0; i < n; ++i) gs[i] += g * (ss->data[i] - st->data[i]);
        });
  }
  return out;
}

template Tensor<float> bce_loss(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> bce_loss(const Tensor<double>&, const Tensor<double>&,
                                 const Tensor<double>&);
template Tensor<float> consistency_loss(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> consistency_loss(const Tensor<double>&, const Tensor<double>&);

}  // namespace mtda
