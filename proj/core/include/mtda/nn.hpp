// SPDX-License-Identifier: Apache-2.0
//
// Parameterized layers shared by the transformer and CNN branches.

#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mtda/tensor.hpp"

namespace mtda {

using Rng = std::mt19937_64;

/// Named handles onto a module's parameters (shared storage, not copies).
template <typename T>
using ParamList = std::vector<std::pair<std::string, Tensor<T>>>;

/// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) leaf parameter.
template <typename T>
Tensor<T> fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng);

template <typename T>
struct Linear {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]; undefined for a bias-free projection

  static Linear create(std::size_t in, std::size_t out, bool with_bias, Rng& rng);

  std::size_t in_dim() const { return weight.dim(0); }
  std::size_t out_dim() const { return weight.dim(1); }

  /// x: [rows, in] -> [rows, out]
  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;
};

template <typename T>
struct LayerNorm {
  Tensor<T> gamma;
  Tensor<T> beta;
  T eps = T(1e-5);

  static LayerNorm create(std::size_t dim);
  Tensor<T> forward(const Tensor<T>& x) const { return layer_norm(x, gamma, beta, eps); }
  void collect(const std::string& prefix, ParamList<T>& out) const;
};

/// Multi-head scaled dot-product attention with packed [D, D] projections.
///
/// Head h uses columns [h*d, (h+1)*d) of each projection, d = D / heads.
/// Per-head outputs are concatenated back to width D; there is no output
/// projection and no positional term.
template <typename T>
struct Attention {
  std::size_t heads = 1;
  Tensor<T> wq, wk, wv;

  static Attention create(std::size_t dim, std::size_t heads, Rng& rng);

  std::size_t dim() const { return wq.dim(0); }
  std::size_t head_dim() const { return dim() / heads; }

  /// query: [Tq, D], kv: [Tkv, D] -> [Tq, D]. When `weights` is given it
  /// receives the per-head [Tq, Tkv] attention matrices.
  Tensor<T> cross_attend(const Tensor<T>& query, const Tensor<T>& kv,
                         std::vector<Tensor<T>>* weights = nullptr) const;
  Tensor<T> self_attend(const Tensor<T>& x, std::vector<Tensor<T>>* weights = nullptr) const {
    return cross_attend(x, x, weights);
  }
  void collect(const std::string& prefix, ParamList<T>& out) const;
};

/// Linear -> ReLU -> Linear.
template <typename T>
struct FeedForward {
  Linear<T> up;
  Linear<T> down;

  static FeedForward create(std::size_t dim, std::size_t hidden, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;
};

}  // namespace mtda
