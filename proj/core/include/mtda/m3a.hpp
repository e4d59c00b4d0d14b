// SPDX-License-Identifier: Apache-2.0
//
// Transformer encoder block whose feed-forward path carries a bank of
// mutual-assistance adapters:
//
//   x'  = LN(MHSA(x) + x)
//   x'' = sum_i s_i * act_i(x' W_a,i) W_b,i + FFN(x')
//   out = LN(x'' + x')
//
// The default bank is a long-term adapter (inverted bottleneck, ratio 4, ReLU)
// and a short-term adapter (bottleneck, ratio 1/4, softmax over hidden units),
// each with a learnable scalar scale initialized to zero.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mtda/nn.hpp"

namespace mtda {

enum class AdapterActivation { kRelu, kSoftmax };

std::string to_string(AdapterActivation a);
AdapterActivation parse_adapter_activation(const std::string& name);

struct AdapterSpec {
  double ratio = 4.0;
  AdapterActivation activation = AdapterActivation::kRelu;
  double scale_init = 0.0;

  /// round(ratio * model_dim); throws ConfigError when that is below 1.
  std::size_t hidden_dim(std::size_t model_dim) const;

  static AdapterSpec long_term(double ratio = 4.0) {
    return {ratio, AdapterActivation::kRelu, 0.0};
  }
  static AdapterSpec short_term(double ratio = 0.25) {
    return {ratio, AdapterActivation::kSoftmax, 0.0};
  }
  bool operator==(const AdapterSpec&) const = default;
};

/// Adapter banks used by the adapter-count sweep: N=1 keeps only the
/// long-term adapter, N=2 is the long/short pair, N=3 adds a second long-term
/// adapter. Other counts alternate long/short.
std::vector<AdapterSpec> adapter_bank(std::size_t count, double long_ratio = 4.0,
                                      double short_ratio = 0.25);

struct M3AConfig {
  std::size_t model_dim = 64;
  std::size_t heads = 4;
  std::vector<AdapterSpec> adapters = adapter_bank(2);
  std::size_t ffn_hidden = 0;  // 0 means 4 * model_dim

  std::size_t ffn_hidden_dim() const { return ffn_hidden ? ffn_hidden : 4 * model_dim; }
};

template <typename T>
struct AdapterLayer {
  AdapterActivation activation = AdapterActivation::kRelu;
  Tensor<T> w_a;    // [D, H]
  Tensor<T> w_b;    // [H, D]
  Tensor<T> scale;  // [1]

  static AdapterLayer create(std::size_t model_dim, const AdapterSpec& spec, Rng& rng);

  /// act(x W_a) W_b, without the scale.
  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;
};

/// sum_i s_i * adapter_i(x') + FFN(x'). Throws ConfigError when the number of
/// adapters differs from the configured bank. `adapter_outputs`, when given,
/// receives the unscaled adapter outputs in bank order.
template <typename T>
Tensor<T> m3a_ffn_forward(const M3AConfig& config, const std::vector<AdapterLayer<T>>& adapters,
                          const FeedForward<T>& ffn, const Tensor<T>& x_prime,
                          std::vector<Tensor<T>>* adapter_outputs = nullptr);

template <typename T>
struct M3ABlock {
  M3AConfig config;
  Attention<T> attention;
  LayerNorm<T> norm_attn;
  FeedForward<T> ffn;
  std::vector<AdapterLayer<T>> adapters;
  LayerNorm<T> norm_out;

  static M3ABlock create(const M3AConfig& config, Rng& rng);

  /// x: [T, D] -> [T, D].
  Tensor<T> forward(const Tensor<T>& x, std::vector<Tensor<T>>* adapter_outputs = nullptr) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;
};

}  // namespace mtda
