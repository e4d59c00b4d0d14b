// SPDX-License-Identifier: Apache-2.0

#include "mtda/m3a.hpp"

#include <cmath>

#include "mtda/error.hpp"

namespace mtda {

std::string to_string(AdapterActivation a) {
  return a == AdapterActivation::kRelu ? "relu" : "softmax";
}

AdapterActivation parse_adapter_activation(const std::string& name) {
  if (name == "relu") return AdapterActivation::kRelu;
  if (name == "softmax") return AdapterActivation::kSoftmax;
  throw ConfigError("unknown adapter activation '" + name + "' (expected relu or softmax)");
}

std::size_t AdapterSpec::hidden_dim(std::size_t model_dim) const {
  const double h = std::round(ratio * static_cast<double>(model_dim));
  if (!(ratio > 0.0) || h < 1.0) {
    throw ConfigError("adapter ratio " + std::to_string(ratio) +
                      " gives an empty bottleneck for dim " + std::to_string(model_dim));
  }
  return static_cast<std::size_t>(h);
}

std::vector<AdapterSpec> adapter_bank(std::size_t count, double long_ratio, double short_ratio) {
  std::vector<AdapterSpec> bank;
  if (count == 3) {
    return {AdapterSpec::long_term(long_ratio), AdapterSpec::short_term(short_ratio),
            AdapterSpec::long_term(long_ratio)};
  }
  for (std::size_t i = 0; i < count; ++i) {
    bank.push_back(i % 2 == 0 ? AdapterSpec::long_term(long_ratio)
                              : AdapterSpec::short_term(short_ratio));
  }
  return bank;
}

template <typename T>
AdapterLayer<T> AdapterLayer<T>::create(std::size_t model_dim, const AdapterSpec& spec, Rng& rng) {
  const std::size_t hidden = spec.hidden_dim(model_dim);
  AdapterLayer a;
  a.activation = spec.activation;
  a.w_a = fan_in_uniform<T>({model_dim, hidden}, model_dim, rng);
  a.w_b = fan_in_uniform<T>({hidden, model_dim}, hidden, rng);
  a.scale = Tensor<T>::parameter({1}, {static_cast<T>(spec.scale_init)});
  return a;
}

template <typename T>
Tensor<T> AdapterLayer<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 2 || x.dim(1) != w_a.dim(0)) {
    throw DimensionError("adapter: input " + to_string(x.shape()) + " for model dim " +
                         std::to_string(w_a.dim(0)));
  }
  const Tensor<T> h = matmul(x, w_a);
  const Tensor<T> act = activation == AdapterActivation::kRelu ? relu(h) : softmax_last(h);
  return matmul(act, w_b);
}

template <typename T>
void AdapterLayer<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.emplace_back(prefix + ".w_a", w_a);
  out.emplace_back(prefix + ".w_b", w_b);
  out.emplace_back(prefix + ".scale", scale);
}

template <typename T>
Tensor<T> m3a_ffn_forward(const M3AConfig& config, const std::vector<AdapterLayer<T>>& adapters,
                          const FeedForward<T>& ffn, const Tensor<T>& x_prime,
                          std::vector<Tensor<T>>* adapter_outputs) {
  if (adapters.size() != config.adapters.size()) {
    throw ConfigError("m3a: configured " + std::to_string(config.adapters.size()) +
                      " adapters but " + std::to_string(adapters.size()) + " were supplied");
  }
  if (adapter_outputs != nullptr) adapter_outputs->clear();
  Tensor<T> out = ffn.forward(x_prime);
  for (const auto& adapter : adapters) {
    Tensor<T> a = adapter.forward(x_prime);
    if (adapter_outputs != nullptr) adapter_outputs->push_back(a);
    out = add(out, mul(adapter.scale, a));
  }
  return out;
}

template <typename T>
M3ABlock<T> M3ABlock<T>::create(const M3AConfig& config, Rng& rng) {
  M3ABlock b;
  b.config = config;
  b.attention = Attention<T>::create(config.model_dim, config.heads, rng);
  b.norm_attn = LayerNorm<T>::create(config.model_dim);
  b.ffn = FeedForward<T>::create(config.model_dim, config.ffn_hidden_dim(), rng);
  for (const auto& spec : config.adapters) {
    b.adapters.push_back(AdapterLayer<T>::create(config.model_dim, spec, rng));
  }
  b.norm_out = LayerNorm<T>::create(config.model_dim);
  return b;
}

template <typename T>
Tensor<T> M3ABlock<T>::forward(const Tensor<T>& x, std::vector<Tensor<T>>* adapter_outputs) const {
  if (x.rank() != 2 || x.dim(1) != config.model_dim) {
    throw DimensionError("m3a block: input " + to_string(x.shape()) + " for model dim " +
                         std::to_string(config.model_dim));
  }
  const Tensor<T> x_prime = norm_attn.forward(add(attention.self_attend(x), x));
  const Tensor<T> x_second = m3a_ffn_forward(config, adapters, ffn, x_prime, adapter_outputs);
  return norm_out.forward(add(x_second, x_prime));
}

template <typename T>
void M3ABlock<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  attention.collect(prefix + ".attn", out);
  norm_attn.collect(prefix + ".ln_attn", out);
  ffn.collect(prefix + ".ffn", out);
  for (std::size_t i = 0; i < adapters.size(); ++i) {
    adapters[i].collect(prefix + ".adapter" + std::to_string(i), out);
  }
  norm_out.collect(prefix + ".ln_out", out);
}

template struct AdapterLayer<float>;
template struct AdapterLayer<double>;
template struct M3ABlock<float>;
template struct M3ABlock<double>;
template Tensor<float> m3a_ffn_forward(const M3AConfig&, const std::vector<AdapterLayer<float>>&,
                                       const FeedForward<float>&, const Tensor<float>&,
                                       std::vector<Tensor<float>>*);
template Tensor<double> m3a_ffn_forward(const M3AConfig&, const std::vector<AdapterLayer<double>>&,
                                        const FeedForward<double>&, const Tensor<double>&,
                                        std::vector<Tensor<double>>*);

}  // namespace mtda
