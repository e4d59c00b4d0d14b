// SPDX-License-Identifier: Apache-2.0

#include "mtda/nn.hpp"

#include <cmath>

#include "mtda/error.hpp"

namespace mtda {

template <typename T>
Tensor<T> fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> values(numel(shape));
  for (T& v : values) v = static_cast<T>(dist(rng));
  return Tensor<T>::parameter(std::move(shape), std::move(values));
}

// ---- Linear ----------------------------------------------------------------

template <typename T>
Linear<T> Linear<T>::create(std::size_t in, std::size_t out, bool with_bias, Rng& rng) {
  Linear layer;
  layer.weight = fan_in_uniform<T>({in, out}, in, rng);
  if (with_bias) layer.bias = Tensor<T>::parameter({out}, std::vector<T>(out, T(0)));
  return layer;
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 2 || x.dim(1) != in_dim()) {
    throw DimensionError("linear: input " + to_string(x.shape()) + " for a " +
                         std::to_string(in_dim()) + "->" + std::to_string(out_dim()) +
                         " projection");
  }
  Tensor<T> y = matmul(x, weight);
  return bias.defined() ? add_bias(y, bias) : y;
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.emplace_back(prefix + ".weight", weight);
  if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
}

// ---- LayerNorm -------------------------------------------------------------

template <typename T>
LayerNorm<T> LayerNorm<T>::create(std::size_t dim) {
  LayerNorm ln;
  ln.gamma = Tensor<T>::parameter({dim}, std::vector<T>(dim, T(1)));
  ln.beta = Tensor<T>::parameter({dim}, std::vector<T>(dim, T(0)));
  return ln;
}

template <typename T>
void LayerNorm<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

// ---- Attention -------------------------------------------------------------

template <typename T>
Attention<T> Attention<T>::create(std::size_t dim, std::size_t heads, Rng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention: model dim " + std::to_string(dim) +
                      " is not divisible by head count " + std::to_string(heads));
  }
  Attention a;
  a.heads = heads;
  a.wq = fan_in_uniform<T>({dim, dim}, dim, rng);
  a.wk = fan_in_uniform<T>({dim, dim}, dim, rng);
  a.wv = fan_in_uniform<T>({dim, dim}, dim, rng);
  return a;
}

template <typename T>
Tensor<T> Attention<T>::cross_attend(const Tensor<T>& query, const Tensor<T>& kv,
                                     std::vector<Tensor<T>>* weights) const {
  const std::size_t d_model = dim();
  if (query.rank() != 2 || kv.rank() != 2 || query.dim(1) != d_model || kv.dim(1) != d_model) {
    throw DimensionError("attention: query " + to_string(query.shape()) + " and key/value " +
                         to_string(kv.shape()) + " must both have width " +
                         std::to_string(d_model));
  }
  const std::size_t d = head_dim();
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(d));
  const Tensor<T> q = matmul(query, wq);
  const Tensor<T> k = matmul(kv, wk);
  const Tensor<T> v = matmul(kv, wv);
  if (weights != nullptr) weights->clear();
  if (heads == 1) {
    Tensor<T> attn = softmax_last(scale(matmul(q, transpose(k)), inv_sqrt_d));
    if (weights != nullptr) weights->push_back(attn);
    return matmul(attn, v);
  }
  std::vector<Tensor<T>> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor<T> qh = slice_cols(q, h * d, (h + 1) * d);
    const Tensor<T> kh = slice_cols(k, h * d, (h + 1) * d);
    const Tensor<T> vh = slice_cols(v, h * d, (h + 1) * d);
    Tensor<T> attn = softmax_last(scale(matmul(qh, transpose(kh)), inv_sqrt_d));
    if (weights != nullptr) weights->push_back(attn);
    outs.push_back(matmul(attn, vh));
  }
  return concat_cols(outs);
}

template <typename T>
void Attention<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.emplace_back(prefix + ".wq", wq);
  out.emplace_back(prefix + ".wk", wk);
  out.emplace_back(prefix + ".wv", wv);
}

// ---- FeedForward -----------------------------------------------------------

template <typename T>
FeedForward<T> FeedForward<T>::create(std::size_t dim, std::size_t hidden, Rng& rng) {
  FeedForward ffn;
  ffn.up = Linear<T>::create(dim, hidden, true, rng);
  ffn.down = Linear<T>::create(hidden, dim, true, rng);
  return ffn;
}

template <typename T>
Tensor<T> FeedForward<T>::forward(const Tensor<T>& x) const {
  return down.forward(relu(up.forward(x)));
}

template <typename T>
void FeedForward<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  up.collect(prefix + ".up", out);
  down.collect(prefix + ".down", out);
}

template Tensor<float> fan_in_uniform<float>(Shape, std::size_t, Rng&);
template Tensor<double> fan_in_uniform<double>(Shape, std::size_t, Rng&);
template struct Linear<float>;
template struct Linear<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template struct Attention<float>;
template struct Attention<double>;
template struct FeedForward<float>;
template struct FeedForward<double>;

}  // namespace mtda
