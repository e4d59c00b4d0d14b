// SPDX-License-Identifier: Apache-2.0

#include "mtda/conv_ops.hpp"

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "mtda/error.hpp"

namespace mtda {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
void require_map(const Tensor<T>& x, const char* op) {
  if (x.rank() != 3) {
    throw DimensionError(std::string(op) + ": expected [c, t, f], got " + to_string(x.shape()));
  }
}

struct ConvGeometry {
  std::size_t c_in, t, f, k, pad;
  std::size_t rows() const { return c_in * k * k; }
  std::size_t cols() const { return t * f; }
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const std::size_t n = g.cols();
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        T* row = cols + ((ci * g.k + ki) * g.k + kj) * n;
        for (std::size_t ti = 0; ti < g.t; ++ti) {
          const std::ptrdiff_t si =
              static_cast<std::ptrdiff_t>(ti + ki) - static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t fi = 0; fi < g.f; ++fi) {
            const std::ptrdiff_t sj =
                static_cast<std::ptrdiff_t>(fi + kj) - static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = si >= 0 && si < static_cast<std::ptrdiff_t>(g.t) && sj >= 0 &&
                                sj < static_cast<std::ptrdiff_t>(g.f);
            row[ti * g.f + fi] = inside ? x[(ci * g.t + si) * g.f + sj] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* x) {
  const std::size_t n = g.cols();
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const T* row = cols + ((ci * g.k + ki) * g.k + kj) * n;
        for (std::size_t ti = 0; ti < g.t; ++ti) {
          const std::ptrdiff_t si =
              static_cast<std::ptrdiff_t>(ti + ki) - static_cast<std::ptrdiff_t>(g.pad);
          if (si < 0 || si >= static_cast<std::ptrdiff_t>(g.t)) continue;
          for (std::size_t fi = 0; fi < g.f; ++fi) {
            const std::ptrdiff_t sj =
                static_cast<std::ptrdiff_t>(fi + kj) - static_cast<std::ptrdiff_t>(g.pad);
            if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(g.f)) continue;
            x[(ci * g.t + si) * g.f + sj] += row[ti * g.f + fi];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_map(x, "conv2d_same");
  if (weight.rank() != 4 || weight.dim(1) != x.dim(0) || weight.dim(2) != weight.dim(3) ||
      weight.dim(2) % 2 == 0) {
    throw DimensionError("conv2d_same: kernel " + to_string(weight.shape()) +
                         " incompatible with input " + to_string(x.shape()));
  }
  const std::size_t c_out = weight.dim(0);
  if (bias.defined() && bias.size() != c_out) {
    throw DimensionError("conv2d_same: bias " + to_string(bias.shape()) + " for " +
                         std::to_string(c_out) + " output channels");
  }
  const ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), weight.dim(2), weight.dim(2) / 2};
  std::vector<T> cols(g.rows() * g.cols());
  im2col(x.data().data(), g, cols.data());

  const bool track =
      bias.defined() ? should_record<T>({&x, &weight, &bias}) : should_record<T>({&x, &weight});
  Tensor<T> out = make_result<T>({c_out, g.t, g.f}, track);
  MatMap<T> y(out.data().data(), c_out, g.cols());
  y.noalias() = ConstMatMap<T>(weight.data().data(), c_out, g.rows()) *
                ConstMatMap<T>(cols.data(), g.rows(), g.cols());
  if (bias.defined()) {
    for (std::size_t co = 0; co < c_out; ++co) y.row(co).array() += bias[co];
  }
  if (track) {
    auto sb = bias.defined() ? bias.storage() : nullptr;
    Tape<T>::active()->record(out, [sx = x.storage(), sw = weight.storage(), sb, so = out.storage(),
                                    cols = std::move(cols), g, c_out]() {
      ConstMatMap<T> dy(so->grad.data(), c_out, g.cols());
      if (sw->requires_grad) {
        MatMap<T>(grad_of<T>(*sw).data(), c_out, g.rows()).noalias() +=
            dy * ConstMatMap<T>(cols.data(), g.rows(), g.cols()).transpose();
      }
      if (sb && sb->requires_grad) {
        T* gb = grad_of<T>(*sb).data();
        for (std::size_t co = 0; co < c_out; ++co) gb[co] += dy.row(co).sum();
      }
      if (sx->requires_grad) {
        RowMat<T> dcols = ConstMatMap<T>(sw->data.data(), c_out, g.rows()).transpose() * dy;
        col2im_add(dcols.data(), g, grad_of<T>(*sx).data());
      }
    });
  }
  return out;
}

namespace {

template <typename T>
void check_channel_params(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta) {
  require_map(x, "batch_norm");
  if (gamma.size() != x.dim(0) || beta.size() != x.dim(0)) {
    throw DimensionError("batch_norm: affine params " + to_string(gamma.shape()) +
                         " do not match " + std::to_string(x.dim(0)) + " channels");
  }
}

// y = gamma * xhat + beta with xhat = (x - mean) * inv_std; `stats_depend_on_x`
// selects whether the backward pass differentiates through mean and variance.
template <typename T>
Tensor<T> channel_affine_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                              const std::vector<T>& mu, const std::vector<T>& inv_std,
                              bool stats_depend_on_x) {
  const std::size_t c = x.dim(0), n = x.dim(1) * x.dim(2);
  const bool track = should_record<T>({&x, &gamma, &beta});
  Tensor<T> out = make_result<T>(x.shape(), track);
  std::vector<T> xhat(x.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = ch * n + i;
      xhat[idx] = (x[idx] - mu[ch]) * inv_std[ch];
      out[idx] = gamma[ch] * xhat[idx] + beta[ch];
    }
  }
  if (track) {
    Tape<T>::active()->record(
        out, [sx = x.storage(), sg = gamma.storage(), sb = beta.storage(), so = out.storage(),
              xhat = std::move(xhat), inv_std, c, n, stats_depend_on_x]() {
          const T* g = so->grad.data();
          if (sg->requires_grad) {
            T* gg = grad_of<T>(*sg).data();
            for (std::size_t ch = 0; ch < c; ++ch) {
              T acc = 0;
              for (std::size_t i = ch * n; i < (ch + 1) * n; ++i) acc += g[i] * xhat[i];
              gg[ch] += acc;
            }
          }
          if (sb->requires_grad) {
            T* gb = grad_of<T>(*sb).data();
            for (std::size_t ch = 0; ch < c; ++ch) {
              T acc = 0;
              for (std::size_t i = ch * n; i < (ch + 1) * n; ++i) acc += g[i];
              gb[ch] += acc;
            }
          }
          if (sx->requires_grad) {
            T* gx = grad_of<T>(*sx).data();
            for (std::size_t ch = 0; ch < c; ++ch) {
              const T gam = sg->data[ch];
              if (!stats_depend_on_x) {
                for (std::size_t i = 0; i < n; ++i)
                  gx[ch * n + i] += g[ch * n + i] * gam * inv_std[ch];
                continue;
              }
              T sum_d = 0, sum_dx = 0;
              for (std::size_t i = 0; i < n; ++i) {
                const T d = g[ch * n + i] * gam;
                sum_d += d;
                sum_dx += d * xhat[ch * n + i];
              }
              const T k = inv_std[ch] / T(n);
              for (std::size_t i = 0; i < n; ++i) {
                const T d = g[ch * n + i] * gam;
                gx[ch * n + i] += k * (T(n) * d - sum_d - xhat[ch * n + i] * sum_dx);
              }
            }
          }
        });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> batch_norm_batch_stats(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                 T eps, ChannelStats<T>* stats) {
  check_channel_params(x, gamma, beta);
  const std::size_t c = x.dim(0), n = x.dim(1) * x.dim(2);
  std::vector<T> mu(c, T(0)), var(c, T(0)), inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < n; ++i) mu[ch] += x[ch * n + i];
    mu[ch] /= T(n);
    for (std::size_t i = 0; i < n; ++i) {
      const T d = x[ch * n + i] - mu[ch];
      var[ch] += d * d;
    }
    var[ch] /= T(n);
    inv_std[ch] = T(1) / std::sqrt(var[ch] + eps);
  }
  Tensor<T> out = channel_affine_norm(x, gamma, beta, mu, inv_std, true);
  if (stats != nullptr) {
    stats->mean = std::move(mu);
    stats->var = std::move(var);
  }
  return out;
}

template <typename T>
Tensor<T> batch_norm_fixed_stats(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                                 const std::vector<T>& mean, const std::vector<T>& var, T eps) {
  check_channel_params(x, gamma, beta);
  const std::size_t c = x.dim(0);
  if (mean.size() != c || var.size() != c) {
    throw DimensionError("batch_norm: running statistics do not match channel count");
  }
  std::vector<T> inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) inv_std[ch] = T(1) / std::sqrt(var[ch] + eps);
  return channel_affine_norm(x, gamma, beta, mean, inv_std, false);
}

template <typename T>
Tensor<T> avg_pool_freq2(const Tensor<T>& x) {
  require_map(x, "avg_pool_freq2");
  const std::size_t c = x.dim(0), t = x.dim(1), f = x.dim(2), fo = f / 2;
  if (fo == 0) throw DimensionError("avg_pool_freq2: need at least 2 frequency bins");
  const bool track = should_record<T>({&x});
  Tensor<T> out = make_result<T>({c, t, fo}, track);
  for (std::size_t r = 0; r < c * t; ++r) {
    for (std::size_t j = 0; j < fo; ++j) {
      out[r * fo + j] = T(0.5) * (x[r * f + 2 * j] + x[r * f + 2 * j + 1]);
    }
  }
  if (track) {
    Tape<T>::active()->record(out, [sx = x.storage(), so = out.storage(), rows = c * t, f, fo]() {
      T* gx = grad_of<T>(*sx).data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < fo; ++j) {
          const T g = T(0.5) * so->grad[r * fo + j];
          gx[r * f + 2 * j] += g;
          gx[r * f + 2 * j + 1] += g;
        }
      }
    });
  }
  return out;
}

#define MTDA_INSTANTIATE_CONV(T)                                                                  \
  template Tensor<T> conv2d_same(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> batch_norm_batch_stats(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                            T, ChannelStats<T>*);                                 \
  template Tensor<T> batch_norm_fixed_stats(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                            const std::vector<T>&, const std::vector<T>&, T);     \
  template Tensor<T> avg_pool_freq2(const Tensor<T>&);

MTDA_INSTANTIATE_CONV(float)
MTDA_INSTANTIATE_CONV(double)

#undef MTDA_INSTANTIATE_CONV

}  // namespace mtda
