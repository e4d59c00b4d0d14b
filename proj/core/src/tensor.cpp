// SPDX-License-Identifier: Apache-2.0

#include "mtda/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Core>

#include "mtda/error.hpp"

namespace mtda {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
void check_finite([[maybe_unused]] const Tensor<T>& t, [[maybe_unused]] const char* op) {
#ifndef NDEBUG
  for (T v : t.data()) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string(op) + ": non-finite output");
  }
#endif
}

template <typename T>
void require_matrix(const Tensor<T>& x, const char* op) {
  if (x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + to_string(x.shape()));
  }
}

template <typename T>
using StoragePtr = std::shared_ptr<typename Tensor<T>::Storage>;

template <typename T>
thread_local Tape<T>* g_active_tape = nullptr;

}  // namespace

// ---- Tensor ----------------------------------------------------------------

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : s_(std::make_shared<Storage>()) {
  s_->data.assign(numel(shape), fill);
  s_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : s_(std::make_shared<Storage>()) {
  if (numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + to_string(shape) + " needs " +
                         std::to_string(numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  s_->shape = std::move(shape);
  s_->data = std::move(values);
}

template <typename T>
Tensor<T> Tensor<T>::parameter(Shape shape, std::vector<T> values) {
  Tensor t(std::move(shape), std::move(values));
  t.s_->requires_grad = true;
  return t;
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
  return s_->data[0];
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  return grad_of<T>(*s_);
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(s_->grad.begin(), s_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor(s_->shape, s_->data);
}

template <typename T>
Tensor<T> make_result(Shape shape, bool tracked) {
  Tensor<T> out(std::move(shape));
  out.storage()->requires_grad = tracked;
  out.storage()->leaf = false;
  return out;
}

template <typename T>
bool should_record(std::initializer_list<const Tensor<T>*> operands) {
  if (Tape<T>::active() == nullptr) return false;
  return std::any_of(operands.begin(), operands.end(),
                     [](const Tensor<T>* t) { return t->requires_grad(); });
}

template <typename T>
std::span<T> grad_of(typename Tensor<T>::Storage& s) {
  if (s.grad.size() != s.data.size()) s.grad.assign(s.data.size(), T(0));
  return s.grad;
}

// ---- Tape ------------------------------------------------------------------

template <typename T>
Tape<T>::~Tape() {
  if (g_active_tape<T> == this) g_active_tape<T> = nullptr;
}

template <typename T>
void Tape<T>::record(const Tensor<T>& output, BackwardFn backward) {
  nodes_.push_back(Node{output.storage(), std::move(backward)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward() on a loss that does not depend on any parameter");
  }
  for (auto& node : nodes_) {
    std::fill(node.output->grad.begin(), node.output->grad.end(), T(0));
  }
  grad_of<T>(*loss.storage())[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output->grad.empty()) it->backward();
  }
}

template <typename T>
Tape<T>* Tape<T>::active() {
  return g_active_tape<T>;
}

template <typename T>
Tape<T>::Scope::Scope(Tape& tape) : previous_(g_active_tape<T>) {
  g_active_tape<T> = &tape;
}

template <typename T>
Tape<T>::Scope::~Scope() {
  g_active_tape<T> = previous_;
}

template <typename T>
Tape<T>::Pause::Pause() : previous_(g_active_tape<T>) {
  g_active_tape<T> = nullptr;
}

template <typename T>
Tape<T>::Pause::~Pause() {
  g_active_tape<T> = previous_;
}

// ---- linear algebra --------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ, " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
  }
  const bool track = should_record<T>({&a, &b});
  Tensor<T> out = make_result<T>({m, n}, track);
  MatMap<T>(out.data().data(), m, n).noalias() =
      ConstMatMap<T>(a.data().data(), m, k) * ConstMatMap<T>(b.data().data(), k, n);
  if (track) {
    Tape<T>::active()->record(out,
                              [sa = a.storage(), sb = b.storage(), so = out.storage(), m, k, n]() {
                                ConstMatMap<T> dc(so->grad.data(), m, n);
                                if (sa->requires_grad) {
                                  MatMap<T>(grad_of<T>(*sa).data(), m, k).noalias() +=
                                      dc * ConstMatMap<T>(sb->data.data(), k, n).transpose();
                                }
                                if (sb->requires_grad) {
                                  MatMap<T>(grad_of<T>(*sb).data(), k, n).noalias() +=
                                      ConstMatMap<T>(sa->data.data(), m, k).transpose() * dc;
                                }
                              });
  }
  check_finite(out, "matmul");
  return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_matrix(a, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  const bool track = should_record<T>({&a});
  Tensor<T> out = make_result<T>({c, r}, track);
  MatMap<T>(out.data().data(), c, r) = ConstMatMap<T>(a.data().data(), r, c).transpose();
  if (track) {
    Tape<T>::active()->record(out, [sa = a.storage(), so = out.storage(), r, c]() {
      MatMap<T>(grad_of<T>(*sa).data(), r, c) += ConstMatMap<T>(so->grad.data(), c, r).transpose();
    });
  }
  return out;
}

// ---- elementwise -----------------------------------------------------------

namespace {

enum class Binary { kAdd, kSub, kMul };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, Binary kind, const char* name) {
  const bool a_scalar = a.size() == 1 && b.size() != 1;
  const bool b_scalar = b.size() == 1 && a.size() != 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
    throw DimensionError(std::string(name) + ": shapes " + to_string(a.shape()) + " and " +
                         to_string(b.shape()) + " differ");
  }
  const Shape& shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = numel(shape);
  const bool track = should_record<T>({&a, &b});
  Tensor<T> out = make_result<T>(shape, track);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  T* po = out.data().data();
  const std::size_t sa = a_scalar ? 0 : 1, sb = b_scalar ? 0 : 1;
  for (std::size_t i = 0; i < n; ++i) {
    const T x = pa[i * sa], y = pb[i * sb];
    po[i] = kind == Binary::kAdd ? x + y : kind == Binary::kSub ? x - y : x * y;
  }
  if (track) {
    Tape<T>::active()->record(
        out, [ta = a.storage(), tb = b.storage(), so = out.storage(), sa, sb, n, kind]() {
          const T* g = so->grad.data();
          if (ta->requires_grad) {
            T* ga = grad_of<T>(*ta).data();
            for (std::size_t i = 0; i < n; ++i) {
              ga[i * sa] += kind == Binary::kMul ? g[i] * tb->data[i * sb] : g[i];
            }
          }
          if (tb->requires_grad) {
            T* gb = grad_of<T>(*tb).data();
            for (std::size_t i = 0; i < n; ++i) {
              gb[i * sb] += kind == Binary::kMul   ? g[i] * ta->data[i * sa]
                            : kind == Binary::kSub ? -g[i]
                                                   : g[i];
            }
          }
        });
  }
  check_finite(out, name);
  return out;
}

template <typename T, typename Fwd, typename Bwd>
Tensor<T> unary(const Tensor<T>& x, Fwd fwd, Bwd bwd, const char* name) {
  const bool track = should_record<T>({&x});
  Tensor<T> out = make_result<T>(x.shape(), track);
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(x[i]);
  if (track) {
    // bwd(input, output) -> local derivative
    Tape<T>::active()->record(out, [sx = x.storage(), so = out.storage(), n, bwd]() {
      T* gx = grad_of<T>(*sx).data();
      for (std::size_t i = 0; i < n; ++i) gx[i] += so->grad[i] * bwd(sx->data[i], so->data[i]);
    });
  }
  check_finite(out, name);
  return out;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::kAdd, "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::kSub, "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::kMul, "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary(a, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; }, "scale");
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T in, T) { return in > T(0) ? T(1) : T(0); },
      "relu");
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); }, "sigmoid");
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  const std::size_t cols = x.shape().back();
  if (bias.rank() != 1 || bias.dim(0) != cols) {
    throw DimensionError("add_bias: bias " + to_string(bias.shape()) + " does not match input " +
                         to_string(x.shape()));
  }
  const std::size_t rows = x.size() / cols;
  const bool track = should_record<T>({&x, &bias});
  Tensor<T> out = make_result<T>(x.shape(), track);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[r * cols + c] + bias[c];
  }
  if (track) {
    Tape<T>::active()->record(
        out, [sx = x.storage(), sb = bias.storage(), so = out.storage(), rows, cols]() {
          const T* g = so->grad.data();
          if (sx->requires_grad) {
            T* gx = grad_of<T>(*sx).data();
            for (std::size_t i = 0; i < rows * cols; ++i) gx[i] += g[i];
          }
          if (sb->requires_grad) {
            T* gb = grad_of<T>(*sb).data();
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
            }
          }
        });
  }
  check_finite(out, "add_bias");
  return out;
}

// ---- normalizations --------------------------------------------------------

template <typename T>
Tensor<T> softmax_last(const Tensor<T>& x) {
  if (x.rank() == 0 || x.shape().back() == 0) throw DimensionError("softmax_last: empty last axis");
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.size() / d;
  const bool track = should_record<T>({&x});
  Tensor<T> out = make_result<T>(x.shape(), track);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data().data() + r * d;
    T* o = out.data().data() + r * d;
    const T mx = *std::max_element(in, in + d);
    T total = 0;
    for (std::size_t j = 0; j < d; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < d; ++j) o[j] /= total;
  }
  if (track) {
    Tape<T>::active()->record(out, [sx = x.storage(), so = out.storage(), rows, d]() {
      T* gx = grad_of<T>(*sx).data();
      for (std::size_t r = 0; r < rows; ++r) {
        const T* y = so->data.data() + r * d;
        const T* g = so->grad.data() + r * d;
        T dot = 0;
        for (std::size_t j = 0; j < d; ++j) dot += g[j] * y[j];
        for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += y[j] * (g[j] - dot);
      }
    });
  }
  check_finite(out, "softmax_last");
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const std::size_t d = x.shape().back();
  if (gamma.size() != d || beta.size() != d) {
    throw DimensionError("layer_norm: affine params " + to_string(gamma.shape()) + "/" +
                         to_string(beta.shape()) + " do not match input " + to_string(x.shape()));
  }
  const std::size_t rows = x.size() / d;
  const bool track = should_record<T>({&x, &gamma, &beta});
  Tensor<T> out = make_result<T>(x.shape(), track);
  std::vector<T> xhat(x.size());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data().data() + r * d;
    T mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += in[j];
    mu /= T(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= T(d);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (in[j] - mu) * inv_std[r];
      out[r * d + j] = xhat[r * d + j] * gamma[j] + beta[j];
    }
  }
  if (track) {
    Tape<T>::active()->record(
        out, [sx = x.storage(), sg = gamma.storage(), sb = beta.storage(), so = out.storage(),
              xhat = std::move(xhat), inv_std = std::move(inv_std), rows, d]() {
          const T* g = so->grad.data();
          if (sg->requires_grad) {
            T* gg = grad_of<T>(*sg).data();
            for (std::size_t i = 0; i < rows * d; ++i) gg[i % d] += g[i] * xhat[i];
          }
          if (sb->requires_grad) {
            T* gb = grad_of<T>(*sb).data();
            for (std::size_t i = 0; i < rows * d; ++i) gb[i % d] += g[i];
          }
          if (sx->requires_grad) {
            T* gx = grad_of<T>(*sx).data();
            std::vector<T> dxhat(d);
            for (std::size_t r = 0; r < rows; ++r) {
              T sum_d = 0, sum_dx = 0;
              for (std::size_t j = 0; j < d; ++j) {
                dxhat[j] = g[r * d + j] * sg->data[j];
                sum_d += dxhat[j];
                sum_dx += dxhat[j] * xhat[r * d + j];
              }
              const T k = inv_std[r] / T(d);
              for (std::size_t j = 0; j < d; ++j) {
                gx[r * d + j] += k * (T(d) * dxhat[j] - sum_d - xhat[r * d + j] * sum_dx);
              }
            }
          }
        });
  }
  check_finite(out, "layer_norm");
  return out;
}

// ---- reductions ------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  const bool track = should_record<T>({&x});
  Tensor<T> out = make_result<T>({1}, track);
  T total = 0;
  for (T v : x.data()) total += v;
  out[0] = total;
  if (track) {
    Tape<T>::active()->record(out, [sx = x.storage(), so = out.storage()]() {
      auto gx = grad_of<T>(*sx);
      const T g = so->grad[0];
      for (T& v : gx) v += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / T(x.size()));
}

// ---- layout ----------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " +
                         to_string(shape));
  }
  const bool track = should_record<T>({&x});
  Tensor<T> out = make_result<T>(std::move(shape), track);
  std::copy(x.data().begin(), x.data().end(), out.data().begin());
  if (track) {
    Tape<T>::active()->record(out, [sx = x.storage(), so = out.storage()]() {
      auto gx = grad_of<T>(*sx);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += so->grad[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, std::array<std::size_t, 3> order) {
  if (x.rank() != 3) throw DimensionError("permute: expected rank 3, got " + to_string(x.shape()));
  std::array<bool, 3> seen{};
  for (std::size_t a : order) {
    if (a > 2 || seen[a]) throw ContractError("permute: order is not a permutation of {0,1,2}");
    seen[a] = true;
  }
  const Shape& in = x.shape();
  const std::array<std::size_t, 3> in_stride{in[1] * in[2], in[2], 1};
  const Shape out_shape{in[order[0]], in[order[1]], in[order[2]]};
  const std::array<std::size_t, 3> src_stride{in_stride[order[0]], in_stride[order[1]],
                                              in_stride[order[2]]};
  // index map: flat output position -> flat input position
  std::vector<std::size_t> map(x.size());
  std::size_t pos = 0;
  for (std::size_t i = 0; i < out_shape[0]; ++i) {
    for (std::size_t j = 0; j < out_shape[1]; ++j) {
      for (std::size_t k = 0; k < out_shape[2]; ++k) {
        map[pos++] = i * src_stride[0] + j * src_stride[1] + k * src_stride[2];
      }
    }
  }
  const bool track = should_record<T>({&x});
  Tensor<T> out = make_result<T>(out_shape, track);
  for (std::size_t p = 0; p < map.size(); ++p) out[p] = x[map[p]];
  if (track) {
    Tape<T>::active()->record(out, [sx = x.storage(), so = out.storage(), map = std::move(map)]() {
      T* gx = grad_of<T>(*sx).data();
      for (std::size_t p = 0; p < map.size(); ++p) gx[map[p]] += so->grad[p];
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_cols");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (begin >= end || end > cols) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + to_string(x.shape()));
  }
  const std::size_t w = end - begin;
  const bool track = should_record<T>({&x});
  Tensor<T> out = make_result<T>({rows, w}, track);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.data().data() + r * cols + begin, w, out.data().data() + r * w);
  }
  if (track) {
    Tape<T>::active()->record(out, [sx = x.storage(), so = out.storage(), rows, cols, begin, w]() {
      T* gx = grad_of<T>(*sx).data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < w; ++c) gx[r * cols + begin + c] += so->grad[r * w + c];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = parts.front().dim(0);
  std::size_t cols = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.dim(0) != rows) {
      throw DimensionError("concat_cols: row counts differ (" + std::to_string(rows) + " vs " +
                           std::to_string(p.dim(0)) + ")");
    }
    cols += p.dim(1);
    any_grad = any_grad || p.requires_grad();
  }
  const bool track = any_grad && Tape<T>::active() != nullptr;
  Tensor<T> out = make_result<T>({rows, cols}, track);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(1);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(p.data().data() + r * w, w, out.data().data() + r * cols + offset);
    }
    offset += w;
  }
  if (track) {
    std::vector<StoragePtr<T>> stores;
    for (const auto& p : parts) stores.push_back(p.storage());
    Tape<T>::active()->record(out, [stores = std::move(stores), so = out.storage(), rows, cols]() {
      std::size_t off = 0;
      for (const auto& s : stores) {
        const std::size_t w = s->shape[1];
        if (s->requires_grad) {
          T* g = grad_of<T>(*s).data();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < w; ++c) g[r * w + c] += so->grad[r * cols + off + c];
          }
        }
        off += w;
      }
    });
  }
  return out;
}

// ---- instantiations --------------------------------------------------------

#define MTDA_INSTANTIATE_TENSOR(T)                                                        \
  template class Tensor<T>;                                                               \
  template class Tape<T>;                                                                 \
  template Tensor<T> make_result<T>(Shape, bool);                                         \
  template bool should_record<T>(std::initializer_list<const Tensor<T>*>);                \
  template std::span<T> grad_of<T>(Tensor<T>::Storage&);                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> transpose(const Tensor<T>&);                                         \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> scale(const Tensor<T>&, T);                                          \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> relu(const Tensor<T>&);                                              \
  template Tensor<T> sigmoid(const Tensor<T>&);                                           \
  template Tensor<T> softmax_last(const Tensor<T>&);                                      \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T); \
  template Tensor<T> sum(const Tensor<T>&);                                               \
  template Tensor<T> mean(const Tensor<T>&);                                              \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                    \
  template Tensor<T> permute(const Tensor<T>&, std::array<std::size_t, 3>);               \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);              \
  template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);

MTDA_INSTANTIATE_TENSOR(float)
MTDA_INSTANTIATE_TENSOR(double)

#undef MTDA_INSTANTIATE_TENSOR

}  // namespace mtda
