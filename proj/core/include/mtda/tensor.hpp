// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensors with a reverse-mode differentiation tape.
//
// A Tensor is a cheap handle onto shared storage. Operations record a backward
// closure on the thread's active Tape when at least one operand requires a
// gradient; with no active tape, operations are plain forward computations.
// There is no implicit broadcasting: binary elementwise ops accept equal shapes
// or a single-element operand, everything else goes through explicit ops
// (add_bias, reshape, permute, slice_cols, concat_cols).

#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mtda {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename T>
class Tape;

template <typename T>
class Tensor {
 public:
  struct Storage {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until first accumulated into
    bool requires_grad = false;
    bool leaf = true;
  };

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{1}, value); }
  /// Leaf tensor that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<T> values);

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  std::size_t rank() const { return s_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return s_->shape.at(axis); }
  std::size_t size() const { return s_->data.size(); }

  std::span<T> data() { return s_->data; }
  std::span<const T> data() const { return s_->data; }
  std::vector<T>& values() { return s_->data; }
  const std::vector<T>& values() const { return s_->data; }

  T& operator[](std::size_t i) { return s_->data[i]; }
  T operator[](std::size_t i) const { return s_->data[i]; }
  T& operator()(std::size_t r, std::size_t c) { return s_->data[r * s_->shape[1] + c]; }
  T operator()(std::size_t r, std::size_t c) const { return s_->data[r * s_->shape[1] + c]; }
  T item() const;

  bool requires_grad() const { return s_ && s_->requires_grad; }
  void set_requires_grad(bool on) { s_->requires_grad = on; }
  bool is_leaf() const { return s_->leaf; }

  bool has_grad() const { return !s_->grad.empty(); }
  /// Gradient buffer; empty span when nothing has been accumulated yet.
  std::span<const T> grad() const { return s_->grad; }
  std::span<T> mutable_grad();
  void zero_grad();

  /// Deep copy of the values; the copy is a leaf without gradient tracking.
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return s_ == other.s_; }
  const std::shared_ptr<Storage>& storage() const { return s_; }

 private:
  std::shared_ptr<Storage> s_;
};

/// Ordered record of differentiable operations for one forward pass.
///
/// Tapes are thread-confined. Activate one with Tape::Scope; nested scopes
/// restore the previous tape on exit.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  /// Appends a node. `backward` reads output's grad and accumulates into the
  /// op's inputs.
  void record(const Tensor<T>& output, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and runs every node once in reverse order.
  /// Intermediate gradients are reset first, so repeated calls accumulate
  /// only into leaves.
  void backward(const Tensor<T>& loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  static Tape* active();

  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  /// Deactivates tape recording on this thread for its lifetime.
  class Pause {
   public:
    Pause();
    ~Pause();
    Pause(const Pause&) = delete;
    Pause& operator=(const Pause&) = delete;

   private:
    Tape* previous_;
  };

 private:
  struct Node {
    std::shared_ptr<typename Tensor<T>::Storage> output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

/// Allocates an op output. `tracked` marks it as requiring grad (non-leaf).
template <typename T>
Tensor<T> make_result(Shape shape, bool tracked);

/// True when an active tape exists and any operand requires grad.
template <typename T>
bool should_record(std::initializer_list<const Tensor<T>*> operands);

/// Zero-filled grad buffer of the storage, allocated on first use.
template <typename T>
std::span<T> grad_of(typename Tensor<T>::Storage& s);

// ---- operations ------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);
/// x[r, c] + bias[c] for a bias whose length equals the last extent of x.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> softmax_last(const Tensor<T>& x);
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5));

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

/// Same values, new extents (element count must match).
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
/// Rank-3 axis permutation: out axis i is input axis order[i].
template <typename T>
Tensor<T> permute(const Tensor<T>& x, std::array<std::size_t, 3> order);
/// Columns [begin, end) of a matrix.
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end);
/// Matrices with equal row counts, joined along columns.
template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);

}  // namespace mtda
