// SPDX-License-Identifier: Apache-2.0
//
// Dual-branch sound event detector: a transformer stack of M3A blocks over
// per-frame embeddings (global branch) next to a CNN over the time-frequency
// grid (local branch), bridged by DBMF fusion after every second transformer
// block and every CNN block.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mtda/dbmf.hpp"
#include "mtda/m3a.hpp"
#include "mtda/nn.hpp"

namespace mtda {

struct ModelConfig {
  std::size_t input_frames = 50;
  std::size_t input_bins = 32;
  std::size_t transformer_blocks = 8;
  std::size_t cnn_blocks = 4;
  std::size_t model_dim = 64;
  std::size_t heads = 4;
  std::vector<std::size_t> cnn_channels{16, 32, 32, 64};
  std::size_t ffn_hidden = 0;  // 0 means 4 * model_dim
  std::vector<AdapterSpec> adapters = adapter_bank(2);
  StreamMode stream = StreamMode::kBToC;
  bool fusion_enabled = true;
  std::size_t fusion_dim = 0;    // 0 means model_dim
  std::size_t fusion_heads = 0;  // 0 means heads
  std::size_t hard_classes = 5;
  std::size_t soft_classes = 5;

  std::size_t num_classes() const { return hard_classes + soft_classes; }
  /// Frequency bins after CNN block `block` (1-indexed); 0 gives the input.
  std::size_t freq_after(std::size_t block) const;
  M3AConfig m3a() const;
  /// Fusion geometry at schedule point `stage` (1-indexed CNN block).
  DbmfConfig dbmf(std::size_t stage) const;
  /// Throws ConfigError on any inconsistency.
  void validate() const;
};

/// 1-indexed (transformer block, CNN block) pairs at which fusion fires.
std::vector<std::pair<std::size_t, std::size_t>> fusion_schedule(std::size_t transformer_blocks,
                                                                 std::size_t cnn_blocks);

enum class NormMode {
  kTrain,        // batch statistics, running statistics updated
  kTrainFrozen,  // batch statistics, running statistics untouched
  kEval,         // running statistics
};

/// conv3x3 -> batch norm -> ReLU -> average pool over frequency.
template <typename T>
struct CnnBlock {
  Tensor<T> kernel;  // [c_out, c_in, 3, 3]
  Tensor<T> gamma, beta;
  Tensor<T> running_mean, running_var;  // buffers, never differentiated
  T momentum = T(0.1);
  T eps = T(1e-5);

  static CnnBlock create(std::size_t c_in, std::size_t c_out, Rng& rng);
  /// [c_in, t, f] -> [c_out, t, f/2].
  Tensor<T> forward(const Tensor<T>& x, NormMode mode) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;
  void collect_buffers(const std::string& prefix, ParamList<T>& out) const;
};

template <typename T>
struct FusionPoint {
  std::size_t transformer_block = 0;  // 1-indexed
  std::size_t cnn_block = 0;          // 1-indexed
  DbmfLayer<T> to_local;              // used by B->C and C<->B
  DbmfLayer<T> to_global;             // used by C->B and C<->B
  bool has_to_local = false;
  bool has_to_global = false;
};

struct FusionEvent {
  std::size_t transformer_block;
  std::size_t cnn_block;
  bool operator==(const FusionEvent&) const = default;
};

/// Optional instrumentation filled by DualBranchModel::forward.
template <typename T>
struct ForwardTrace {
  std::vector<FusionEvent> fusions;
  std::size_t dbmf_calls = 0;
  std::vector<Tensor<T>> global_states;         // after each transformer block (and its fusion)
  std::vector<Tensor<T>> local_states;          // after each CNN block (and its fusion)
  std::vector<Tensor<T>> first_block_adapters;  // unscaled adapter outputs of block 1
  std::vector<std::size_t> fusion_lengths;      // sequence length t seen at each fusion
};

template <typename T>
class DualBranchModel {
 public:
  static DualBranchModel create(const ModelConfig& config, std::uint64_t seed);

  /// features: [t, f_in] -> frame scores [t, hard + soft] in (0, 1).
  /// NormMode::kTrain also updates the CNN running statistics.
  Tensor<T> forward(const Tensor<T>& features, NormMode mode,
                    ForwardTrace<T>* trace = nullptr) const;

  const ModelConfig& config() const { return config_; }
  /// Shallow view sharing parameters but with a different fusion switch.
  DualBranchModel with_fusion(bool enabled) const;
  /// Independent copy of every parameter and buffer.
  DualBranchModel clone() const;

  ParamList<T> parameters() const;
  ParamList<T> buffers() const;

  Linear<T>& head() { return head_; }
  std::vector<M3ABlock<T>>& blocks() { return blocks_; }
  std::vector<FusionPoint<T>>& fusion_points() { return fusion_; }
  std::vector<CnnBlock<T>>& cnn() { return cnn_; }

 private:
  ModelConfig config_;
  Linear<T> embed_;
  std::vector<M3ABlock<T>> blocks_;
  std::vector<CnnBlock<T>> cnn_;
  std::vector<FusionPoint<T>> fusion_;
  Linear<T> head_;
};

/// Copies values of every same-named, same-shaped tensor from `from` into
/// `to`; returns how many were copied.
template <typename T>
std::size_t copy_matching(const ParamList<T>& from, const ParamList<T>& to);

/// Converts parameter values between precisions, matched by name.
template <typename From, typename To>
void convert_parameters(const ParamList<From>& from, const ParamList<To>& to);

}  // namespace mtda
