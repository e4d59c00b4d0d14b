// SPDX-License-Identifier: Apache-2.0
//
// Dual-branch mid-fusion: cross-attention bridge between the global
// (transformer, [T1, Dg]) and local (CNN, [c, t, f]) branches.
//
// Toward the local branch:
//   g' = Linear(g)                      [T1, D]
//   l' = Linear(Rearrange(l))           [t, D]
//   f  = MHCA(query = l', kv = g')      [t, D]
//   f' = FFN(LN(f)) + f
//   out = Rearrange^-1(Linear(f'))      [c, t, f]
//
// The reverse direction swaps query and key/value and projects back to
// [T1, Dg]. Residual combination with the receiving branch is the caller's job.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mtda/nn.hpp"

namespace mtda {

enum class StreamMode { kBToC, kCToB, kBidirectional };

/// "B->C", "C->B", "C<->B".
std::string to_string(StreamMode mode);
/// Accepts the arrow spellings and B_to_C / C_to_B / Bidirectional.
StreamMode parse_stream_mode(const std::string& text);

enum class FusionDirection { kToLocal, kToGlobal };

struct DbmfConfig {
  std::size_t embed_dim = 64;
  std::size_t heads = 4;
  std::size_t global_dim = 64;
  std::size_t channels = 16;
  std::size_t freq_bins = 16;
  std::size_t ffn_hidden = 0;  // 0 means 4 * embed_dim

  std::size_t local_width() const { return channels * freq_bins; }
};

/// [c, t, f] -> [t, c*f]; element (ch, ti, fr) lands at row ti, column ch*f + fr.
template <typename T>
Tensor<T> rearrange_local_to_seq(const Tensor<T>& local);

/// Inverse of rearrange_local_to_seq: [t, c*f] -> [c, t, f].
template <typename T>
Tensor<T> rearrange_seq_to_local(const Tensor<T>& seq, std::size_t channels, std::size_t freq);

template <typename T>
struct DbmfLayer {
  DbmfConfig config;
  FusionDirection direction = FusionDirection::kToLocal;
  Linear<T> proj_global;  // Dg -> D
  Linear<T> proj_local;   // c*f -> D
  Attention<T> cross_attention;
  LayerNorm<T> norm;
  FeedForward<T> ffn;
  Linear<T> proj_out;  // D -> c*f (to local) or D -> Dg (to global)

  static DbmfLayer create(const DbmfConfig& config, FusionDirection direction, Rng& rng);

  /// Dispatches on `direction`. `weights` receives the per-head attention
  /// matrices when given.
  Tensor<T> forward(const Tensor<T>& global, const Tensor<T>& local,
                    std::vector<Tensor<T>>* weights = nullptr) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;
};

/// Global -> local fusion delta with the local layout [c, t, f].
template <typename T>
Tensor<T> dbmf_forward(const DbmfLayer<T>& layer, const Tensor<T>& global, const Tensor<T>& local,
                       std::vector<Tensor<T>>* weights = nullptr);

/// Local -> global fusion delta with the global layout [T1, Dg].
template <typename T>
Tensor<T> dbmf_reverse_forward(const DbmfLayer<T>& layer, const Tensor<T>& global,
                               const Tensor<T>& local, std::vector<Tensor<T>>* weights = nullptr);

}  // namespace mtda
