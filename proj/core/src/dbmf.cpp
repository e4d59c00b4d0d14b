// SPDX-License-Identifier: Apache-2.0

#include "mtda/dbmf.hpp"

#include "mtda/error.hpp"

namespace mtda {

std::string to_string(StreamMode mode) {
  switch (mode) {
    case StreamMode::kBToC:
      return "B->C";
    case StreamMode::kCToB:
      return "C->B";
    case StreamMode::kBidirectional:
      return "C<->B";
  }
  return "?";
}

StreamMode parse_stream_mode(const std::string& text) {
  if (text == "B->C" || text == "B_to_C") return StreamMode::kBToC;
  if (text == "C->B" || text == "C_to_B") return StreamMode::kCToB;
  if (text == "C<->B" || text == "B<->C" || text == "Bidirectional") {
    return StreamMode::kBidirectional;
  }
  throw ConfigError("unknown stream mode '" + text + "' (expected B->C, C->B or C<->B)");
}

template <typename T>
Tensor<T> rearrange_local_to_seq(const Tensor<T>& local) {
  if (local.rank() != 3) {
    throw DimensionError("rearrange: expected [c, t, f], got " + to_string(local.shape()));
  }
  const std::size_t c = local.dim(0), t = local.dim(1), f = local.dim(2);
  return reshape(permute(local, {1, 0, 2}), {t, c * f});
}

template <typename T>
Tensor<T> rearrange_seq_to_local(const Tensor<T>& seq, std::size_t channels, std::size_t freq) {
  if (seq.rank() != 2 || channels == 0 || freq == 0 || seq.dim(1) != channels * freq) {
    throw DimensionError("rearrange: sequence " + to_string(seq.shape()) +
                         " cannot be split into " + std::to_string(channels) + " channels x " +
                         std::to_string(freq) + " bins");
  }
  const std::size_t t = seq.dim(0);
  return permute(reshape(seq, {t, channels, freq}), {1, 0, 2});
}

template <typename T>
DbmfLayer<T> DbmfLayer<T>::create(const DbmfConfig& config, FusionDirection direction, Rng& rng) {
  const std::size_t d = config.embed_dim;
  DbmfLayer layer;
  layer.config = config;
  layer.direction = direction;
  layer.proj_global = Linear<T>::create(config.global_dim, d, true, rng);
  layer.proj_local = Linear<T>::create(config.local_width(), d, true, rng);
  layer.cross_attention = Attention<T>::create(d, config.heads, rng);
  layer.norm = LayerNorm<T>::create(d);
  layer.ffn = FeedForward<T>::create(d, config.ffn_hidden ? config.ffn_hidden : 4 * d, rng);
  const std::size_t out_dim =
      direction == FusionDirection::kToLocal ? config.local_width() : config.global_dim;
  layer.proj_out = Linear<T>::create(d, out_dim, true, rng);
  return layer;
}

namespace {

template <typename T>
struct Projected {
  Tensor<T> global;
  Tensor<T> local;
};

template <typename T>
Projected<T> project_inputs(const DbmfLayer<T>& layer, const Tensor<T>& global,
                            const Tensor<T>& local) {
  const DbmfConfig& cfg = layer.config;
  if (global.rank() != 2 || global.dim(1) != cfg.global_dim) {
    throw DimensionError("dbmf global projection: expected [T1, " + std::to_string(cfg.global_dim) +
                         "], got " + to_string(global.shape()));
  }
  if (local.rank() != 3 || local.dim(0) != cfg.channels || local.dim(2) != cfg.freq_bins) {
    throw DimensionError("dbmf local projection: expected [" + std::to_string(cfg.channels) +
                         ", t, " + std::to_string(cfg.freq_bins) + "], got " +
                         to_string(local.shape()));
  }
  return {layer.proj_global.forward(global),
          layer.proj_local.forward(rearrange_local_to_seq(local))};
}

template <typename T>
Tensor<T> attend_and_refine(const DbmfLayer<T>& layer, const Tensor<T>& query, const Tensor<T>& kv,
                            std::vector<Tensor<T>>* weights) {
  const Tensor<T> fused = layer.cross_attention.cross_attend(query, kv, weights);
  return add(layer.ffn.forward(layer.norm.forward(fused)), fused);
}

}  // namespace

template <typename T>
Tensor<T> dbmf_forward(const DbmfLayer<T>& layer, const Tensor<T>& global, const Tensor<T>& local,
                       std::vector<Tensor<T>>* weights) {
  if (layer.direction != FusionDirection::kToLocal) {
    throw ContractError("dbmf_forward called on a layer built for the global direction");
  }
  const Projected<T> p = project_inputs(layer, global, local);
  const Tensor<T> refined = attend_and_refine(layer, p.local, p.global, weights);
  return rearrange_seq_to_local(layer.proj_out.forward(refined), layer.config.channels,
                                layer.config.freq_bins);
}

template <typename T>
Tensor<T> dbmf_reverse_forward(const DbmfLayer<T>& layer, const Tensor<T>& global,
                               const Tensor<T>& local, std::vector<Tensor<T>>* weights) {
  if (layer.direction != FusionDirection::kToGlobal) {
    throw ContractError("dbmf_reverse_forward called on a layer built for the local direction");
  }
  const Projected<T> p = project_inputs(layer, global, local);
  const Tensor<T> refined = attend_and_refine(layer, p.global, p.local, weights);
  return layer.proj_out.forward(refined);
}

template <typename T>
Tensor<T> DbmfLayer<T>::forward(const Tensor<T>& global, const Tensor<T>& local,
                                std::vector<Tensor<T>>* weights) const {
  return direction == FusionDirection::kToLocal
             ? dbmf_forward(*this, global, local, weights)
             : dbmf_reverse_forward(*this, global, local, weights);
}

template <typename T>
void DbmfLayer<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  proj_global.collect(prefix + ".proj_global", out);
  proj_local.collect(prefix + ".proj_local", out);
  cross_attention.collect(prefix + ".xattn", out);
  norm.collect(prefix + ".ln", out);
  ffn.collect(prefix + ".ffn", out);
  proj_out.collect(prefix + ".proj_out", out);
}

#define MTDA_INSTANTIATE_DBMF(T)                                                                   \
  template struct DbmfLayer<T>;                                                                    \
  template Tensor<T> rearrange_local_to_seq(const Tensor<T>&);                                     \
  template Tensor<T> rearrange_seq_to_local(const Tensor<T>&, std::size_t, std::size_t);           \
  template Tensor<T> dbmf_forward(const DbmfLayer<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                  std::vector<Tensor<T>>*);                                        \
  template Tensor<T> dbmf_reverse_forward(const DbmfLayer<T>&, const Tensor<T>&, const Tensor<T>&, \
                                          std::vector<Tensor<T>>*);

MTDA_INSTANTIATE_DBMF(float)
MTDA_INSTANTIATE_DBMF(double)

#undef MTDA_INSTANTIATE_DBMF

}  // namespace mtda
