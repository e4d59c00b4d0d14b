// SPDX-License-Identifier: Apache-2.0

#include "mtda/model.hpp"

#include <algorithm>
#include <map>

#include "mtda/conv_ops.hpp"
#include "mtda/error.hpp"

namespace mtda {

// ---- ModelConfig -----------------------------------------------------------

std::size_t ModelConfig::freq_after(std::size_t block) const {
  std::size_t f = input_bins;
  for (std::size_t k = 0; k < block; ++k) f /= 2;
  return f;
}

M3AConfig ModelConfig::m3a() const {
  M3AConfig m;
  m.model_dim = model_dim;
  m.heads = heads;
  m.adapters = adapters;
  m.ffn_hidden = ffn_hidden;
  return m;
}

DbmfConfig ModelConfig::dbmf(std::size_t stage) const {
  DbmfConfig d;
  d.embed_dim = fusion_dim ? fusion_dim : model_dim;
  d.heads = fusion_heads ? fusion_heads : heads;
  d.global_dim = model_dim;
  d.channels = cnn_channels.at(stage - 1);
  d.freq_bins = freq_after(stage);
  return d;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (input_frames == 0 || input_bins == 0) fail("input grid must be non-empty");
  if (cnn_blocks == 0) fail("at least one CNN block is required");
  if (transformer_blocks != 2 * cnn_blocks) {
    fail("transformer_blocks (" + std::to_string(transformer_blocks) +
         ") must be twice cnn_blocks (" + std::to_string(cnn_blocks) + ")");
  }
  if (cnn_channels.size() != cnn_blocks) {
    fail("cnn_channels lists " + std::to_string(cnn_channels.size()) + " entries for " +
         std::to_string(cnn_blocks) + " CNN blocks");
  }
  if (std::find(cnn_channels.begin(), cnn_channels.end(), 0u) != cnn_channels.end()) {
    fail("cnn_channels entries must be positive");
  }
  for (std::size_t k = 0; k < cnn_blocks; ++k) {
    if (freq_after(k) < 2) {
      fail("CNN block " + std::to_string(k + 1) + " receives " + std::to_string(freq_after(k)) +
           " frequency bins; pooling needs at least 2");
    }
  }
  if (model_dim == 0 || heads == 0 || model_dim % heads != 0) {
    fail("model_dim " + std::to_string(model_dim) + " not divisible by heads " +
         std::to_string(heads));
  }
  const std::size_t fd = fusion_dim ? fusion_dim : model_dim;
  const std::size_t fh = fusion_heads ? fusion_heads : heads;
  if (fd % fh != 0) fail("fusion_dim not divisible by fusion_heads");
  for (const auto& a : adapters) a.hidden_dim(model_dim);
  if (hard_classes + soft_classes == 0) fail("no output classes");
}

std::vector<std::pair<std::size_t, std::size_t>> fusion_schedule(std::size_t transformer_blocks,
                                                                 std::size_t cnn_blocks) {
  if (transformer_blocks != 2 * cnn_blocks) {
    throw ConfigError("fusion schedule needs twice as many transformer blocks as CNN blocks, got " +
                      std::to_string(transformer_blocks) + " and " + std::to_string(cnn_blocks));
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t k = 1; k <= cnn_blocks; ++k) pairs.emplace_back(2 * k, k);
  return pairs;
}

// ---- CnnBlock --------------------------------------------------------------

template <typename T>
CnnBlock<T> CnnBlock<T>::create(std::size_t c_in, std::size_t c_out, Rng& rng) {
  CnnBlock b;
  b.kernel = fan_in_uniform<T>({c_out, c_in, 3, 3}, c_in * 9, rng);
  b.gamma = Tensor<T>::parameter({c_out}, std::vector<T>(c_out, T(1)));
  b.beta = Tensor<T>::parameter({c_out}, std::vector<T>(c_out, T(0)));
  b.running_mean = Tensor<T>({c_out}, T(0));
  b.running_var = Tensor<T>({c_out}, T(1));
  return b;
}

template <typename T>
Tensor<T> CnnBlock<T>::forward(const Tensor<T>& x, NormMode mode) const {
  const Tensor<T> conv = conv2d_same(x, kernel, Tensor<T>());
  Tensor<T> normed;
  if (mode == NormMode::kEval) {
    normed =
        batch_norm_fixed_stats(conv, gamma, beta, running_mean.values(), running_var.values(), eps);
  } else {
    ChannelStats<T> stats;
    normed = batch_norm_batch_stats(conv, gamma, beta, eps, &stats);
    if (mode == NormMode::kTrain) {
      // Buffers are shared handles; update them in place.
      Tensor<T> rm = running_mean, rv = running_var;
      const T n = static_cast<T>(conv.dim(1) * conv.dim(2));
      const T unbias = n > T(1) ? n / (n - T(1)) : T(1);
      for (std::size_t c = 0; c < rm.size(); ++c) {
        rm[c] = (T(1) - momentum) * rm[c] + momentum * stats.mean[c];
        rv[c] = (T(1) - momentum) * rv[c] + momentum * stats.var[c] * unbias;
      }
    }
  }
  return avg_pool_freq2(relu(normed));
}

template <typename T>
void CnnBlock<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.emplace_back(prefix + ".kernel", kernel);
  out.emplace_back(prefix + ".bn.gamma", gamma);
  out.emplace_back(prefix + ".bn.beta", beta);
}

template <typename T>
void CnnBlock<T>::collect_buffers(const std::string& prefix, ParamList<T>& out) const {
  out.emplace_back(prefix + ".bn.running_mean", running_mean);
  out.emplace_back(prefix + ".bn.running_var", running_var);
}

// ---- DualBranchModel -------------------------------------------------------

template <typename T>
DualBranchModel<T> DualBranchModel<T>::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  DualBranchModel m;
  m.config_ = config;
  m.embed_ = Linear<T>::create(config.input_bins, config.model_dim, true, rng);
  const M3AConfig m3a = config.m3a();
  for (std::size_t i = 0; i < config.transformer_blocks; ++i) {
    m.blocks_.push_back(M3ABlock<T>::create(m3a, rng));
  }
  std::size_t c_in = 1;
  for (std::size_t k = 0; k < config.cnn_blocks; ++k) {
    m.cnn_.push_back(CnnBlock<T>::create(c_in, config.cnn_channels[k], rng));
    c_in = config.cnn_channels[k];
  }
  const bool to_local = config.stream != StreamMode::kCToB;
  const bool to_global = config.stream != StreamMode::kBToC;
  for (const auto& [tb, cb] : fusion_schedule(config.transformer_blocks, config.cnn_blocks)) {
    FusionPoint<T> fp;
    fp.transformer_block = tb;
    fp.cnn_block = cb;
    const DbmfConfig dc = config.dbmf(cb);
    if (to_local) {
      fp.to_local = DbmfLayer<T>::create(dc, FusionDirection::kToLocal, rng);
      fp.has_to_local = true;
    }
    if (to_global) {
      fp.to_global = DbmfLayer<T>::create(dc, FusionDirection::kToGlobal, rng);
      fp.has_to_global = true;
    }
    m.fusion_.push_back(std::move(fp));
  }
  const std::size_t local_width = config.cnn_channels.back() * config.freq_after(config.cnn_blocks);
  m.head_ = Linear<T>::create(local_width + config.model_dim, config.num_classes(), true, rng);
  return m;
}

template <typename T>
Tensor<T> DualBranchModel<T>::forward(const Tensor<T>& features, NormMode mode,
                                      ForwardTrace<T>* trace) const {
  if (features.rank() != 2 || features.dim(0) != config_.input_frames ||
      features.dim(1) != config_.input_bins) {
    throw DimensionError("model input " + to_string(features.shape()) +
                         " does not match configured [" + std::to_string(config_.input_frames) +
                         "x" + std::to_string(config_.input_bins) + "]");
  }
  const std::size_t frames = features.dim(0);
  Tensor<T> global = embed_.forward(features);
  Tensor<T> local = reshape(features, {1, frames, features.dim(1)});

  auto run_block = [&](std::size_t index) {
    std::vector<Tensor<T>>* capture =
        (trace != nullptr && index == 0) ? &trace->first_block_adapters : nullptr;
    global = blocks_[index].forward(global, capture);
  };

  for (std::size_t k = 0; k < cnn_.size(); ++k) {
    run_block(2 * k);
    if (trace != nullptr) trace->global_states.push_back(global);
    run_block(2 * k + 1);
    local = cnn_[k].forward(local, mode);

    if (config_.fusion_enabled) {
      const FusionPoint<T>& fp = fusion_[k];
      if (global.dim(0) != local.dim(1)) {
        throw DimensionError("fusion point " + std::to_string(k + 1) + ": global length " +
                             std::to_string(global.dim(0)) + " vs local length " +
                             std::to_string(local.dim(1)));
      }
      if (trace != nullptr) {
        trace->fusions.push_back({fp.transformer_block, fp.cnn_block});
        trace->fusion_lengths.push_back(local.dim(1));
      }
      Tensor<T> delta_local, delta_global;
      if (fp.has_to_local) delta_local = dbmf_forward(fp.to_local, global, local);
      if (fp.has_to_global) delta_global = dbmf_reverse_forward(fp.to_global, global, local);
      if (trace != nullptr)
        trace->dbmf_calls += (fp.has_to_local ? 1 : 0) + (fp.has_to_global ? 1 : 0);
      if (delta_local.defined()) local = add(local, delta_local);
      if (delta_global.defined()) global = add(global, delta_global);
    }
    if (trace != nullptr) {
      trace->global_states.push_back(global);
      trace->local_states.push_back(local);
    }
  }
  const Tensor<T> joint = concat_cols<T>({rearrange_local_to_seq(local), global});
  return sigmoid(head_.forward(joint));
}

template <typename T>
DualBranchModel<T> DualBranchModel<T>::with_fusion(bool enabled) const {
  DualBranchModel view = *this;
  view.config_.fusion_enabled = enabled;
  return view;
}

template <typename T>
DualBranchModel<T> DualBranchModel<T>::clone() const {
  DualBranchModel copy = create(config_, 0);
  copy_matching(parameters(), copy.parameters());
  copy_matching(buffers(), copy.buffers());
  return copy;
}

template <typename T>
ParamList<T> DualBranchModel<T>::parameters() const {
  ParamList<T> out;
  embed_.collect("embed", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect("tf" + std::to_string(i + 1), out);
  }
  for (std::size_t k = 0; k < cnn_.size(); ++k) cnn_[k].collect("cnn" + std::to_string(k + 1), out);
  for (const auto& fp : fusion_) {
    const std::string prefix = "fuse" + std::to_string(fp.cnn_block);
    if (fp.has_to_local) fp.to_local.collect(prefix + ".to_local", out);
    if (fp.has_to_global) fp.to_global.collect(prefix + ".to_global", out);
  }
  head_.collect("head", out);
  return out;
}

template <typename T>
ParamList<T> DualBranchModel<T>::buffers() const {
  ParamList<T> out;
  for (std::size_t k = 0; k < cnn_.size(); ++k) {
    cnn_[k].collect_buffers("cnn" + std::to_string(k + 1), out);
  }
  return out;
}

template <typename T>
std::size_t copy_matching(const ParamList<T>& from, const ParamList<T>& to) {
  std::map<std::string, const Tensor<T>*> index;
  for (const auto& [name, t] : from) index[name] = &t;
  std::size_t copied = 0;
  for (const auto& [name, dst] : to) {
    auto it = index.find(name);
    if (it == index.end() || it->second->shape() != dst.shape()) continue;
    Tensor<T> handle = dst;
    std::copy(it->second->data().begin(), it->second->data().end(), handle.data().begin());
    ++copied;
  }
  return copied;
}

template <typename From, typename To>
void convert_parameters(const ParamList<From>& from, const ParamList<To>& to) {
  std::map<std::string, const Tensor<From>*> index;
  for (const auto& [name, t] : from) index[name] = &t;
  for (const auto& [name, dst] : to) {
    auto it = index.find(name);
    if (it == index.end()) throw ContractError("convert_parameters: missing tensor '" + name + "'");
    if (it->second->shape() != dst.shape()) {
      throw DimensionError("convert_parameters: shape mismatch for '" + name + "'");
    }
    Tensor<To> handle = dst;
    for (std::size_t i = 0; i < handle.size(); ++i) {
      handle[i] = static_cast<To>((*it->second)[i]);
    }
  }
}

template struct CnnBlock<float>;
template struct CnnBlock<double>;
template class DualBranchModel<float>;
template class DualBranchModel<double>;
template std::size_t copy_matching(const ParamList<float>&, const ParamList<float>&);
template std::size_t copy_matching(const ParamList<double>&, const ParamList<double>&);
template void convert_parameters(const ParamList<float>&, const ParamList<double>&);
template void convert_parameters(const ParamList<double>&, const ParamList<float>&);

}  // namespace mtda
