// SPDX-License-Identifier: Apache-2.0

#include "mtda/optim.hpp"

#include <cmath>

#include "mtda/error.hpp"

namespace mtda {

template <typename T>
void adam_step(const ParamList<T>& params, AdamState& state, const AdamConfig& config) {
  if (state.step == 0 && state.m.empty()) {
    for (const auto& [name, p] : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw ContractError("adam_step: optimizer state does not match the parameter list");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T> p = params[i].second;
    std::vector<double>& m = state.m[i];
    std::vector<double>& v = state.v[i];
    if (m.size() != p.size()) {
      throw ContractError("adam_step: size of '" + params[i].first + "' changed");
    }
    const std::span<const T> g = p.grad();
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g.empty() ? 0.0 : static_cast<double>(g[j]);
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * gj;
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * gj * gj;
      const double update = config.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config.eps);
      p[j] = static_cast<T>(static_cast<double>(p[j]) - update);
    }
  }
}

template <typename T>
void ema_update(const ParamList<T>& teacher, const ParamList<T>& student, double decay) {
  if (!(decay >= 0.0 && decay <= 1.0)) throw ContractError("ema_update: decay outside [0, 1]");
  if (teacher.size() != student.size()) {
    throw ContractError("ema_update: teacher has " + std::to_string(teacher.size()) +
                        " tensors, student " + std::to_string(student.size()));
  }
  const T a = static_cast<T>(decay), b = static_cast<T>(1.0 - decay);
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    Tensor<T> t = teacher[i].second;
    const Tensor<T>& s = student[i].second;
    if (teacher[i].first != student[i].first || t.shape() != s.shape()) {
      throw ContractError("ema_update: mismatch at '" + teacher[i].first + "' vs '" +
                          student[i].first + "'");
    }
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = a * t[j] + b * s[j];
  }
}

template <typename T>
void zero_grads(const ParamList<T>& params) {
  for (const auto& [name, p] : params) {
    Tensor<T> handle = p;
    handle.zero_grad();
  }
}

template void adam_step(const ParamList<float>&, AdamState&, const AdamConfig&);
template void adam_step(const ParamList<double>&, AdamState&, const AdamConfig&);
template void ema_update(const ParamList<float>&, const ParamList<float>&, double);
template void ema_update(const ParamList<double>&, const ParamList<double>&, double);
template void zero_grads(const ParamList<float>&);
template void zero_grads(const ParamList<double>&);

}  // namespace mtda
