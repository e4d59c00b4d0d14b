// SPDX-License-Identifier: Apache-2.0
//
// Hot paths at the default model geometry (t=50, D=64, 32 bins).

#include <benchmark/benchmark.h>

#include <random>

#include "mtda/data.hpp"
#include "mtda/losses.hpp"
#include "mtda/m3a.hpp"
#include "mtda/model.hpp"
#include "mtda/optim.hpp"
#include "mtda/train.hpp"

namespace mtda {
namespace {

Tensor<float> random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                            bool parameter = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(rows * cols);
  for (float& x : v) x = u(rng);
  return parameter ? Tensor<float>::parameter({rows, cols}, std::move(v))
                   : Tensor<float>({rows, cols}, std::move(v));
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(50, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).data().data());
  state.SetItemsProcessed(state.iterations() * 50 * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_M3ABlockForward(benchmark::State& state) {
  Rng rng(3);
  const auto block = M3ABlock<float>::create(M3AConfig{}, rng);
  const auto x = random_matrix(50, 64, 4);
  for (auto _ : state) benchmark::DoNotOptimize(block.forward(x).data().data());
}
BENCHMARK(BM_M3ABlockForward);

void BM_M3ABlockForwardBackward(benchmark::State& state) {
  Rng rng(3);
  const auto block = M3ABlock<float>::create(M3AConfig{}, rng);
  ParamList<float> params;
  block.collect("block", params);
  const auto x = random_matrix(50, 64, 4, true);
  for (auto _ : state) {
    Tape<float> tape;
    Tape<float>::Scope scope(tape);
    tape.backward(sum(block.forward(x)));
    zero_grads(params);
  }
}
BENCHMARK(BM_M3ABlockForwardBackward);

void BM_ModelForward(benchmark::State& state) {
  const ModelConfig config;
  const auto model = DualBranchModel<float>::create(config, 5);
  const auto x = random_matrix(config.input_frames, config.input_bins, 6);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, NormMode::kEval).data().data());
}
BENCHMARK(BM_ModelForward);

// One labelled clip: forward, masked BCE, backward, Adam.
void BM_TrainStep(benchmark::State& state) {
  const DataConfig data;
  ModelConfig config;
  config.hard_classes = data.hard_classes;
  config.soft_classes = data.soft_classes;
  const auto model = DualBranchModel<float>::create(config, 7);
  const auto params = model.parameters();
  const Clip clip = generate_clip(make_scenario(data, Subset::kHard), 8);
  const Tensor<float> x({clip.frames, clip.bins}, clip.features);
  const SupervisedTarget target = supervised_target(clip, data.hard_classes, data.soft_classes);
  AdamState adam;
  for (auto _ : state) {
    Tape<float> tape;
    {
      Tape<float>::Scope scope(tape);
      tape.backward(bce_loss(model.forward(x, NormMode::kTrain), target.targets, target.mask));
    }
    adam_step(params, adam, AdamConfig{});
    zero_grads(params);
  }
}
BENCHMARK(BM_TrainStep);

}  // namespace
}  // namespace mtda

BENCHMARK_MAIN();
