// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "mtda/error.hpp"
#include "mtda/m3a.hpp"
#include "support.hpp"

namespace mtda {
namespace {

using test::random_tensor;
using test::Rng64;

NamedTensors named(const ParamList<double>& params) { return {params.begin(), params.end()}; }

M3AConfig small_config(std::size_t dim = 16, std::size_t heads = 4) {
  M3AConfig c;
  c.model_dim = dim;
  c.heads = heads;
  return c;
}

void set_scales(M3ABlock<double>& block, std::vector<double> scales) {
  for (std::size_t i = 0; i < block.adapters.size(); ++i) block.adapters[i].scale[0] = scales[i];
}

TEST(AdapterSpec, HiddenDimRoundsAndRejectsEmpty) {
  EXPECT_EQ(AdapterSpec::long_term().hidden_dim(16), 64u);
  EXPECT_EQ(AdapterSpec::short_term().hidden_dim(16), 4u);
  EXPECT_EQ(AdapterSpec::short_term(0.5).hidden_dim(3), 2u);
  EXPECT_THROW(AdapterSpec::short_term(0.01).hidden_dim(16), ConfigError);
}

TEST(AdapterSpec, BankComposition) {
  const auto l = AdapterSpec::long_term(), s = AdapterSpec::short_term();
  EXPECT_EQ(adapter_bank(1), (std::vector<AdapterSpec>{l}));
  EXPECT_EQ(adapter_bank(2), (std::vector<AdapterSpec>{l, s}));
  EXPECT_EQ(adapter_bank(3), (std::vector<AdapterSpec>{l, s, l}));
  EXPECT_TRUE(adapter_bank(0).empty());
}

TEST(Adapter, ReluAdapterOfZeroIsZero) {
  Rng rng(1);
  const auto a = AdapterLayer<double>::create(16, AdapterSpec::long_term(), rng);
  const auto y = a.forward(Tensor<double>({3, 16}, 0.0));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Adapter, SoftmaxAdapterOfZeroIsMeanOfOutputRows) {
  Rng rng(2);
  const auto a = AdapterLayer<double>::create(16, AdapterSpec::short_term(), rng);
  ASSERT_EQ(a.w_b.dim(0), 4u);
  const auto y = a.forward(Tensor<double>({2, 16}, 0.0));
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t c = 0; c < 16; ++c) {
      double m = 0;
      for (std::size_t h = 0; h < 4; ++h) m += a.w_b(h, c) / 4.0;
      EXPECT_NEAR(y(t, c), m, 1e-12);
    }
  }
}

TEST(Adapter, ScaleIsNotApplied) {
  Rng rng(3);
  auto a = AdapterLayer<double>::create(8, AdapterSpec::long_term(), rng);
  Rng64 r(4);
  const auto x = random_tensor<double>({3, 8}, r, -1, 1, false);
  const auto before = a.forward(x);
  a.scale[0] = 7.0;
  EXPECT_EQ(a.forward(x).values(), before.values());
  EXPECT_THROW(a.forward(Tensor<double>({3, 9})), DimensionError);
}

TEST(Adapter, LongTermGradientsPass) {
  Rng rng(5);
  const auto a = AdapterLayer<double>::create(16, AdapterSpec::long_term(4.0), rng);
  Rng64 r(6);
  auto x = random_tensor<double>({8, 16}, r);
  auto w = random_tensor<double>({8, 16}, r, -1, 1, false);
  const NamedTensors params{{"w_a", a.w_a}, {"w_b", a.w_b}};
  EXPECT_TRUE(test::passes(
      grad_check([&] { return test::probe_loss(a.forward(x), w); }, params, test::tol(1e-5))));
}

TEST(Adapter, ShortTermGradientsPass) {
  Rng rng(7);
  const auto a = AdapterLayer<double>::create(16, AdapterSpec::short_term(), rng);
  Rng64 r(8);
  auto x = random_tensor<double>({8, 16}, r);
  auto w = random_tensor<double>({8, 16}, r, -1, 1, false);
  const NamedTensors params{{"w_a", a.w_a}, {"w_b", a.w_b}, {"x", x}};
  EXPECT_TRUE(test::passes(
      grad_check([&] { return test::probe_loss(a.forward(x), w); }, params, test::tol(1e-5))));
}

TEST(M3AFfn, ZeroScalesGiveFfnExactly) {
  Rng rng(9);
  const auto block = M3ABlock<double>::create(small_config(), rng);
  Rng64 r(10);
  const auto x = random_tensor<double>({6, 16}, r, -1, 1, false);
  const auto y = m3a_ffn_forward(block.config, block.adapters, block.ffn, x);
  EXPECT_EQ(y.values(), block.ffn.forward(x).values());
}

TEST(M3AFfn, EmptyBankGivesFfn) {
  auto config = small_config();
  config.adapters.clear();
  Rng rng(11);
  const auto block = M3ABlock<double>::create(config, rng);
  EXPECT_TRUE(block.adapters.empty());
  Rng64 r(12);
  const auto x = random_tensor<double>({6, 16}, r, -1, 1, false);
  EXPECT_EQ(m3a_ffn_forward(config, block.adapters, block.ffn, x).values(),
            block.ffn.forward(x).values());
}

TEST(M3AFfn, RecomposesFromSeparateTerms) {
  Rng rng(13);
  auto block = M3ABlock<double>::create(small_config(), rng);
  set_scales(block, {0.7, -1.3});
  Rng64 r(14);
  const auto x = random_tensor<double>({6, 16}, r, -1, 1, false);
  const auto y = m3a_ffn_forward(block.config, block.adapters, block.ffn, x);
  const auto a1 = block.adapters[0].forward(x), a2 = block.adapters[1].forward(x);
  const auto f = block.ffn.forward(x);
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_NEAR(y[i], 0.7 * a1[i] - 1.3 * a2[i] + f[i], 1e-6);
  }
}

TEST(M3AFfn, BankLengthMismatchIsConfigError) {
  Rng rng(15);
  const auto block = M3ABlock<double>::create(small_config(), rng);
  std::vector<AdapterLayer<double>> one{block.adapters[0]};
  EXPECT_THROW(m3a_ffn_forward(block.config, one, block.ffn, Tensor<double>({2, 16})), ConfigError);
}

/// LN(FFN(x') + x') with x' = LN(MHSA(x) + x), from the block's own weights.
Tensor<double> vanilla_block(const M3ABlock<double>& b, const Tensor<double>& x) {
  const auto xp = b.norm_attn.forward(add(b.attention.self_attend(x), x));
  return b.norm_out.forward(add(b.ffn.forward(xp), xp));
}

TEST(M3ABlock, ZeroScalesReduceToVanillaBlock) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto block = M3ABlock<double>::create(small_config(), rng);
    Rng64 r(seed + 50);
    const auto x = random_tensor<double>({7, 16}, r, -2, 2, false);
    const auto a = block.forward(x), b = vanilla_block(block, x);
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], 1e-6) << "seed " << seed;
  }
}

TEST(M3ABlock, ShapeIsPreserved) {
  Rng rng(16);
  const auto block = M3ABlock<double>::create(small_config(8, 2), rng);
  EXPECT_EQ(block.forward(Tensor<double>({1, 8}, 0.3)).shape(), (Shape{1, 8}));
  Rng64 r(17);
  for (std::size_t t : {2u, 5u, 13u}) {
    EXPECT_EQ(block.forward(random_tensor<double>({t, 8}, r, -1, 1, false)).shape(), (Shape{t, 8}));
  }
  EXPECT_THROW(block.forward(Tensor<double>({3, 9})), DimensionError);
}

TEST(M3ABlock, AllParametersPassGradCheck) {
  Rng rng(18);
  auto block = M3ABlock<double>::create(small_config(), rng);
  set_scales(block, {0.4, -0.6});
  Rng64 r(19);
  auto x = random_tensor<double>({8, 16}, r);
  auto w = random_tensor<double>({8, 16}, r, -1, 1, false);
  ParamList<double> params;
  block.collect("tf1", params);
  bool has_scales = false;
  for (const auto& [name, t] : params) has_scales |= name.find("scale") != std::string::npos;
  EXPECT_TRUE(has_scales);
  EXPECT_TRUE(test::passes(grad_check([&] { return test::probe_loss(block.forward(x), w); },
                                      named(params), test::tol(1e-4))));
}

TEST(M3ABlock, ScaleGradientFlowsAtZeroInit) {
  Rng rng(20);
  const auto block = M3ABlock<double>::create(small_config(), rng);
  Rng64 r(21);
  const auto x = random_tensor<double>({8, 16}, r, -1, 1, false);
  const auto w = random_tensor<double>({8, 16}, r, -1, 1, false);
  Tape<double> tape;
  {
    Tape<double>::Scope scope(tape);
    tape.backward(test::probe_loss(block.forward(x), w));
  }
  double largest = 0;
  for (const auto& a : block.adapters) {
    if (a.scale.has_grad()) largest = std::max(largest, std::abs(a.scale.grad()[0]));
  }
  EXPECT_GT(largest, 0.0);
}

TEST(M3ABlock, DeterministicForFixedSeed) {
  auto run = [] {
    Rng rng(22);
    const auto block = M3ABlock<double>::create(small_config(), rng);
    Rng64 r(23);
    return block.forward(random_tensor<double>({5, 16}, r, -1, 1, false)).values();
  };
  EXPECT_EQ(run(), run());
}

TEST(M3ABlock, AdapterOutputsAreReported) {
  Rng rng(24);
  const auto block = M3ABlock<double>::create(small_config(), rng);
  Rng64 r(25);
  const auto x = random_tensor<double>({5, 16}, r, -1, 1, false);
  std::vector<Tensor<double>> outputs;
  block.forward(x, &outputs);
  ASSERT_EQ(outputs.size(), 2u);
  const auto xp = block.norm_attn.forward(add(block.attention.self_attend(x), x));
  EXPECT_EQ(outputs[0].values(), block.adapters[0].forward(xp).values());
  EXPECT_EQ(outputs[1].values(), block.adapters[1].forward(xp).values());
}

}  // namespace
}  // namespace mtda
