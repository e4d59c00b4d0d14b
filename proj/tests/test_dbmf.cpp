// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "mtda/dbmf.hpp"
#include "mtda/error.hpp"
#include "support.hpp"

namespace mtda {
namespace {

using test::random_tensor;
using test::Rng64;

NamedTensors named(const ParamList<double>& params) { return {params.begin(), params.end()}; }

DbmfConfig config(std::size_t d, std::size_t h, std::size_t dg, std::size_t c, std::size_t f) {
  DbmfConfig cfg;
  cfg.embed_dim = d;
  cfg.heads = h;
  cfg.global_dim = dg;
  cfg.channels = c;
  cfg.freq_bins = f;
  return cfg;
}

TEST(Rearrange, SingleChannelDropsChannelAxis) {
  Rng64 r(1);
  const auto l = random_tensor<double>({1, 5, 3}, r, -1, 1, false);
  const auto s = rearrange_local_to_seq(l);
  EXPECT_EQ(s.shape(), (Shape{5, 3}));
  EXPECT_EQ(s.values(), l.values());
  const auto back = rearrange_seq_to_local(s, 1, 3);
  EXPECT_EQ(back.shape(), (Shape{1, 5, 3}));
  EXPECT_EQ(back.values(), s.values());
}

TEST(Rearrange, IndexMapEnumeratesAllEntries) {
  Tensor<double> l({2, 3, 4});
  std::iota(l.values().begin(), l.values().end(), 0.0);
  const auto s = rearrange_local_to_seq(l);
  ASSERT_EQ(s.shape(), (Shape{3, 8}));
  for (std::size_t ch = 0; ch < 2; ++ch) {
    for (std::size_t ti = 0; ti < 3; ++ti) {
      for (std::size_t fr = 0; fr < 4; ++fr) {
        EXPECT_EQ(s(ti, ch * 4 + fr), l[(ch * 3 + ti) * 4 + fr]);
      }
    }
  }
  // Inverse direction from a sequence with distinct entries.
  Tensor<double> seq({3, 8});
  std::iota(seq.values().begin(), seq.values().end(), 100.0);
  const auto back = rearrange_seq_to_local(seq, 2, 4);
  for (std::size_t ch = 0; ch < 2; ++ch) {
    for (std::size_t ti = 0; ti < 3; ++ti) {
      for (std::size_t fr = 0; fr < 4; ++fr) {
        EXPECT_EQ(back[(ch * 3 + ti) * 4 + fr], seq(ti, ch * 4 + fr));
      }
    }
  }
}

TEST(Rearrange, RoundTripIsBitwiseIdentity) {
  Rng64 r(2);
  std::uniform_int_distribution<std::size_t> extent(1, 40);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t c, t, f;
    do {
      c = extent(r);
      t = extent(r);
      f = extent(r);
    } while (c * t * f > 10000);
    const auto l = random_tensor<float>({c, t, f}, r, -1e3, 1e3, false);
    ASSERT_EQ(rearrange_seq_to_local(rearrange_local_to_seq(l), c, f).values(), l.values());
  }
}

TEST(Rearrange, BadShapesThrow) {
  EXPECT_THROW(rearrange_seq_to_local(Tensor<double>({3, 7}), 2, 4), DimensionError);
  EXPECT_THROW(rearrange_local_to_seq(Tensor<double>({3, 7})), DimensionError);
}

TEST(Rearrange, GradientsPass) {
  Rng64 r(3);
  auto l = random_tensor<double>({2, 3, 4}, r);
  auto w = random_tensor<double>({3, 8}, r, -1, 1, false);
  EXPECT_TRUE(
      test::passes(grad_check([&] { return test::probe_loss(rearrange_local_to_seq(l), w); },
                              {{"l", l}}, test::tol(1e-6))));
  auto s = random_tensor<double>({3, 8}, r);
  auto w2 = random_tensor<double>({2, 3, 4}, r, -1, 1, false);
  EXPECT_TRUE(
      test::passes(grad_check([&] { return test::probe_loss(rearrange_seq_to_local(s, 2, 4), w2); },
                              {{"s", s}}, test::tol(1e-6))));
}

TEST(StreamMode, Spellings) {
  for (auto m : {StreamMode::kBToC, StreamMode::kCToB, StreamMode::kBidirectional}) {
    EXPECT_EQ(parse_stream_mode(to_string(m)), m);
  }
  EXPECT_EQ(to_string(StreamMode::kBidirectional), "C<->B");
  EXPECT_EQ(parse_stream_mode("B_to_C"), StreamMode::kBToC);
  EXPECT_EQ(parse_stream_mode("Bidirectional"), StreamMode::kBidirectional);
  EXPECT_THROW(parse_stream_mode("sideways"), ConfigError);
}

TEST(DbmfForward, ShapeContract) {
  Rng rng(4);
  const auto layer =
      DbmfLayer<double>::create(config(16, 4, 24, 3, 4), FusionDirection::kToLocal, rng);
  Rng64 r(5);
  const auto g = random_tensor<double>({7, 24}, r, -1, 1, false);
  const auto l = random_tensor<double>({3, 5, 4}, r, -1, 1, false);
  EXPECT_EQ(dbmf_forward(layer, g, l).shape(), (Shape{3, 5, 4}));
  EXPECT_EQ(layer.forward(g, l).shape(), (Shape{3, 5, 4}));
  EXPECT_THROW(dbmf_reverse_forward(layer, g, l), ContractError);
  EXPECT_THROW(dbmf_forward(layer, Tensor<double>({7, 23}), l), DimensionError);
  EXPECT_THROW(dbmf_forward(layer, g, Tensor<double>({2, 5, 4})), DimensionError);
}

TEST(DbmfForward, SingleGlobalTokenIsConstantOverTime) {
  Rng rng(6);
  const auto layer =
      DbmfLayer<double>::create(config(16, 4, 24, 3, 4), FusionDirection::kToLocal, rng);
  Rng64 r(7);
  const auto g = random_tensor<double>({1, 24}, r, -1, 1, false);
  const auto l = random_tensor<double>({3, 5, 4}, r, -1, 1, false);
  const auto y = dbmf_forward(layer, g, l);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t t = 1; t < 5; ++t) {
      for (std::size_t f = 0; f < 4; ++f) {
        EXPECT_NEAR(y[(ch * 5 + t) * 4 + f], y[(ch * 5) * 4 + f], 1e-12);
      }
    }
  }
}

TEST(DbmfForward, AttentionRowsSumToOne) {
  Rng rng(8);
  const auto layer =
      DbmfLayer<double>::create(config(16, 4, 24, 3, 4), FusionDirection::kToLocal, rng);
  Rng64 r(9);
  std::vector<Tensor<double>> weights;
  dbmf_forward(layer, random_tensor<double>({7, 24}, r, -2, 2, false),
               random_tensor<double>({3, 5, 4}, r, -2, 2, false), &weights);
  ASSERT_EQ(weights.size(), 4u);
  for (const auto& w : weights) {
    ASSERT_EQ(w.shape(), (Shape{5, 7}));
    for (std::size_t i = 0; i < 5; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 7; ++j) s += w(i, j);
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(DbmfForward, GlobalRowOrderDoesNotMatter) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto layer =
        DbmfLayer<double>::create(config(16, 4, 24, 3, 4), FusionDirection::kToLocal, rng);
    Rng64 r(seed + 10);
    const auto g = random_tensor<double>({7, 24}, r, -1, 1, false);
    const auto l = random_tensor<double>({3, 5, 4}, r, -1, 1, false);
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), r);
    Tensor<double> shuffled({7, 24});
    for (std::size_t i = 0; i < 7; ++i) {
      for (std::size_t c = 0; c < 24; ++c) shuffled(i, c) = g(perm[i], c);
    }
    const auto a = dbmf_forward(layer, g, l), b = dbmf_forward(layer, shuffled, l);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
  }
}

TEST(DbmfForward, TinyLayerGradientsPassIncludingInputs) {
  Rng rng(10);
  const auto layer =
      DbmfLayer<double>::create(config(8, 2, 6, 2, 2), FusionDirection::kToLocal, rng);
  Rng64 r(11);
  auto g = random_tensor<double>({3, 6}, r);
  auto l = random_tensor<double>({2, 4, 2}, r);
  auto w = random_tensor<double>({2, 4, 2}, r, -1, 1, false);
  ParamList<double> params;
  layer.collect("fuse", params);
  auto all = named(params);
  all.emplace_back("g", g);
  all.emplace_back("l", l);
  EXPECT_TRUE(test::passes(grad_check(
      [&] { return test::probe_loss(dbmf_forward(layer, g, l), w); }, all, test::tol(1e-4))));
}

TEST(DbmfReverse, ShapeContract) {
  Rng rng(12);
  const auto layer =
      DbmfLayer<double>::create(config(16, 4, 24, 3, 4), FusionDirection::kToGlobal, rng);
  Rng64 r(13);
  const auto g = random_tensor<double>({7, 24}, r, -1, 1, false);
  const auto l = random_tensor<double>({3, 5, 4}, r, -1, 1, false);
  EXPECT_EQ(dbmf_reverse_forward(layer, g, l).shape(), (Shape{7, 24}));
  EXPECT_THROW(dbmf_forward(layer, g, l), ContractError);
}

TEST(DbmfReverse, SingleLocalFrameIsConstantOverGlobalRows) {
  Rng rng(14);
  const auto layer =
      DbmfLayer<double>::create(config(16, 4, 24, 3, 4), FusionDirection::kToGlobal, rng);
  Rng64 r(15);
  const auto y = dbmf_reverse_forward(layer, random_tensor<double>({6, 24}, r, -1, 1, false),
                                      random_tensor<double>({3, 1, 4}, r, -1, 1, false));
  for (std::size_t t = 1; t < 6; ++t) {
    for (std::size_t c = 0; c < 24; ++c) EXPECT_NEAR(y(t, c), y(0, c), 1e-12);
  }
}

TEST(DbmfReverse, GradientsPass) {
  Rng rng(16);
  const auto layer =
      DbmfLayer<double>::create(config(8, 2, 6, 2, 2), FusionDirection::kToGlobal, rng);
  Rng64 r(17);
  auto g = random_tensor<double>({3, 6}, r);
  auto l = random_tensor<double>({2, 4, 2}, r);
  auto w = random_tensor<double>({3, 6}, r, -1, 1, false);
  ParamList<double> params;
  layer.collect("fuse", params);
  auto all = named(params);
  all.emplace_back("g", g);
  all.emplace_back("l", l);
  EXPECT_TRUE(test::passes(
      grad_check([&] { return test::probe_loss(dbmf_reverse_forward(layer, g, l), w); }, all,
                 test::tol(1e-4))));
}

}  // namespace
}  // namespace mtda
