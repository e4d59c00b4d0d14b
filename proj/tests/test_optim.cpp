// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "mtda/error.hpp"
#include "mtda/losses.hpp"
#include "mtda/optim.hpp"
#include "support.hpp"

namespace mtda {
namespace {

using test::random_tensor;
using test::Rng64;

void set_grad(Tensor<double> p, const std::vector<double>& g) {
  auto span = p.mutable_grad();
  std::copy(g.begin(), g.end(), span.begin());
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  auto p = Tensor<double>::parameter({3}, {1.0, -2.0, 0.5});
  ParamList<double> params{{"p", p}};
  AdamState state;
  for (int i = 0; i < 5; ++i) adam_step(params, state, AdamConfig{});
  EXPECT_EQ(p.values(), (std::vector<double>{1.0, -2.0, 0.5}));
  EXPECT_EQ(state.step, 5u);
}

TEST(Adam, FirstStepMovesByLearningRateTimesSign) {
  auto p = Tensor<double>::parameter({4}, {0.0, 0.0, 1.0, 1.0});
  ParamList<double> params{{"p", p}};
  set_grad(p, {3.0, -0.02, 1e-3, -50.0});
  AdamState state;
  AdamConfig cfg;
  cfg.lr = 0.01;
  adam_step(params, state, cfg);
  EXPECT_NEAR(p[0], -0.01, 1e-8);
  EXPECT_NEAR(p[1], 0.01, 1e-8);
  EXPECT_NEAR(p[2], 1.0 - 0.01, 1e-7);
  EXPECT_NEAR(p[3], 1.0 + 0.01, 1e-8);
}

TEST(Adam, FiveStepTraceMatchesClosedForm) {
  const std::vector<std::vector<double>> grads{
      {0.5, -1.0}, {0.3, 2.0}, {-0.7, 0.1}, {0.0, -0.4}, {1.2, 0.9}};
  auto p = Tensor<double>::parameter({2}, {0.2, -0.3});
  ParamList<double> params{{"p", p}};
  AdamState state;
  AdamConfig cfg;
  cfg.lr = 0.05;

  std::vector<double> x{0.2, -0.3};
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    set_grad(p, grads[t - 1]);
    adam_step(params, state, cfg);
    p.zero_grad();
    for (std::size_t j = 0; j < 2; ++j) {
      // Unrolled moment sums rather than the running recursion.
      double m = 0, v = 0;
      for (std::size_t s = 1; s <= t; ++s) {
        const double g = grads[s - 1][j];
        m += (1 - cfg.beta1) * std::pow(cfg.beta1, double(t - s)) * g;
        v += (1 - cfg.beta2) * std::pow(cfg.beta2, double(t - s)) * g * g;
      }
      const double mh = m / (1 - std::pow(cfg.beta1, double(t)));
      const double vh = v / (1 - std::pow(cfg.beta2, double(t)));
      x[j] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
      ASSERT_NEAR(p[j], x[j], 1e-12) << "step " << t << " entry " << j;
    }
  }
}

TEST(Adam, ChangedParameterListThrows) {
  auto p = Tensor<double>::parameter({2}, {0, 0});
  AdamState state;
  adam_step(ParamList<double>{{"p", p}}, state, AdamConfig{});
  auto q = Tensor<double>::parameter({3}, {0, 0, 0});
  EXPECT_THROW(adam_step(ParamList<double>{{"p", q}}, state, AdamConfig{}), ContractError);
  EXPECT_THROW(adam_step(ParamList<double>{{"p", p}, {"q", q}}, state, AdamConfig{}),
               ContractError);
}

TEST(Ema, DecayEndpoints) {
  auto t = Tensor<double>::parameter({2}, {1.0, 2.0});
  auto s = Tensor<double>::parameter({2}, {5.0, -3.0});
  ema_update(ParamList<double>{{"w", t}}, ParamList<double>{{"w", s}}, 1.0);
  EXPECT_EQ(t.values(), (std::vector<double>{1.0, 2.0}));
  ema_update(ParamList<double>{{"w", t}}, ParamList<double>{{"w", s}}, 0.0);
  EXPECT_EQ(t.values(), s.values());
}

TEST(Ema, GeometricRecursion) {
  auto t = Tensor<double>::parameter({1}, {0.0});
  auto s = Tensor<double>::parameter({1}, {1.0});
  for (int i = 0; i < 3; ++i) {
    ema_update(ParamList<double>{{"w", t}}, ParamList<double>{{"w", s}}, 0.999);
  }
  EXPECT_NEAR(t[0], 1.0 - std::pow(0.999, 3), 1e-15);
}

TEST(Ema, MismatchThrows) {
  auto t = Tensor<double>::parameter({2}, {0, 0});
  auto s = Tensor<double>::parameter({3}, {0, 0, 0});
  EXPECT_THROW(ema_update(ParamList<double>{{"w", t}}, ParamList<double>{{"w", s}}, 0.9),
               ContractError);
  EXPECT_THROW(ema_update(ParamList<double>{{"w", t}}, ParamList<double>{{"v", t}}, 0.9),
               ContractError);
  EXPECT_THROW(ema_update(ParamList<double>{{"w", t}}, ParamList<double>{{"w", t}}, 1.5),
               ContractError);
}

TEST(Bce, HalfScoresGiveLn2) {
  const Tensor<double> p({3, 2}, 0.5), y({3, 2}, {0, 1, 1, 0, 0, 1}), mask({2}, 1.0);
  EXPECT_NEAR(bce_loss(p, y, mask).item(), std::log(2.0), 1e-12);
}

TEST(Bce, MatchesDirectSum) {
  Rng64 r(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_tensor<double>({5, 4}, r, 0.01, 0.99, false);
    const auto y = random_tensor<double>({5, 4}, r, 0.0, 1.0, false);
    const Tensor<double> mask({4}, {1, 0, 1, 1});
    double total = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t c : {0u, 2u, 3u}) {
        total += -(y(i, c) * std::log(p(i, c)) + (1 - y(i, c)) * std::log(1 - p(i, c)));
      }
    }
    EXPECT_NEAR(bce_loss(p, y, mask).item(), total / 15, 1e-12);
  }
}

TEST(Bce, AllZeroMaskGivesZeroWithZeroGradient) {
  Rng64 r(2);
  auto p = random_tensor<double>({4, 3}, r, 0.1, 0.9);
  Tape<double> tape;
  Tape<double>::Scope scope(tape);
  auto bias = Tensor<double>::parameter({1}, {0.0});
  // The loss must reach some parameter for backward to be defined.
  const auto loss = add(bce_loss(p, Tensor<double>({4, 3}, 1.0), Tensor<double>({3}, 0.0)), bias);
  EXPECT_EQ(loss.item(), 0.0);
  tape.backward(loss);
  for (double g : p.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Bce, MaskedColumnsGetExactlyZeroGradient) {
  Rng64 r(3);
  auto p = random_tensor<double>({6, 3}, r, 0.1, 0.9);
  const auto y = random_tensor<double>({6, 3}, r, 0, 1, false);
  Tape<double> tape;
  Tape<double>::Scope scope(tape);
  tape.backward(bce_loss(p, y, Tensor<double>({3}, {1, 0, 1})));
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(p.grad()[i * 3 + 1], 0.0);
    EXPECT_NE(p.grad()[i * 3 + 0], 0.0);
  }
}

TEST(Bce, GradientsPass) {
  Rng64 r(4);
  auto p = random_tensor<double>({5, 3}, r, 0.05, 0.95);
  const auto y = random_tensor<double>({5, 3}, r, 0, 1, false);
  const Tensor<double> mask({3}, {1, 1, 0});
  EXPECT_TRUE(test::passes(
      grad_check([&] { return bce_loss(p, y, mask); }, {{"scores", p}}, test::tol(1e-6))));
}

TEST(Bce, RejectsBadInputs) {
  const Tensor<double> p({2, 2}, 0.5), mask({2}, 1.0);
  EXPECT_THROW(bce_loss(p, Tensor<double>({2, 2}, {0, 1.5, 0, 0}), mask), ContractError);
  EXPECT_THROW(bce_loss(p, Tensor<double>({2, 2}, {0, -0.1, 0, 0}), mask), ContractError);
  EXPECT_THROW(bce_loss(p, Tensor<double>({2, 3}, 0.0), mask), DimensionError);
  EXPECT_THROW(bce_loss(p, Tensor<double>({2, 2}, 0.0), Tensor<double>({3}, 1.0)), DimensionError);
}

TEST(Consistency, IdenticalInputsGiveZero) {
  Rng64 r(5);
  const auto a = random_tensor<double>({4, 3}, r, -1, 1, false);
  EXPECT_EQ(consistency_loss(a, a).item(), 0.0);
}

TEST(Consistency, ConstantOffset) {
  Rng64 r(6);
  const auto a = random_tensor<double>({4, 3}, r, 0, 1, false);
  Tensor<double> b = a.clone();
  for (double& v : b.values()) v += 0.1;
  EXPECT_NEAR(consistency_loss(a, b).item(), 0.01, 1e-12);
}

TEST(Consistency, TeacherReceivesNoGradient) {
  Rng64 r(7);
  auto s = random_tensor<double>({3, 2}, r);
  auto t = random_tensor<double>({3, 2}, r);
  Tape<double> tape;
  Tape<double>::Scope scope(tape);
  tape.backward(consistency_loss(s, t));
  EXPECT_FALSE(t.has_grad());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_NEAR(s.grad()[i], 2.0 * (s[i] - t[i]) / 6.0, 1e-15);
  }
}

TEST(Consistency, ShapeMismatchThrows) {
  EXPECT_THROW(consistency_loss(Tensor<double>({2, 2}), Tensor<double>({4})), ContractError);
}

}  // namespace
}  // namespace mtda
