// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "mtda/error.hpp"
#include "mtda/metrics.hpp"
#include "oracles.hpp"

namespace mtda {
namespace {

using test::brute_force_pauc;
using test::mann_whitney_auc;

struct Instance {
  std::vector<double> scores;
  std::vector<int> labels;
};

Instance random_instance(std::mt19937_64& rng) {
  Instance in;
  const std::size_t n = 2 + rng() % 49;
  std::uniform_real_distribution<double> u(0, 1);
  const bool coarse = rng() % 2;  // coarse scores produce tie groups
  for (std::size_t i = 0; i < n; ++i) {
    const double v = u(rng);
    in.scores.push_back(coarse ? std::round(v * 6) / 6 : v);
    in.labels.push_back(static_cast<int>(rng() % 2));
  }
  in.labels[0] = 0;
  in.labels[1] = 1;
  return in;
}

TEST(PartialAuc, PerfectSeparation) {
  const std::vector<double> s{0.9, 0.8, 0.3, 0.1};
  const std::vector<int> y{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(partial_auc(s, y, 0.1), 1.0);
}

TEST(PartialAuc, ConstantScoresGiveDiagonal) {
  const std::vector<double> s(10, 0.4);
  const std::vector<int> y{1, 0, 1, 0, 1, 0, 0, 1, 0, 1};
  EXPECT_NEAR(partial_auc(s, y, 0.1), 0.05, 1e-12);
}

TEST(PartialAuc, MatchesExhaustiveThresholdOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const Instance in = random_instance(rng);
    for (double max_fpr : {0.1, 0.25, 0.5, 1.0}) {
      ASSERT_NEAR(partial_auc(in.scores, in.labels, max_fpr),
                  brute_force_pauc(in.scores, in.labels, max_fpr), 1e-9)
          << "trial " << trial << " max_fpr " << max_fpr;
    }
  }
}

TEST(PartialAuc, FullRangeEqualsMannWhitney) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Instance in = random_instance(rng);
    ASSERT_NEAR(partial_auc(in.scores, in.labels, 1.0), mann_whitney_auc(in.scores, in.labels),
                1e-9);
  }
}

TEST(PartialAuc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Instance in = random_instance(rng);
    const double a = partial_auc(in.scores, in.labels, 0.1);
    for (double& v : in.scores) v = std::exp(3 * v) - 7;
    EXPECT_NEAR(partial_auc(in.scores, in.labels, 0.1), a, 1e-12);
  }
}

TEST(PartialAuc, ErrorPaths) {
  const std::vector<double> s{0.1, 0.2};
  EXPECT_THROW(partial_auc(s, std::vector<int>{1, 1}, 0.1), UndefinedMetricError);
  EXPECT_THROW(partial_auc(s, std::vector<int>{0, 0}, 0.1), UndefinedMetricError);
  EXPECT_THROW(partial_auc(s, std::vector<int>{0, 1}, 0.0), ContractError);
  EXPECT_THROW(partial_auc(s, std::vector<int>{0, 1}, 1.5), ContractError);
  EXPECT_THROW(partial_auc(s, std::vector<int>{0, 2}, 0.1), ContractError);
}

TEST(McClish, Anchors) {
  EXPECT_NEAR(mcclish_standardize(0.05, 0.1), 0.5, 1e-12);
  EXPECT_NEAR(mcclish_standardize(1.0, 0.1), 1.0, 1e-12);
  EXPECT_NEAR(mcclish_standardize(0.5, 1.0), 0.5, 1e-12);
}

FrameMatrix matrix(std::size_t rows, std::size_t cols, std::vector<float> v) {
  return {rows, cols, std::move(v)};
}

TEST(Mpauc, TargetsAsScoresGiveOne) {
  std::mt19937_64 rng(4);
  std::vector<FrameMatrix> s, t;
  for (int c = 0; c < 4; ++c) {
    FrameMatrix m{50, 3, std::vector<float>(150)};
    for (float& v : m.values) v = static_cast<float>(rng() % 2);
    s.push_back(m);
    t.push_back(m);
  }
  MpaucOptions o;
  o.segment_s = 0.02;
  EXPECT_DOUBLE_EQ(mpauc(s, t, o).value, 1.0);
}

TEST(Mpauc, RandomScoresAreChanceLevel) {
  double total = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0, 1);
    // 400 one-frame segments with exactly half positive.
    FrameMatrix s{400, 1, std::vector<float>(400)}, t{400, 1, std::vector<float>(400, 0.0f)};
    for (float& v : s.values) v = u(rng);
    std::vector<std::size_t> idx(400);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < 200; ++i) t.values[idx[i]] = 1.0f;
    MpaucOptions o;
    o.segment_s = o.frame_hop_s;
    total += mpauc(std::vector{s}, std::vector{t}, o).value;
  }
  EXPECT_NEAR(total / 30, 0.5, 0.1);
}

TEST(Mpauc, DegenerateClassIsExcludedAndNoted) {
  // Class 1 never reaches the ground-truth threshold.
  const FrameMatrix s = matrix(4, 2, {0.9f, 0.1f, 0.2f, 0.3f, 0.8f, 0.2f, 0.1f, 0.4f});
  const FrameMatrix t = matrix(4, 2, {1, 0, 0, 0, 1, 0, 0, 0.2f});
  MpaucOptions o;
  o.segment_s = o.frame_hop_s;
  const auto r = mpauc(std::vector{s}, std::vector{t}, o);
  ASSERT_EQ(r.per_class.size(), 2u);
  EXPECT_TRUE(r.per_class[0].has_value());
  EXPECT_FALSE(r.per_class[1].has_value());
  ASSERT_EQ(r.notes.size(), 1u);
  EXPECT_NE(r.notes[0].find("class 1"), std::string::npos);
  EXPECT_DOUBLE_EQ(r.value, 1.0);
  const FrameMatrix none = matrix(4, 2, std::vector<float>(8, 0.0f));
  EXPECT_THROW(mpauc(std::vector{s}, std::vector{none}, o), UndefinedMetricError);
}

TEST(Mpauc, SegmentPoolingKeepsTrailingPartialSegment) {
  // Five frames in segments of two: {0,1}, {2,3}, {4}. Only the trailing
  // single-frame segment is positive.
  const FrameMatrix t = matrix(5, 1, {0, 0, 0, 0, 1});
  const FrameMatrix good = matrix(5, 1, {0.1f, 0.1f, 0.2f, 0.2f, 0.9f});
  const FrameMatrix bad = matrix(5, 1, {0.9f, 0.9f, 0.2f, 0.2f, 0.1f});
  MpaucOptions o;
  o.segment_s = 2 * o.frame_hop_s;
  EXPECT_DOUBLE_EQ(mpauc(std::vector{good}, std::vector{t}, o).value, 1.0);
  EXPECT_LT(mpauc(std::vector{bad}, std::vector{t}, o).value, 0.5);
}

TEST(Mpauc, GroundTruthUsesSegmentMean) {
  // Segment means of the targets: 0.5 (positive at >= 0.5) and 0.25.
  const FrameMatrix t = matrix(4, 1, {1, 0, 0.5f, 0});
  const FrameMatrix s = matrix(4, 1, {0.6f, 0.6f, 0.1f, 0.1f});
  MpaucOptions o;
  o.segment_s = 2 * o.frame_hop_s;
  EXPECT_DOUBLE_EQ(mpauc(std::vector{s}, std::vector{t}, o).value, 1.0);
}

TEST(EventF1, IdenticalIsOne) {
  const std::vector<Event> ev{{0, 0.1, 0.5}, {1, 0.2, 0.4}, {0, 0.6, 0.9}};
  EXPECT_DOUBLE_EQ(event_f1_intersection(ev, ev), 1.0);
}

TEST(EventF1, NoPredictionsIsZero) {
  const std::vector<Event> ref{{0, 0.1, 0.5}};
  EXPECT_DOUBLE_EQ(event_f1_intersection({}, ref), 0.0);
  EXPECT_DOUBLE_EQ(event_f1_intersection({}, {}), 1.0);
}

TEST(EventF1, IntersectionCriterionArithmetic) {
  const std::vector<Event> pred{{0, 0.0, 10.0}};
  EXPECT_EQ(match_events(pred, std::vector<Event>{{0, 0.0, 7.0}}).true_positives, 1u);
  EXPECT_EQ(match_events(pred, std::vector<Event>{{0, 0.0, 6.0}}).true_positives, 0u);  // 0.6 < dtc
  EXPECT_EQ(match_events(std::vector<Event>{{0, 0.0, 6.0}}, std::vector<Event>{{0, 0.0, 10.0}})
                .true_positives,
            0u);  // 0.6 < gtc
  EXPECT_EQ(match_events(pred, std::vector<Event>{{1, 0.0, 10.0}}).true_positives, 0u);
}

TEST(EventF1, MatchingIsOneToOne) {
  const std::vector<Event> pred{{0, 0.0, 1.0}, {0, 0.0, 1.0}};
  const std::vector<Event> ref{{0, 0.0, 1.0}};
  const auto m = match_events(pred, ref);
  EXPECT_EQ(m.true_positives, 1u);
  EXPECT_EQ(m.predicted, 2u);
  EXPECT_EQ(m.reference, 1u);
  EXPECT_NEAR(m.f1(), 2.0 / 3.0, 1e-12);
}

TEST(EventF1, SymmetricUnderClassRelabeling) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Event> pred, ref;
    for (int i = 0; i < 8; ++i) {
      const double a = u(rng), b = a + 0.05 + u(rng) * 0.3;
      (i % 2 ? pred : ref).push_back({rng() % 3, a, b});
    }
    const std::vector<std::size_t> perm{2, 0, 1};
    auto relabel = [&](std::vector<Event> ev) {
      for (Event& e : ev) e.label = perm[e.label];
      return ev;
    };
    EXPECT_DOUBLE_EQ(event_f1_intersection(pred, ref),
                     event_f1_intersection(relabel(pred), relabel(ref)));
  }
}

TEST(EventF1, RejectsMalformedEvents) {
  const std::vector<Event> bad{{0, 0.5, 0.5}};
  EXPECT_THROW(match_events(bad, {}), ContractError);
}

TEST(ReferenceEvents, FramesToSeconds) {
  Clip c;
  c.frames = 50;
  c.labels = std::vector<HardEvent>{{3, 10, 20}};
  const auto ev = reference_events(c, 0.02);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].label, 3u);
  EXPECT_NEAR(ev[0].onset, 0.2, 1e-12);
  EXPECT_NEAR(ev[0].offset, 0.4, 1e-12);
}

}  // namespace
}  // namespace mtda
