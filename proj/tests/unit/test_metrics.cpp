#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "anatomia/error.hpp"
#include "anatomia/metrics.hpp"
#include "oracles.hpp"

using namespace anatomia;

namespace {

LabelMask from_rows(const Shape& shape, std::vector<std::uint8_t> values, int classes = 1) {
  LabelMask m(shape, classes);
  m.data = std::move(values);
  return m;
}

}  // namespace

TEST(Dice, IdenticalNonEmptyIsOne) {
  const auto m = from_rows({2, 2}, {1, 0, 1, 1});
  EXPECT_DOUBLE_EQ(dice_score(m, m, 1), 1.0);
}

TEST(Dice, DisjointIsZero) {
  const auto a = from_rows({2, 2}, {1, 1, 0, 0});
  const auto b = from_rows({2, 2}, {0, 0, 1, 1});
  EXPECT_DOUBLE_EQ(dice_score(a, b, 1), 0.0);
}

TEST(Dice, HalfOverlap) {
  const auto a = from_rows({2, 4}, {1, 1, 1, 1, 0, 0, 0, 0});
  const auto b = from_rows({2, 4}, {0, 0, 1, 1, 1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(dice_score(a, b, 1), 0.5);
  EXPECT_DOUBLE_EQ(oracle::dice(a, b, 1), 0.5);
}

TEST(Dice, EmptyConventions) {
  const LabelMask empty({3, 3}, 1);
  const auto one = from_rows({3, 3}, {0, 0, 0, 0, 1, 0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(dice_score(empty, empty, 1), 1.0);
  EXPECT_DOUBLE_EQ(dice_score(empty, one, 1), 0.0);
}

TEST(Dice, ShapeMismatchIsConsistencyError) {
  EXPECT_THROW(dice_score(LabelMask({2, 2}, 1), LabelMask({2, 3}, 1), 1), ConsistencyError);
  EXPECT_THROW(hd95(LabelMask({2, 2}, 1), LabelMask({2, 3}, 1), 1, std::vector<double>{1, 1}), ConsistencyError);
}

TEST(Dice, SymmetricAndPermutationInvariant) {
  gen::Gen g(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto shape = g.shape(2, 2, 12);
    const auto a = g.mask(shape, 2), b = g.mask(shape, 2);
    EXPECT_DOUBLE_EQ(dice_score(a, b, 1), dice_score(b, a, 1));
    std::vector<std::int64_t> perm(a.data.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), g.eng);
    LabelMask pa = a, pb = b;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      pa.data[i] = a.data[perm[i]];
      pb.data[i] = b.data[perm[i]];
    }
    EXPECT_NEAR(dice_score(pa, pb, 2), dice_score(a, b, 2), 1e-15);
  }
}

TEST(Hd95, IdenticalIsZero) {
  gen::Gen g(8);
  const auto m = g.box_mask({10, 10}, 1);
  EXPECT_EQ(hd95(m, m, 1, std::vector<double>{1, 1}).value(), 0.0);
}

TEST(Hd95, EmptyRegionIsUndefined) {
  const LabelMask empty({4, 4}, 1);
  auto one = empty;
  one.data[5] = 1;
  EXPECT_FALSE(hd95(empty, one, 1, std::vector<double>{1, 1}).has_value());
  EXPECT_FALSE(hd95(one, empty, 1, std::vector<double>{1, 1}).has_value());
}

TEST(Hd95, ThreeFourFiveOffset) {
  LabelMask a({10, 10}, 1), b({10, 10}, 1);
  a.data[1 * 10 + 1] = 1;
  b.data[4 * 10 + 5] = 1;
  EXPECT_NEAR(hd95(a, b, 1, std::vector<double>{1, 1}).value(), 5.0, 1e-12);
  EXPECT_NEAR(oracle::hd95(a, b, 1, {1, 1}).value(), 5.0, 1e-12);
}

TEST(Hd95, SpacingScalesLinearly) {
  gen::Gen g(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = g.box_mask({12, 12}, 1), b = g.box_mask({12, 12}, 1);
    const auto base = hd95(a, b, 1, std::vector<double>{1, 1});
    if (!base) continue;
    const auto scaled = hd95(a, b, 1, std::vector<double>{2.5, 2.5});
    EXPECT_NEAR(*scaled, 2.5 * *base, 1e-9);
  }
}

TEST(Hd95, SymmetricAndTranslationInvariant) {
  gen::Gen g(14);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = g.box_mask({10, 10}, 1), b = g.box_mask({10, 10}, 1);
    const std::vector<double> sp{1.0, 1.5};
    const auto ab = hd95(a, b, 1, sp), ba = hd95(b, a, 1, sp);
    ASSERT_EQ(ab.has_value(), ba.has_value());
    if (ab) EXPECT_NEAR(*ab, *ba, 1e-12);

    // Embed both masks in a larger grid at an offset, away from the border,
    // so the boundary sets translate unchanged.
    LabelMask big_a({20, 20}, 1), big_b({20, 20}, 1);
    LabelMask pad_a({14, 14}, 1), pad_b({14, 14}, 1);
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x) {
        big_a.data[(y + 7) * 20 + x + 5] = a.data[y * 10 + x];
        big_b.data[(y + 7) * 20 + x + 5] = b.data[y * 10 + x];
        pad_a.data[(y + 2) * 14 + x + 2] = a.data[y * 10 + x];
        pad_b.data[(y + 2) * 14 + x + 2] = b.data[y * 10 + x];
      }
    const auto p = hd95(pad_a, pad_b, 1, sp), q = hd95(big_a, big_b, 1, sp);
    ASSERT_EQ(p.has_value(), q.has_value());
    if (p) EXPECT_NEAR(*p, *q, 1e-12);
  }
}

TEST(Metrics, MatchBruteForceOracles) {
  gen::Gen g(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const int rank = static_cast<int>(g.integer(2, 3));
    const auto shape = g.shape(rank, 1, rank == 2 ? 16 : 10);
    const int classes = static_cast<int>(g.integer(1, 3));
    const auto a = g.mask(shape, classes), b = g.mask(shape, classes);
    std::vector<double> sp;
    for (int i = 0; i < rank; ++i) sp.push_back(g.real(0.5, 2.0));
    for (int c = 1; c <= classes; ++c) {
      ASSERT_NEAR(dice_score(a, b, c), oracle::dice(a, b, c), 1e-9);
      const auto got = hd95(a, b, c, sp);
      const auto want = oracle::hd95(a, b, c, sp);
      ASSERT_EQ(got.has_value(), want.has_value());
      if (got) ASSERT_NEAR(*got, *want, 1e-9);
    }
  }
}

TEST(Metrics, MatchOraclesAtSixteenCubed) {
  gen::Gen g(16);
  for (int trial = 0; trial < 3; ++trial) {
    const Shape shape{16, 16, 16};
    const auto a = g.box_mask(shape, 1), b = g.box_mask(shape, 1);
    const std::vector<double> sp{1.0, 0.7, 1.3};
    ASSERT_NEAR(dice_score(a, b, 1), oracle::dice(a, b, 1), 1e-9);
    const auto got = hd95(a, b, 1, sp), want = oracle::hd95(a, b, 1, sp);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) ASSERT_NEAR(*got, *want, 1e-9);
  }
}

TEST(Metrics, BoundaryMaskCountsGridBorder) {
  LabelMask full({3, 3}, 1);
  std::fill(full.data.begin(), full.data.end(), 1);
  const auto b = boundary_mask(full, 1);
  for (int i = 0; i < 9; ++i) EXPECT_EQ(b[i], i == 4 ? 0 : 1) << i;
}

TEST(Metrics, PercentileIsLinear) {
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4}, 50), 2.5);
  EXPECT_DOUBLE_EQ(percentile({0, 10}, 95), 9.5);
  EXPECT_DOUBLE_EQ(percentile({7}, 95), 7);
}

TEST(Metrics, EvaluateCaseSkipsUndefinedHd) {
  LabelMask gt({6, 6}, 2), pred({6, 6}, 2);
  gt.data[7] = 1;
  pred.data[7] = 1;
  gt.data[20] = 2;  // class 2 missing from pred
  const auto r = evaluate_case(pred, gt, std::vector<double>{1, 1});
  ASSERT_EQ(r.per_class_dsc.size(), 2u);
  EXPECT_DOUBLE_EQ(r.per_class_dsc[0], 1.0);
  EXPECT_DOUBLE_EQ(r.per_class_dsc[1], 0.0);
  EXPECT_DOUBLE_EQ(r.mean_dsc, 0.5);
  EXPECT_FALSE(r.per_class_hd95[1].has_value());
  ASSERT_TRUE(r.mean_hd95.has_value());
  EXPECT_DOUBLE_EQ(*r.mean_hd95, 0.0);
}

TEST(Aggregate, IdenticalReportsHaveZeroStd) {
  MetricReport r;
  r.per_class_dsc = {0.8};
  r.per_class_hd95 = {3.0};
  r.mean_dsc = 0.8;
  r.mean_hd95 = 3.0;
  const std::vector<MetricReport> three(3, r);
  const auto a = aggregate_runs(three);
  EXPECT_DOUBLE_EQ(a.mean_dsc.mean, 0.8);
  EXPECT_DOUBLE_EQ(a.mean_dsc.std, 0.0);
  EXPECT_EQ(a.mean_dsc.count, 3);
}

TEST(Aggregate, HandComputedMeanAndStd) {
  const std::vector<double> v{85, 86, 87};
  const auto s = mean_std(v);
  EXPECT_DOUBLE_EQ(s.mean, 86.0);
  EXPECT_DOUBLE_EQ(s.std, 1.0);
}

TEST(Aggregate, SingleRunAndEmptyInput) {
  const std::vector<double> one{42.5};
  const auto s = mean_std(one);
  EXPECT_DOUBLE_EQ(s.mean, 42.5);
  EXPECT_DOUBLE_EQ(s.std, 0.0);
  EXPECT_THROW(aggregate_runs(std::span<const MetricReport>{}), SizeError);
}
