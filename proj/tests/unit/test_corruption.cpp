#include <gtest/gtest.h>

#include <set>

#include "anatomia/corruption.hpp"
#include "anatomia/error.hpp"
#include "anatomia/metrics.hpp"
#include "anatomia/sampling.hpp"
#include "anatomia/synthdata.hpp"
#include "oracles.hpp"

using namespace anatomia;

namespace {

LabelMask rotate(const LabelMask& m) {
  LabelMask out = m;
  out.data = oracle::rot90(m.data, m.shape, &out.shape);
  return out;
}

void expect_alphabet(const LabelMask& m, const Shape& shape, int classes) {
  ASSERT_EQ(m.shape, shape);
  ASSERT_EQ(m.num_classes, classes);
  for (auto v : m.data) ASSERT_LE(v, classes);
}

// Voxels whose in-bounds face neighbors all carry the voxel's own label.
std::vector<bool> interior(const LabelMask& m) {
  std::vector<bool> out(m.data.size(), true);
  for (std::int64_t i = 0; i < m.size(); ++i) {
    const auto p = oracle::unravel(i, m.shape);
    for (std::size_t a = 0; a < m.shape.size(); ++a)
      for (int d : {-1, 1}) {
        auto q = p;
        q[a] += d;
        if (q[a] >= 0 && q[a] < m.shape[a] && m.data[oracle::ravel(q, m.shape)] != m.data[i]) out[i] = false;
      }
  }
  return out;
}

}  // namespace

TEST(Swap, RateZeroIsIdentity) {
  gen::Gen g(1);
  Rng rng(1);
  const auto m = g.mask({12, 12}, 3);
  EXPECT_EQ(boundary_swap(m, 0.0, rng), m);
}

TEST(Swap, IsolatedVoxelTakesBackground) {
  LabelMask m({5, 5}, 1);
  m.data[12] = 1;
  Rng rng(3);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(boundary_swap(m, 1.0, rng).data[12], 0);
}

TEST(Swap, ChangesOnlyBoundaryVoxels) {
  gen::Gen g(2);
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const int rank = static_cast<int>(g.integer(2, 3));
    const auto m = g.mask(g.shape(rank, 2, rank == 2 ? 20 : 8), static_cast<int>(g.integer(1, 4)));
    const auto out = boundary_swap(m, g.real(0, 1), rng);
    expect_alphabet(out, m.shape, m.num_classes);
    const auto inner = interior(m);
    for (std::size_t i = 0; i < m.data.size(); ++i)
      if (inner[i]) ASSERT_EQ(out.data[i], m.data[i]);
  }
}

TEST(Swap, RejectsRateOutsideUnitInterval) {
  Rng rng(0);
  EXPECT_THROW(boundary_swap(LabelMask({3, 3}, 1), 1.5, rng), InvariantError);
}

TEST(Swap, TouchedVoxelCountIsRotationInvariant) {
  gen::Gen g(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = g.box_mask({10, 14}, 2);
    const auto r = rotate(m);
    const auto b = label_boundary(m), rb = label_boundary(r);
    EXPECT_EQ(std::count(b.begin(), b.end(), 1), std::count(rb.begin(), rb.end(), 1));
    EXPECT_EQ(label_boundary(r), [&] {
      Shape s;
      return oracle::rot90(b, m.shape, &s);
    }());
  }
}

TEST(Morph, DilateSingleVoxelGivesBlock) {
  LabelMask m({7, 7}, 1);
  m.data[3 * 7 + 3] = 1;
  const auto d = morph_perturb(m, MorphOp::dilate, 1, 1);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x) EXPECT_EQ(d.data[y * 7 + x], (std::abs(y - 3) <= 1 && std::abs(x - 3) <= 1) ? 1 : 0);
}

TEST(Morph, OpeningIsAntiExtensive) {
  gen::Gen g(6);
  for (int trial = 0; trial < 100; ++trial) {
    const int rank = static_cast<int>(g.integer(2, 3));
    const auto m = g.mask(g.shape(rank, 3, rank == 2 ? 20 : 9), 2);
    const int r = static_cast<int>(g.integer(1, 3));
    const int c = static_cast<int>(g.integer(1, 2));
    const auto opened = morph_perturb(morph_perturb(m, MorphOp::erode, r, c), MorphOp::dilate, r, c);
    for (std::size_t i = 0; i < m.data.size(); ++i)
      if (opened.data[i] == c) ASSERT_EQ(m.data[i], c) << "voxel " << i;
  }
}

TEST(Morph, LargeErosionRemovesClass) {
  LabelMask m({12, 12}, 2);
  for (int y = 3; y < 8; ++y)
    for (int x = 3; x < 8; ++x) m.data[y * 12 + x] = 2;
  EXPECT_EQ(morph_perturb(m, MorphOp::erode, 3, 2).count(2), 0);
  EXPECT_EQ(morph_perturb(m, MorphOp::erode, 2, 2).count(2), 1);
}

TEST(Morph, DilationOverwritesOtherLabels) {
  LabelMask m({5, 5}, 2);
  std::fill(m.data.begin(), m.data.end(), 1);
  m.data[12] = 2;
  const auto d = morph_perturb(m, MorphOp::dilate, 1, 2);
  EXPECT_EQ(d.count(2), 9);
  EXPECT_EQ(d.count(1), 16);
}

TEST(Morph, CommutesWithQuarterTurn) {
  gen::Gen g(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = g.mask(g.shape(2, 3, 15), 3);
    const auto op = g.integer(0, 1) ? MorphOp::erode : MorphOp::dilate;
    const int r = static_cast<int>(g.integer(1, 3)), c = static_cast<int>(g.integer(1, 3));
    EXPECT_EQ(morph_perturb(rotate(m), op, r, c), rotate(morph_perturb(m, op, r, c)));
  }
}

TEST(Rescale, FactorOneIsIdentity) {
  gen::Gen g(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = g.mask(g.shape(static_cast<int>(g.integer(2, 3)), 2, 12), 3);
    EXPECT_EQ(rescale_perturb(m, 1.0), m);
  }
}

TEST(Rescale, DoublingCenteredVoxelGivesTwoByTwo) {
  // Nearest-neighbour index map about the centroid c: out[v] = in[floor(c + (v - c) / 2 + 0.5)].
  LabelMask m({9, 9}, 1);
  m.data[4 * 9 + 4] = 1;
  const auto out = rescale_perturb(m, 2.0);
  LabelMask expected({9, 9}, 1);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) {
      const auto sy = static_cast<int>(std::floor(4 + (y - 4) / 2.0 + 0.5));
      const auto sx = static_cast<int>(std::floor(4 + (x - 4) / 2.0 + 0.5));
      expected.data[y * 9 + x] = m.data[sy * 9 + sx];
    }
  EXPECT_EQ(out, expected);
  EXPECT_EQ(out.count(1), 4);
}

TEST(Rescale, ValueSetShrinksOrStays) {
  gen::Gen g(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = g.mask(g.shape(2, 4, 16), 4);
    const auto out = rescale_perturb(m, g.real(0.5, 1.5));
    const std::set<std::uint8_t> before(m.data.begin(), m.data.end()), after(out.data.begin(), out.data.end());
    for (auto v : after) EXPECT_TRUE(before.count(v)) << int(v);
    EXPECT_EQ(out.shape, m.shape);
  }
}

TEST(ShapeEdit, ZeroEditsIsIdentity) {
  gen::Gen g(10);
  Rng rng(10);
  const auto m = g.mask({16, 16}, 2);
  EXPECT_EQ(shape_edit(m, 0, rng), m);
}

TEST(ShapeEdit, SingleStampChangesCountsConsistently) {
  gen::Gen g(11);
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = g.mask(g.shape(static_cast<int>(g.integer(2, 3)), 8, 20), 3);
    const auto out = shape_edit(m, 1, rng);
    expect_alphabet(out, m.shape, 3);
    std::set<std::uint8_t> written;
    for (std::size_t i = 0; i < m.data.size(); ++i)
      if (out.data[i] != m.data[i]) written.insert(out.data[i]);
    ASSERT_LE(written.size(), 1u);
    if (written.empty()) continue;
    // A stamp (class k) or an erasure (k = 0) only ever grows the label it writes.
    const int k = *written.begin();
    EXPECT_GT(out.count(k), m.count(k));
  }
}

TEST(Corrupt, DisabledPolicyIsIdentity) {
  gen::Gen g(12);
  Rng rng(12);
  const auto m = g.mask({20, 20}, 2);
  EXPECT_EQ(corrupt(m, CorruptionPolicy::none(), rng), m);
}

TEST(Corrupt, DeterministicPerRngState) {
  gen::Gen g(13);
  const auto m = g.box_mask({24, 24}, 2);
  Rng a(5), b(5);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(corrupt(m, CorruptionPolicy{}, a), corrupt(m, CorruptionPolicy{}, b));
}

TEST(Corrupt, PreservesShapeAndAlphabet) {
  gen::Gen g(14);
  Rng rng(14);
  CorruptionPolicy all;
  all.p_swap = all.p_morph = all.p_rescale = all.p_shape_edit = 1.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int classes = static_cast<int>(g.integer(1, 4));
    const auto m = g.mask(g.shape(static_cast<int>(g.integer(2, 3)), 4, 16), classes);
    expect_alphabet(corrupt(m, all, rng), m.shape, classes);
  }
}

TEST(Corrupt, DefaultPolicyDiceBandOnSyntheticMasks) {
  SynthConfig cfg;
  Rng rng(15);
  double sum = 0;
  int n = 0;
  for (int i = 0; i < 40; ++i) {
    const auto clean = *generate_case(cfg, i).label;
    const auto bad = corrupt(clean, CorruptionPolicy{}, rng);
    for (int c = 1; c <= cfg.num_classes; ++c, ++n) sum += dice_score(bad, clean, c);
  }
  const double mean = sum / n;
  EXPECT_GE(mean, 0.5);
  EXPECT_LE(mean, 0.95);
}

TEST(Corrupt, PolicyValidation) {
  CorruptionPolicy p;
  p.swap_rate = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.morph_radius_min = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.rescale_min = 1.2;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.p_morph = -0.1;
  EXPECT_THROW(p.validate(), ConfigError);
}
