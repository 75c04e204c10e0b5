#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "anatomia/error.hpp"
#include "anatomia/labels.hpp"
#include "anatomia/losses.hpp"
#include "anatomia/prior.hpp"
#include "anatomia/tensor.hpp"
#include "finite_diff.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace anatomia;

namespace {

std::vector<LabelMask> training_masks(int n, std::int64_t side) {
  const auto split = fixture::synthetic_split(n, 0, 0, side);
  std::vector<LabelMask> masks;
  for (const auto& c : split.labeled) masks.push_back(c.label);
  return masks;
}

DaeTrainConfig tiny_training(int classes, std::int64_t patch, std::int64_t iters) {
  DaeTrainConfig cfg;
  cfg.arch = fixture::tiny_dae_arch(classes, patch);
  cfg.patch_size = {patch, patch};
  cfg.max_iters = iters;
  cfg.log_every = 10;
  cfg.batch_size = 2;
  return cfg;
}

}  // namespace

TEST(DaeLoss, UniformReconstructionOfHalfForeground) {
  auto clean = at::zeros({1, 2, 4, 4}, at::kDouble);
  clean.narrow(2, 0, 2).select(1, 1).fill_(1);
  clean.narrow(2, 2, 2).select(1, 0).fill_(1);
  const auto l = dae_loss(at::full({1, 2, 4, 4}, 0.5, at::kDouble), clean);
  EXPECT_DOUBLE_EQ(l.mse.item<double>(), 0.25);
}

TEST(DaeLoss, ExactReconstructionIsNearlyFree) {
  gen::Gen g(1);
  for (int classes : {1, 3}) {
    LabelMask m({8, 8}, classes);
    for (auto& v : m.data) v = static_cast<std::uint8_t>(g.integer(0, classes));
    const auto oh = one_hot_tensor(m).unsqueeze(0).to(at::kDouble);
    const auto l = dae_loss(oh, oh);
    EXPECT_EQ(l.mse.item<double>(), 0.0);
    EXPECT_LT(l.dice.item<double>(), 1e-6);
  }
}

TEST(DaeLoss, GradientMatchesCentralDifferences) {
  Rng rng(2);
  auto logits = at::empty({2, 3, 4, 4}, at::kDouble);
  for (std::int64_t i = 0; i < logits.numel(); ++i) logits.view({-1})[i] = rng.normal();
  logits.requires_grad_(true);
  auto labels = at::empty({2, 4, 4}, at::kLong);
  for (std::int64_t i = 0; i < labels.numel(); ++i) labels.view({-1})[i] = rng.uniform_int(0, 2);
  const auto target = at::one_hot(labels, 3).movedim(-1, 1).to(at::kDouble);
  const auto check = oracle::check_gradients([&] { return dae_loss(at::softmax(logits, 1), target).total; }, {logits});
  EXPECT_EQ(check.kinked, 0);
  EXPECT_LE(check.relative_error, 1e-4);
}

TEST(DaeLoss, GradientThroughTinyAutoencoder) {
  Rng rng(4);
  auto arch = fixture::tiny_dae_arch(2, 8);
  arch.base_width = 2;
  arch.bottleneck_dim = 4;
  auto dae = Network::autoencoder(arch, rng, at::kDouble);
  ASSERT_LE(dae.parameter_count(), 1000);
  const auto masks = training_masks(2, 32);
  std::vector<at::Tensor> clean;
  for (const auto& m : masks) clean.push_back(one_hot_tensor(m).narrow(1, 8, 8).narrow(2, 8, 8).to(at::kDouble));
  const auto target = at::stack(clean);
  const auto input = target * 0.9 + 0.05;
  std::vector<at::Tensor> leaves;
  for (auto& p : dae.parameters()) leaves.push_back(p.value);
  const auto check = oracle::check_gradients(
      [&] { return dae_loss(softmax_channels(dae.forward(input)), target).total; }, leaves);
  EXPECT_GT(check.autograd_norm, 0.0);
  EXPECT_LE(check.relative_error, 1e-4);
  EXPECT_LE(check.kinked * 4, check.elements);
}

TEST(DaeLr, HalvingSchedule) {
  EXPECT_EQ(dae_lr(0), 0.1);
  EXPECT_EQ(dae_lr(4999), 0.1);
  EXPECT_EQ(dae_lr(5000), 0.05);
  EXPECT_EQ(dae_lr(12000), 0.025);
}

TEST(DaeLr, NonIncreasingAndPiecewiseConstant) {
  for (std::int64_t t = 1; t < 40000; ++t) {
    ASSERT_LE(dae_lr(t), dae_lr(t - 1));
    if (t % 5000 != 0) ASSERT_EQ(dae_lr(t), dae_lr(t - 1));
    else ASSERT_EQ(dae_lr(t), dae_lr(t - 1) / 2);
  }
}

TEST(DaeTraining, InvalidConfigs) {
  DaeTrainConfig cfg = tiny_training(2, 16, 10);
  cfg.lr0 = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_training(2, 16, 10);
  cfg.max_iters = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_training(2, 16, 10);
  EXPECT_THROW(train_dae({}, cfg), SizeError);
}

TEST(DaeTraining, LossDecreasesOnSmallSet) {
  const auto masks = training_masks(8, 32);
  const auto r = train_dae(masks, tiny_training(2, 16, 50));
  ASSERT_GE(r.log.size(), 2u);
  EXPECT_LT(r.log.back().total, r.log.front().total);
  for (const auto& row : r.log) EXPECT_TRUE(std::isfinite(row.total));
  EXPECT_EQ(r.iterations, 50);
}

TEST(DaeTraining, DeterministicFinalLoss) {
  const auto masks = training_masks(4, 32);
  const auto a = train_dae(masks, tiny_training(2, 16, 20));
  const auto b = train_dae(masks, tiny_training(2, 16, 20));
  EXPECT_EQ(std::memcmp(&a.log.back().total, &b.log.back().total, sizeof(double)), 0);
  for (std::size_t i = 0; i < a.dae.parameters().size(); ++i)
    EXPECT_TRUE(at::equal(a.dae.parameters()[i].value, b.dae.parameters()[i].value));
}

TEST(DaeTraining, LogFileAndCheckpoint) {
  const auto masks = training_masks(2, 32);
  const auto r = train_dae(masks, tiny_training(2, 16, 10));
  const auto dir = std::filesystem::temp_directory_path() / "anatomia_prior_test";
  std::filesystem::create_directories(dir);
  write_dae_log(r.log, dir / "dae_log.csv");
  std::ifstream in(dir / "dae_log.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "iteration,lr,mse,dice,total");
  const auto ckpt = make_dae_checkpoint(r);
  EXPECT_EQ(ckpt.kind, "dae");
  EXPECT_EQ(ckpt.arch, r.dae.arch());
}

TEST(Denoise, ReturnsAValidMaskOfTheSameShape) {
  const auto masks = training_masks(3, 32);
  auto dae = fixture::tiny_dae(5, 16);
  for (const auto& m : masks) {
    const auto d = denoise_mask(dae, m);
    EXPECT_EQ(d.shape, m.shape);
    EXPECT_EQ(d.num_classes, m.num_classes);
    d.validate();
  }
}
