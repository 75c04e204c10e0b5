#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "anatomia/checkpoint.hpp"
#include "anatomia/corruption.hpp"
#include "anatomia/nets.hpp"
#include "anatomia/optim.hpp"

namespace anatomia {

/// Shape-prior (denoising autoencoder) training setup.
struct DaeTrainConfig {
  ArchConfig arch;
  CorruptionPolicy policy;
  double lr0 = 0.1;
  double momentum = 0.9;
  std::int64_t lr_halving_period = 5000;
  std::int64_t max_iters = 8000;
  int batch_size = 4;
  Shape patch_size{64, 64};
  /// Blend of the corrupted one-hot input toward uniform.
  double label_smoothing = 0.05;
  /// Stop once the windowed loss has not improved for this many iterations.
  std::int64_t patience = 2000;
  std::int64_t log_every = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Default autoencoder layout for a segmentation of `num_classes` classes on
/// `patch` inputs.
ArchConfig default_dae_arch(int num_classes, const Shape& patch, int latent_dim = 128);

struct DaeLoss {
  at::Tensor mse;
  at::Tensor dice;
  at::Tensor total;
};

/// MSE to the clean one-hot plus soft Dice, equally weighted. Inputs are
/// [B, C+1, *spatial] reconstruction probabilities and clean one-hot targets.
DaeLoss dae_loss(const at::Tensor& recon, const at::Tensor& clean_one_hot);

/// Step schedule lr0 * 2^-floor(t / period).
double dae_lr(std::int64_t t, double lr0 = 0.1, std::int64_t period = 5000);

struct DaeLogRow {
  std::int64_t iteration = 0;
  double lr = 0;
  double mse = 0;
  double dice = 0;
  double total = 0;
};

struct DaeTrainResult {
  Network dae;
  SgdMomentum optimizer;
  Rng rng;
  std::int64_t iterations = 0;
  bool early_stopped = false;
  std::vector<DaeLogRow> log;
};

/// Trains the autoencoder on clean masks only: crop, augment, corrupt, and
/// minimize dae_loss(reconstruction, clean). Throws DivergenceError on a
/// non-finite loss.
DaeTrainResult train_dae(std::span<const LabelMask> masks, const DaeTrainConfig& cfg,
                         const std::function<void(const DaeLogRow&)>& on_log = {});

Checkpoint make_dae_checkpoint(const DaeTrainResult& result, const std::string& metadata = "{}");

/// dae_log.csv: iteration,lr,mse,dice,total
void write_dae_log(const std::vector<DaeLogRow>& rows, const std::filesystem::path& path);

/// Argmax of the autoencoder's noise-free reconstruction of one mask, fed
/// with the same smoothing as during training.
LabelMask denoise_mask(Network& dae, const LabelMask& mask, double smoothing = 0.05);

}  // namespace anatomia
