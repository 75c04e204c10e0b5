#include "anatomia/prior.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "anatomia/error.hpp"
#include "anatomia/losses.hpp"
#include "anatomia/sampling.hpp"
#include "anatomia/tensor.hpp"

namespace anatomia {

namespace fs = std::filesystem;

void DaeTrainConfig::validate() const {
  arch.validate();
  if (!arch.is_autoencoder()) throw ConfigError("dae: arch needs a bottleneck_dim");
  policy.validate();
  if (!(lr0 > 0)) throw ConfigError("dae: lr0 must be > 0");
  if (max_iters < 1) throw ConfigError("dae: max_iters must be >= 1");
  if (lr_halving_period < 1) throw ConfigError("dae: lr_halving_period must be >= 1");
  if (batch_size < 1) throw ConfigError("dae: batch_size must be >= 1");
  if (patch_size != arch.grid) throw ConfigError("dae: patch_size must equal the autoencoder grid");
  if (!(label_smoothing >= 0 && label_smoothing < 1)) throw ConfigError("dae: label_smoothing must be in [0,1)");
  if (log_every < 1) throw ConfigError("dae: log_every must be >= 1");
}

ArchConfig default_dae_arch(int num_classes, const Shape& patch, int latent_dim) {
  ArchConfig a;
  a.rank = static_cast<int>(patch.size());
  a.in_channels = num_classes + 1;
  a.num_classes = num_classes;
  a.skip_connections = false;
  a.bottleneck_dim = latent_dim;
  a.grid = patch;
  return a;
}

DaeLoss dae_loss(const at::Tensor& recon, const at::Tensor& clean_one_hot) {
  DaeLoss l;
  l.mse = anatomia::mse_loss(recon, clean_one_hot);
  l.dice = soft_dice_loss(recon, clean_one_hot);
  l.total = l.mse + l.dice;
  return l;
}

double dae_lr(std::int64_t t, double lr0, std::int64_t period) {
  if (t < 0) throw InvariantError("dae_lr: negative iteration");
  return std::ldexp(lr0, -static_cast<int>(t / period));
}

DaeTrainResult train_dae(std::span<const LabelMask> masks, const DaeTrainConfig& cfg,
                         const std::function<void(const DaeLogRow&)>& on_log) {
  cfg.validate();
  if (masks.empty()) throw SizeError("train_dae: no labeled masks");
  for (const auto& m : masks) {
    m.validate();
    if (m.num_classes != cfg.arch.num_classes) throw ConsistencyError("train_dae: class count differs from arch");
  }

  Rng rng(cfg.seed);
  Rng init = rng.derive(0x1417);
  DaeTrainResult r{Network::autoencoder(cfg.arch, init), SgdMomentum(cfg.momentum), rng, 0, false, {}};
  Network& dae = r.dae;
  dae.set_mode(Mode::train);

  DaeLogRow window;
  std::int64_t window_n = 0;
  double best = std::numeric_limits<double>::infinity();
  std::int64_t best_at = 0;

  for (std::int64_t t = 0; t < cfg.max_iters; ++t) {
    const double lr = dae_lr(t, cfg.lr0, cfg.lr_halving_period);
    std::vector<at::Tensor> inputs, targets;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto& clean = masks[r.rng.uniform_int(0, static_cast<std::int64_t>(masks.size()) - 1)];
      Rng local = r.rng.derive(static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(b));
      Sample s{Volume(clean.shape, std::vector<double>(clean.shape.size(), 1.0)), clean};
      s = augment(random_crop(s, cfg.patch_size, local), local);
      const auto corrupted = corrupt(*s.label, cfg.policy, local);
      inputs.push_back(one_hot_tensor(corrupted, cfg.label_smoothing));
      targets.push_back(one_hot_tensor(*s.label));
    }
    const auto x = stack(inputs);
    const auto y = stack(targets).to(dae.dtype());

    dae.zero_grad();
    const auto recon = softmax_channels(dae.forward(x));
    const auto loss = dae_loss(recon, y);
    const double total = loss.total.item<double>();
    if (!std::isfinite(total))
      throw DivergenceError("train_dae: non-finite loss at iteration " + std::to_string(t));
    loss.total.backward();
    r.optimizer.step(dae, lr);
    r.iterations = t + 1;

    window.lr = lr;
    window.mse += loss.mse.item<double>();
    window.dice += loss.dice.item<double>();
    window.total += total;
    ++window_n;
    if (window_n == cfg.log_every || t + 1 == cfg.max_iters) {
      DaeLogRow row{t, lr, window.mse / window_n, window.dice / window_n, window.total / window_n};
      r.log.push_back(row);
      if (on_log) on_log(row);
      window = {};
      window_n = 0;
      if (row.total < best) {
        best = row.total;
        best_at = t;
      } else if (t - best_at >= cfg.patience) {
        r.early_stopped = true;
        break;
      }
    }
  }
  dae.set_mode(Mode::eval);
  return r;
}

Checkpoint make_dae_checkpoint(const DaeTrainResult& result, const std::string& metadata) {
  Checkpoint c;
  c.kind = "dae";
  c.arch = result.dae.arch();
  c.iteration = result.iterations;
  c.params = snapshot(result.dae.parameters());
  c.optimizer = snapshot(result.optimizer.state());
  c.rng_state = result.rng.serialize();
  c.metadata = metadata;
  return c;
}

void write_dae_log(const std::vector<DaeLogRow>& rows, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(9);
  out << "iteration,lr,mse,dice,total\n";
  for (const auto& r : rows) out << r.iteration << ',' << r.lr << ',' << r.mse << ',' << r.dice << ',' << r.total << '\n';
}

LabelMask denoise_mask(Network& dae, const LabelMask& mask, double smoothing) {
  const Mode previous = dae.mode();
  dae.set_mode(Mode::eval);
  at::NoGradGuard no_grad;
  Rng unused(0);
  const auto input = one_hot_tensor(mask, smoothing).unsqueeze(0).to(dae.dtype());
  const auto out = dae_map(dae, input, 0.0, unused);
  dae.set_mode(previous);
  auto result = argmax_labels(to_probmap(out[0]));
  result.num_classes = mask.num_classes;
  return result;
}

}  // namespace anatomia
