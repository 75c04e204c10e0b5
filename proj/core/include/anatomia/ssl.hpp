#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "anatomia/checkpoint.hpp"
#include "anatomia/nets.hpp"
#include "anatomia/optim.hpp"
#include "anatomia/sampling.hpp"
#include "anatomia/splits.hpp"

namespace anatomia {

/// How the consistency targets are weighted.
///   anatomical  soft weights exp(-gamma U), U = |dae(p_T) - p_T|^2
///   entropy     soft weights exp(-gamma U), U = entropy of dae(p_T)
///   threshold   hard mask U < H(t) on the anatomical U
///   mcdo        K dropout passes of the teacher, entropy U, hard mask
///   none        plain mean teacher
///   supervised  labeled data only (lower bound)
enum class Strategy { anatomical, entropy, threshold, mcdo, none, supervised };

std::string to_string(Strategy s);
/// Throws ConfigError for unknown names.
Strategy parse_strategy(std::string_view name);
bool needs_dae(Strategy s);

enum class ModelSelection { last_iteration, best_val };

struct SslConfig {
  ArchConfig arch;
  Strategy strategy = Strategy::anatomical;
  double alpha = 0.99;
  double beta = 0.1;
  double ramp_rate = 5.0;
  double gamma = 1.0;
  int mcdo_samples = 8;
  double latent_noise_std = 0.1;
  double lr0 = 0.1;
  double momentum = 0.9;
  std::int64_t t_max = 2000;
  int labeled_per_batch = 2;
  int unlabeled_per_batch = 2;
  Shape patch_size{64, 64};
  /// Extra Gaussian noise on the teacher's input.
  double teacher_input_noise = 0.05;
  /// Starting value of the running max of U used by the threshold variant.
  double threshold_cap_init = 2.0;
  std::uint64_t seed = 1;
  ModelSelection selection = ModelSelection::last_iteration;
  std::int64_t val_every = 250;
  Shape infer_stride{32, 32};

  void validate() const;
};

/// Backbone defaults for a strategy: dropout 0.5 for mcdo, 0 otherwise.
ArchConfig default_segnet_arch(int num_classes, int rank, Strategy strategy);

/// beta * exp(-r (1 - t / t_max)^2)
double lambda_c(double t, double t_max, double beta = 0.1, double r = 5.0);
/// lr0 (1 + cos(pi t / t_max)) / 2
double cosine_lr(double t, double t_max, double lr0 = 0.1);
/// (0.75 + 0.25 exp(-5 (1 - t / t_max)^2)) * u_cap
double threshold_schedule(double t, double t_max, double u_cap);

/// Mean voxel cross-entropy plus soft Dice on softmax(logits). `labels` is an
/// int64 tensor [B, *spatial].
at::Tensor supervised_loss(const at::Tensor& logits, const at::Tensor& labels);

/// U(v) = sum_c (p_hat - p)^2 over the channel axis (dim 1).
at::Tensor uncertainty_anatomical(const at::Tensor& p_teacher, const at::Tensor& p_plausible);
/// U(v) = -sum_c p log p with 0 log 0 = 0.
at::Tensor uncertainty_entropy(const at::Tensor& probs);

struct McdoResult {
  at::Tensor mean_probs;
  at::Tensor uncertainty;
};
/// K stochastic teacher passes with dropout on; entropy of the mean softmax.
/// Throws ConfigError if the teacher has no dropout or K < 2.
McdoResult uncertainty_mcdo(Network& teacher, const at::Tensor& x, int samples);

/// exp(-gamma U)
at::Tensor reliability_weights(const at::Tensor& uncertainty, double gamma);

/// Per sample: sum_v w sum_c (p_S - p_T)^2 / sum_v w, averaged over the
/// batch. Teacher values and weights are treated as constants. Throws
/// DegenerateWeightError if a sample's weights sum to zero.
at::Tensor consistency_loss(const at::Tensor& p_student, const at::Tensor& p_teacher, const at::Tensor& weights);

/// consistency_loss with binary weights 1[U < H]; samples whose mask is
/// empty contribute 0.
at::Tensor threshold_consistency(const at::Tensor& p_student, const at::Tensor& p_teacher,
                                 const at::Tensor& uncertainty, double threshold);

/// One training batch. Labeled samples come first. Student and teacher see
/// the same crops under independent dihedral transforms.
struct SslBatch {
  at::Tensor student_input;  // [B, 1, *patch]
  at::Tensor teacher_input;  // [B, 1, *patch]
  at::Tensor labels;         // [n_labeled, *patch], student frame
  int n_labeled = 0;
  std::vector<DihedralTransform> student_view;
  std::vector<DihedralTransform> teacher_view;
};

/// Teacher-frame tensor [B, ...] mapped into each sample's student frame.
at::Tensor align_to_student(const at::Tensor& teacher_frame, const SslBatch& batch);

struct LossTerms {
  at::Tensor supervised;
  at::Tensor consistency;
  at::Tensor total;
  /// Uncertainty in the student frame (undefined for none/supervised).
  at::Tensor uncertainty;
  double threshold = 0.0;
};

/// Mutable per-run state the loss needs beyond the networks.
struct LossState {
  Rng latent_rng;
  double u_cap = 2.0;
};

/// L = L_s + lambda * L_c for the configured strategy. Student outputs carry
/// gradients; teacher and autoencoder outputs are detached.
LossTerms compute_losses(Network& student, Network& teacher, Network* dae, const SslBatch& batch,
                         const SslConfig& cfg, std::int64_t t, LossState& state);

struct SslIterationLog {
  std::int64_t iteration = 0;
  double lambda = 0;
  double supervised = 0;
  double consistency = 0;
  double total = 0;
  double lr = 0;
  std::uint64_t forwards_student = 0;
  std::uint64_t forwards_teacher = 0;
  std::uint64_t forwards_dae = 0;
  double wall_ms = 0;
};

/// Mean-teacher training loop over a dataset split.
class SslTrainer {
 public:
  /// `dae` is required for the anatomical, entropy and threshold strategies.
  SslTrainer(const DatasetSplit& split, SslConfig cfg, std::optional<Network> dae = std::nullopt);

  /// Runs one iteration and returns its log row.
  SslIterationLog step();

  /// Draws the next batch without training (advances the data stream).
  SslBatch next_batch();

  [[nodiscard]] std::int64_t iteration() const { return t_; }
  [[nodiscard]] bool done() const { return t_ >= cfg_.t_max; }
  [[nodiscard]] const SslConfig& config() const { return cfg_; }

  Network& student() { return student_; }
  Network& teacher() { return teacher_; }
  Network* dae() { return dae_ ? &*dae_ : nullptr; }

  [[nodiscard]] Checkpoint checkpoint() const;
  /// Restores networks, optimizer, iteration and random streams.
  void restore(const Checkpoint& ckpt);

 private:
  const DatasetSplit& split_;
  SslConfig cfg_;
  Network student_;
  Network teacher_;
  std::optional<Network> dae_;
  SgdMomentum optimizer_;
  Rng data_rng_;
  LossState loss_state_;
  std::int64_t t_ = 0;
};

struct SslResult {
  Network model;
  Network teacher;
  Checkpoint checkpoint;
  std::vector<SslIterationLog> log;
  std::optional<double> best_val_dsc;
  std::int64_t selected_iteration = 0;
};

/// Full run with model selection. `on_iteration` sees every log row.
SslResult train_ssl(const DatasetSplit& split, const SslConfig& cfg, std::optional<Network> dae = std::nullopt,
                    const std::function<void(const SslIterationLog&)>& on_iteration = {});

/// ssl_log.csv: iteration,lambda_c,L_s,L_c,lr,forwards_student,forwards_teacher,forwards_dae,wall_ms
void write_ssl_log(const std::vector<SslIterationLog>& rows, const std::filesystem::path& path);

}  // namespace anatomia
