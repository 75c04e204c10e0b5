#include "anatomia/ssl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "anatomia/error.hpp"
#include "anatomia/evaluation.hpp"
#include "anatomia/losses.hpp"
#include "anatomia/tensor.hpp"

namespace anatomia {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::pair<Strategy, std::string_view> kStrategyNames[] = {
    {Strategy::anatomical, "anatomical"}, {Strategy::entropy, "entropy"}, {Strategy::threshold, "threshold"},
    {Strategy::mcdo, "mcdo"},             {Strategy::none, "none"},       {Strategy::supervised, "supervised"},
};

at::Tensor gaussian_like(const at::Tensor& like, double std, Rng& rng) {
  auto out = at::empty(like.sizes(), at::TensorOptions().dtype(at::kDouble));
  double* p = out.data_ptr<double>();
  for (std::int64_t i = 0; i < out.numel(); ++i) p[i] = rng.normal(0.0, std);
  return out.to(like.scalar_type());
}

// Sum over every axis except the leading batch axis.
at::Tensor per_sample_sum(const at::Tensor& x) { return x.reshape({x.size(0), -1}).sum(1); }

void check_pair(const at::Tensor& a, const at::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) throw ShapeError(std::string(what) + ": shape mismatch");
  if (a.dim() < 3) throw ShapeError(std::string(what) + ": expected [B, C, *spatial]");
}

}  // namespace

std::string to_string(Strategy s) {
  for (const auto& [k, name] : kStrategyNames)
    if (k == s) return std::string(name);
  throw InvariantError("unknown strategy");
}

Strategy parse_strategy(std::string_view name) {
  for (const auto& [k, n] : kStrategyNames)
    if (n == name) return k;
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

bool needs_dae(Strategy s) {
  return s == Strategy::anatomical || s == Strategy::entropy || s == Strategy::threshold;
}

void SslConfig::validate() const {
  arch.validate();
  if (arch.is_autoencoder()) throw ConfigError("ssl: backbone must not have a bottleneck");
  if (!(alpha >= 0 && alpha < 1)) throw ConfigError("ssl: alpha must be in [0,1)");
  if (!(beta >= 0)) throw ConfigError("ssl: beta must be >= 0");
  if (!(gamma >= 0)) throw ConfigError("ssl: gamma must be >= 0");
  if (!(lr0 > 0)) throw ConfigError("ssl: lr0 must be > 0");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("ssl: momentum must be in [0,1)");
  if (t_max < 1) throw ConfigError("ssl: t_max must be >= 1");
  if (labeled_per_batch < 1) throw ConfigError("ssl: labeled_per_batch must be >= 1");
  if (unlabeled_per_batch < 0) throw ConfigError("ssl: unlabeled_per_batch must be >= 0");
  if (static_cast<int>(patch_size.size()) != arch.rank) throw ConfigError("ssl: patch rank differs from arch rank");
  if (patch_size[0] != patch_size[1]) throw ConfigError("ssl: patch must be square in the first two axes");
  if (infer_stride.size() != patch_size.size()) throw ConfigError("ssl: infer_stride rank differs from patch");
  for (std::size_t i = 0; i < patch_size.size(); ++i)
    if (infer_stride[i] < 1 || infer_stride[i] > patch_size[i]) throw ConfigError("ssl: infer_stride out of range");
  if (!(teacher_input_noise >= 0)) throw ConfigError("ssl: teacher_input_noise must be >= 0");
  if (!(latent_noise_std >= 0)) throw ConfigError("ssl: latent_noise_std must be >= 0");
  if (!(threshold_cap_init > 0)) throw ConfigError("ssl: threshold_cap_init must be > 0");
  if (val_every < 1) throw ConfigError("ssl: val_every must be >= 1");
  if (strategy == Strategy::mcdo) {
    if (!(arch.dropout_rate > 0)) throw ConfigError("ssl: mcdo needs dropout_rate > 0");
    if (mcdo_samples < 2) throw ConfigError("ssl: mcdo_samples must be >= 2");
  }
}

ArchConfig default_segnet_arch(int num_classes, int rank, Strategy strategy) {
  ArchConfig a;
  a.rank = rank;
  a.num_classes = num_classes;
  a.dropout_rate = strategy == Strategy::mcdo ? 0.5 : 0.0;
  return a;
}

double lambda_c(double t, double t_max, double beta, double r) {
  const double phase = 1.0 - std::clamp(t / t_max, 0.0, 1.0);
  return beta * std::exp(-r * phase * phase);
}

double cosine_lr(double t, double t_max, double lr0) {
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * std::clamp(t / t_max, 0.0, 1.0)));
}

double threshold_schedule(double t, double t_max, double u_cap) {
  const double phase = 1.0 - std::clamp(t / t_max, 0.0, 1.0);
  return (0.75 + 0.25 * std::exp(-5.0 * phase * phase)) * u_cap;
}

at::Tensor supervised_loss(const at::Tensor& logits, const at::Tensor& labels) {
  if (labels.dim() != logits.dim() - 1 || labels.size(0) != logits.size(0))
    throw ShapeError("supervised_loss: labels must be [B, *spatial]");
  const auto log_p = at::log_softmax(logits, 1);
  const auto idx = labels.to(at::kLong).unsqueeze(1);
  const auto ce = -log_p.gather(1, idx).mean();
  const auto target = at::one_hot(labels.to(at::kLong), logits.size(1)).movedim(-1, 1).to(logits.scalar_type());
  return ce + soft_dice_loss(log_p.exp(), target);
}

at::Tensor uncertainty_anatomical(const at::Tensor& p_teacher, const at::Tensor& p_plausible) {
  check_pair(p_teacher, p_plausible, "uncertainty_anatomical");
  return (p_plausible - p_teacher).square().sum(1);
}

at::Tensor uncertainty_entropy(const at::Tensor& probs) {
  if (probs.dim() < 3) throw ShapeError("uncertainty_entropy: expected [B, C, *spatial]");
  return -at::xlogy(probs, probs).sum(1);
}

McdoResult uncertainty_mcdo(Network& teacher, const at::Tensor& x, int samples) {
  if (!(teacher.arch().dropout_rate > 0)) throw ConfigError("uncertainty_mcdo: teacher has no dropout");
  if (samples < 2) throw ConfigError("uncertainty_mcdo: need at least 2 samples");
  at::NoGradGuard no_grad;
  const Mode previous = teacher.mode();
  teacher.set_mode(Mode::train);
  at::Tensor sum;
  for (int k = 0; k < samples; ++k) {
    auto p = softmax_channels(teacher.forward(x));
    sum = k == 0 ? p : sum + p;
  }
  teacher.set_mode(previous);
  McdoResult r;
  r.mean_probs = sum / static_cast<double>(samples);
  r.uncertainty = uncertainty_entropy(r.mean_probs);
  return r;
}

at::Tensor reliability_weights(const at::Tensor& uncertainty, double gamma) {
  if (gamma < 0) throw ConfigError("reliability_weights: gamma must be >= 0");
  return at::exp(uncertainty * -gamma);
}

at::Tensor consistency_loss(const at::Tensor& p_student, const at::Tensor& p_teacher, const at::Tensor& weights) {
  check_pair(p_student, p_teacher, "consistency_loss");
  const auto w = weights.detach();
  if (w.dim() != p_student.dim() - 1 || w.size(0) != p_student.size(0))
    throw ShapeError("consistency_loss: weights must be [B, *spatial]");
  const auto denom = per_sample_sum(w);
  if ((denom <= 0).any().item<bool>()) throw DegenerateWeightError("consistency_loss: weights sum to zero");
  const auto sq = (p_student - p_teacher.detach()).square().sum(1);
  return (per_sample_sum(w * sq) / denom).mean();
}

at::Tensor threshold_consistency(const at::Tensor& p_student, const at::Tensor& p_teacher,
                                 const at::Tensor& uncertainty, double threshold) {
  check_pair(p_student, p_teacher, "threshold_consistency");
  const auto w = (uncertainty.detach() < threshold).to(p_student.scalar_type());
  const auto denom = per_sample_sum(w);
  const auto sq = (p_student - p_teacher.detach()).square().sum(1);
  const auto num = per_sample_sum(w * sq);
  // Empty masks contribute 0; the clamp only guards the division.
  const auto ratio = at::where(denom > 0, num / denom.clamp_min(1.0), at::zeros_like(num));
  return ratio.mean();
}

at::Tensor align_to_student(const at::Tensor& teacher_frame, const SslBatch& batch) {
  std::vector<at::Tensor> out;
  out.reserve(static_cast<std::size_t>(teacher_frame.size(0)));
  for (std::int64_t i = 0; i < teacher_frame.size(0); ++i) {
    const auto& s = batch.student_view[static_cast<std::size_t>(i)];
    const auto& t = batch.teacher_view[static_cast<std::size_t>(i)];
    out.push_back(apply_dihedral(apply_dihedral_inverse(teacher_frame[i], t, 1), s, 1));
  }
  return stack(out);
}

LossTerms compute_losses(Network& student, Network& teacher, Network* dae, const SslBatch& batch,
                         const SslConfig& cfg, std::int64_t t, LossState& state) {
  LossTerms out;
  const auto logits = student.forward(batch.student_input);
  out.supervised = supervised_loss(logits.narrow(0, 0, batch.n_labeled), batch.labels);
  if (cfg.strategy == Strategy::supervised) {
    out.consistency = at::zeros({}, logits.options());
    out.total = out.supervised;
    return out;
  }
  if (needs_dae(cfg.strategy) && dae == nullptr) throw ConfigError("ssl: strategy needs a shape prior");

  const auto p_s = softmax_channels(logits);
  const double lambda = lambda_c(static_cast<double>(t), static_cast<double>(cfg.t_max), cfg.beta, cfg.ramp_rate);

  at::Tensor p_t;
  {
    at::NoGradGuard no_grad;
    if (cfg.strategy == Strategy::mcdo) {
      const auto r = uncertainty_mcdo(teacher, batch.teacher_input, cfg.mcdo_samples);
      p_t = align_to_student(r.mean_probs, batch);
      out.uncertainty = align_to_student(r.uncertainty.unsqueeze(1), batch).squeeze(1);
    } else {
      const Mode previous = teacher.mode();
      teacher.set_mode(Mode::eval);
      p_t = align_to_student(softmax_channels(teacher.forward(batch.teacher_input)), batch);
      teacher.set_mode(previous);
      if (needs_dae(cfg.strategy)) {
        const Mode dae_previous = dae->mode();
        dae->set_mode(Mode::eval);
        const auto p_hat = dae_map(*dae, p_t, cfg.latent_noise_std, state.latent_rng);
        dae->set_mode(dae_previous);
        out.uncertainty = cfg.strategy == Strategy::entropy ? uncertainty_entropy(p_hat)
                                                            : uncertainty_anatomical(p_t, p_hat);
      }
    }
  }

  switch (cfg.strategy) {
    case Strategy::anatomical:
    case Strategy::entropy:
      out.consistency = consistency_loss(p_s, p_t, reliability_weights(out.uncertainty, cfg.gamma));
      break;
    case Strategy::threshold:
      state.u_cap = std::max(state.u_cap, out.uncertainty.max().item<double>());
      out.threshold = threshold_schedule(static_cast<double>(t), static_cast<double>(cfg.t_max), state.u_cap);
      out.consistency = threshold_consistency(p_s, p_t, out.uncertainty, out.threshold);
      break;
    case Strategy::mcdo:
      out.threshold = threshold_schedule(static_cast<double>(t), static_cast<double>(cfg.t_max),
                                         std::log(static_cast<double>(cfg.arch.num_classes + 1)));
      out.consistency = threshold_consistency(p_s, p_t, out.uncertainty, out.threshold);
      break;
    case Strategy::none:
      out.consistency = consistency_loss(p_s, p_t, at::ones_like(p_s.select(1, 0)).detach());
      break;
    case Strategy::supervised:
      break;
  }
  out.total = out.supervised + out.consistency * lambda;
  return out;
}

SslTrainer::SslTrainer(const DatasetSplit& split, SslConfig cfg, std::optional<Network> dae)
    : split_(split),
      cfg_(std::move(cfg)),
      student_([&] {
        cfg_.validate();
        Rng init = Rng(cfg_.seed).derive(1);
        return Network::segnet(cfg_.arch, init);
      }()),
      teacher_(student_.clone()),
      dae_(std::move(dae)),
      optimizer_(cfg_.momentum),
      data_rng_(Rng(cfg_.seed).derive(2)),
      loss_state_{Rng(cfg_.seed).derive(3), cfg_.threshold_cap_init} {
  if (split_.labeled.empty()) throw SizeError("ssl: no labeled cases");
  if (needs_dae(cfg_.strategy)) {
    if (!dae_) throw ConfigError("ssl: strategy '" + to_string(cfg_.strategy) + "' needs a shape prior");
    if (dae_->arch().num_classes != cfg_.arch.num_classes)
      throw ConsistencyError("ssl: shape prior class count differs from backbone");
    if (static_cast<int>(dae_->arch().grid.size()) != cfg_.arch.rank)
      throw ConsistencyError("ssl: shape prior rank differs from backbone");
    dae_->set_requires_grad(false);
    dae_->set_mode(Mode::eval);
  }
  for (const auto& c : split_.labeled)
    if (c.label.num_classes != cfg_.arch.num_classes)
      throw ConsistencyError("ssl: dataset class count differs from backbone");
  teacher_.set_requires_grad(false);
  teacher_.dropout_rng() = Rng(cfg_.seed).derive(4);
  student_.set_mode(Mode::train);
  teacher_.set_mode(Mode::eval);
}

SslBatch SslTrainer::next_batch() {
  SslBatch b;
  const int rank = cfg_.arch.rank;
  const bool semi = cfg_.strategy != Strategy::supervised;
  const int n_l = cfg_.labeled_per_batch;
  const int n_u = semi ? cfg_.unlabeled_per_batch : 0;
  b.n_labeled = n_l;
  std::vector<at::Tensor> s_in, t_in, labels;
  for (int i = 0; i < n_l + n_u; ++i) {
    Sample sample;
    if (i < n_l) {
      const auto& c = split_.labeled[static_cast<std::size_t>(
          data_rng_.uniform_int(0, static_cast<std::int64_t>(split_.labeled.size()) - 1))];
      sample = Sample{c.volume, c.label};
    } else if (!split_.unlabeled.empty()) {
      sample = Sample{split_.unlabeled[static_cast<std::size_t>(
                          data_rng_.uniform_int(0, static_cast<std::int64_t>(split_.unlabeled.size()) - 1))],
                      std::nullopt};
    } else {
      const auto& c = split_.labeled[static_cast<std::size_t>(
          data_rng_.uniform_int(0, static_cast<std::int64_t>(split_.labeled.size()) - 1))];
      sample = Sample{c.volume, std::nullopt};
    }
    Rng local = data_rng_.derive(static_cast<std::uint64_t>(t_), static_cast<std::uint64_t>(i));
    const auto crop = random_crop(sample, cfg_.patch_size, local);
    const auto sv = draw_dihedral(rank, local);
    const auto tv = draw_dihedral(rank, local);
    const auto student_view = apply_dihedral(crop, sv);
    auto teacher_image = apply_dihedral(to_tensor(crop.image), tv, 1);
    if (cfg_.teacher_input_noise > 0) teacher_image = teacher_image + gaussian_like(teacher_image, cfg_.teacher_input_noise, local);
    s_in.push_back(to_tensor(student_view.image));
    t_in.push_back(teacher_image);
    if (i < n_l) labels.push_back(to_label_tensor(*student_view.label));
    b.student_view.push_back(sv);
    b.teacher_view.push_back(tv);
  }
  b.student_input = stack(s_in).to(student_.dtype());
  b.teacher_input = stack(t_in).to(student_.dtype());
  b.labels = stack(labels);
  return b;
}

SslIterationLog SslTrainer::step() {
  if (done()) throw InvariantError("ssl: training already finished");
  const auto start = std::chrono::steady_clock::now();
  const auto f_s = student_.forward_count();
  const auto f_t = teacher_.forward_count();
  const auto f_d = dae_ ? dae_->forward_count() : 0;

  const auto batch = next_batch();
  const double lr = cosine_lr(static_cast<double>(t_), static_cast<double>(cfg_.t_max), cfg_.lr0);
  student_.zero_grad();
  const auto terms = compute_losses(student_, teacher_, dae(), batch, cfg_, t_, loss_state_);
  const double total = terms.total.item<double>();
  if (!std::isfinite(total)) throw DivergenceError("ssl: non-finite loss at iteration " + std::to_string(t_));
  terms.total.backward();
  optimizer_.step(student_, lr);
  {
    at::NoGradGuard no_grad;
    ema_update(teacher_, student_, cfg_.alpha);
  }

  SslIterationLog row;
  row.iteration = t_;
  row.lambda = cfg_.strategy == Strategy::supervised
                   ? 0.0
                   : lambda_c(static_cast<double>(t_), static_cast<double>(cfg_.t_max), cfg_.beta, cfg_.ramp_rate);
  row.supervised = terms.supervised.item<double>();
  row.consistency = terms.consistency.item<double>();
  row.total = total;
  row.lr = lr;
  row.forwards_student = student_.forward_count() - f_s;
  row.forwards_teacher = teacher_.forward_count() - f_t;
  row.forwards_dae = dae_ ? dae_->forward_count() - f_d : 0;
  row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  ++t_;
  return row;
}

Checkpoint SslTrainer::checkpoint() const {
  Checkpoint c;
  c.kind = "segnet";
  c.arch = cfg_.arch;
  c.iteration = t_;
  c.params = snapshot(student_.parameters());
  c.ema = snapshot(teacher_.parameters());
  c.optimizer = snapshot(optimizer_.state());
  c.rng_state = data_rng_.serialize();
  json meta;
  meta["strategy"] = to_string(cfg_.strategy);
  meta["latent_rng"] = loss_state_.latent_rng.serialize();
  meta["u_cap"] = loss_state_.u_cap;
  meta["student_dropout_rng"] = student_.dropout_rng().serialize();
  meta["teacher_dropout_rng"] = teacher_.dropout_rng().serialize();
  c.metadata = meta.dump();
  return c;
}

void SslTrainer::restore(const Checkpoint& ckpt) {
  if (ckpt.kind != "segnet") throw ConsistencyError("ssl: checkpoint is not a segmentation network");
  if (!(ckpt.arch == cfg_.arch)) throw ConsistencyError("ssl: checkpoint architecture differs from config");
  if (ckpt.ema.empty()) throw ConsistencyError("ssl: checkpoint has no teacher weights");
  const json meta = json::parse(ckpt.metadata);
  if (meta.value("strategy", std::string{}) != to_string(cfg_.strategy))
    throw ConsistencyError("ssl: checkpoint strategy differs from config");
  student_ = Network::from_parameters(cfg_.arch, ckpt.params);
  teacher_ = Network::from_parameters(cfg_.arch, ckpt.ema);
  teacher_.set_requires_grad(false);
  student_.dropout_rng() = Rng::deserialize(meta.at("student_dropout_rng").get<std::string>());
  teacher_.dropout_rng() = Rng::deserialize(meta.at("teacher_dropout_rng").get<std::string>());
  student_.set_mode(Mode::train);
  teacher_.set_mode(Mode::eval);
  optimizer_.load_state(snapshot(ckpt.optimizer));
  data_rng_ = Rng::deserialize(ckpt.rng_state);
  loss_state_.latent_rng = Rng::deserialize(meta.at("latent_rng").get<std::string>());
  loss_state_.u_cap = meta.at("u_cap").get<double>();
  t_ = ckpt.iteration;
}

SslResult train_ssl(const DatasetSplit& split, const SslConfig& cfg, std::optional<Network> dae,
                    const std::function<void(const SslIterationLog&)>& on_iteration) {
  SslTrainer trainer(split, cfg, std::move(dae));
  std::vector<SslIterationLog> log;
  log.reserve(static_cast<std::size_t>(cfg.t_max));
  const bool select = cfg.selection == ModelSelection::best_val && !split.val.empty();
  std::optional<Network> best;
  std::optional<double> best_dsc;
  std::int64_t best_at = 0;

  auto validate = [&] {
    auto reports = evaluate_model(trainer.student(), split.val, cfg.patch_size, cfg.infer_stride);
    double dsc = 0;
    for (const auto& r : reports) dsc += r.mean_dsc;
    dsc /= static_cast<double>(reports.size());
    if (!best_dsc || dsc > *best_dsc) {
      best_dsc = dsc;
      best = trainer.student().clone();
      best_at = trainer.iteration();
    }
  };

  while (!trainer.done()) {
    log.push_back(trainer.step());
    if (on_iteration) on_iteration(log.back());
    if (select && (trainer.iteration() % cfg.val_every == 0 || trainer.done())) validate();
  }

  Checkpoint ckpt = trainer.checkpoint();
  Network model = best ? std::move(*best) : trainer.student().clone();
  if (best) ckpt.params = snapshot(model.parameters());
  json meta = json::parse(ckpt.metadata);
  meta["selected_iteration"] = best ? best_at : trainer.iteration();
  ckpt.metadata = meta.dump();
  model.set_mode(Mode::eval);
  return SslResult{std::move(model), trainer.teacher().clone(), std::move(ckpt), std::move(log), best_dsc,
                   best ? best_at : trainer.iteration()};
}

void write_ssl_log(const std::vector<SslIterationLog>& rows, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(10);
  out << "iteration,lambda_c,L_s,L_c,lr,forwards_student,forwards_teacher,forwards_dae,wall_ms\n";
  for (const auto& r : rows)
    out << r.iteration << ',' << r.lambda << ',' << r.supervised << ',' << r.consistency << ',' << r.lr << ','
        << r.forwards_student << ',' << r.forwards_teacher << ',' << r.forwards_dae << ',' << r.wall_ms << '\n';
}

}  // namespace anatomia
