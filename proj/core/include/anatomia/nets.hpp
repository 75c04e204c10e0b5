#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <ATen/ATen.h>
#include <ATen/core/grad_mode.h>

#include "anatomia/rng.hpp"
#include "anatomia/types.hpp"

namespace anatomia {

/// Encoder-decoder layout shared by the segmentation backbone and the
/// denoising autoencoder.
struct ArchConfig {
  int rank = 2;
  int in_channels = 1;
  /// Foreground classes; networks emit num_classes + 1 logits.
  int num_classes = 1;
  int base_width = 8;
  /// Encoder levels; spatial extents must be divisible by 2^(depth-1).
  int depth = 3;
  int convs_per_level = 2;
  double dropout_rate = 0.0;
  bool skip_connections = true;
  /// Dense latent size of the autoencoder; absent for the backbone.
  std::optional<int> bottleneck_dim;
  /// Fixed input extent of the autoencoder (its dense layer depends on it).
  Shape grid;

  /// Throws ConfigError when inconsistent.
  void validate() const;
  [[nodiscard]] bool is_autoencoder() const { return bottleneck_dim.has_value(); }

  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

struct NamedTensor {
  std::string name;
  at::Tensor value;
};

enum class Mode { train, eval };

/// A network as a flat list of named parameter tensors plus its layout.
/// Execution is functional over those tensors, so EMA, optimizers and
/// checkpoints all work on the same list.
class Network {
 public:
  /// Backbone with skip connections. Requires skip_connections and no
  /// bottleneck_dim.
  static Network segnet(const ArchConfig& arch, Rng& rng, at::ScalarType dtype = at::kFloat);
  /// Autoencoder: same trunk without skips and a dense latent of size d.
  static Network autoencoder(const ArchConfig& arch, Rng& rng, at::ScalarType dtype = at::kFloat);
  /// Network with the parameters of `params` (names and shapes must match
  /// the layout implied by `arch`).
  static Network from_parameters(const ArchConfig& arch, const std::vector<NamedTensor>& params);

  [[nodiscard]] const ArchConfig& arch() const { return arch_; }
  [[nodiscard]] at::ScalarType dtype() const;

  void set_mode(Mode mode) { mode_ = mode; }
  [[nodiscard]] Mode mode() const { return mode_; }

  /// Logits [B, C+1, *spatial] for input [B, in_channels, *spatial]. Dropout
  /// is active only in train mode. Counts one forward pass.
  at::Tensor forward(const at::Tensor& x);

  /// Autoencoder halves. These do not touch the forward counter.
  at::Tensor encode(const at::Tensor& x);
  at::Tensor decode(const at::Tensor& latent);

  /// Autoencoder pass with Gaussian noise of std `latent_noise` added to the
  /// latent code. Counts one forward pass.
  at::Tensor forward_with_latent_noise(const at::Tensor& x, double latent_noise, Rng& rng);

  [[nodiscard]] std::vector<NamedTensor>& parameters() { return params_; }
  [[nodiscard]] const std::vector<NamedTensor>& parameters() const { return params_; }
  [[nodiscard]] std::int64_t parameter_count() const;

  void set_requires_grad(bool on);
  void zero_grad();

  /// Deep copy with detached parameters and a fresh forward counter.
  [[nodiscard]] Network clone() const;

  [[nodiscard]] std::uint64_t forward_count() const { return forward_count_; }
  void reset_forward_count() { forward_count_ = 0; }

  /// Stream that drives dropout masks.
  Rng& dropout_rng() { return dropout_rng_; }
  [[nodiscard]] const Rng& dropout_rng() const { return dropout_rng_; }

 private:
  struct Conv {
    int weight = -1;
    int bias = -1;
    int stride = 1;
    int padding = 0;
    bool transposed = false;
  };
  struct Norm {
    int gamma = -1;
    int beta = -1;
  };
  struct Unit {
    Conv conv;
    Norm norm;
  };
  struct Level {
    std::vector<Unit> block;
    std::optional<Unit> resample;  // down conv (encoder) or up conv (decoder)
    bool dropout = false;
  };

  Network() = default;
  void build(Rng* rng, at::ScalarType dtype);
  int add_param(const std::string& name, std::vector<std::int64_t> shape, double init_std, Rng* rng,
                at::ScalarType dtype, double fill = 0.0);
  Unit add_unit(const std::string& prefix, int in, int out, int kernel, int stride, bool transposed, Rng* rng,
                at::ScalarType dtype);

  at::Tensor run_unit(const Unit& u, const at::Tensor& x) const;
  at::Tensor run_conv(const Conv& c, const at::Tensor& x) const;
  at::Tensor dropout(const at::Tensor& x);
  void check_input(const at::Tensor& x) const;
  at::Tensor run_encoder(const at::Tensor& x, std::vector<at::Tensor>* skips);
  at::Tensor run_decoder(at::Tensor x, const std::vector<at::Tensor>* skips);

  ArchConfig arch_;
  std::vector<NamedTensor> params_;
  std::vector<Level> encoder_;
  std::vector<Level> decoder_;  // deepest first
  Conv head_;
  int dense_in_w_ = -1, dense_in_b_ = -1, dense_out_w_ = -1, dense_out_b_ = -1;
  std::vector<std::int64_t> bottleneck_shape_;  // [channels, *spatial]
  Mode mode_ = Mode::train;
  std::uint64_t forward_count_ = 0;
  Rng dropout_rng_;
};

/// Softmax over the channel axis (dim 1).
at::Tensor softmax_channels(const at::Tensor& logits);

/// Maps a batch of probability maps through the autoencoder: resample to
/// its grid if needed, encode, add latent noise, decode, softmax, resample
/// back. One forward pass.
at::Tensor dae_map(Network& dae, const at::Tensor& probs, double latent_noise, Rng& rng);

/// Patch-level predictor: [1, in, *patch] -> probabilities [1, C+1, *patch].
using PatchPredictor = std::function<at::Tensor(const at::Tensor&)>;

/// Origins of the windows tiling an axis of length `extent` after padding to
/// (n-1)*stride + patch, plus the leading pad.
struct AxisTiling {
  std::vector<std::int64_t> origins;
  std::int64_t padded = 0;
  std::int64_t pad_before = 0;
};
AxisTiling tile_axis(std::int64_t extent, std::int64_t patch, std::int64_t stride);

/// Zero-pads the volume to be covered by windows, averages window
/// probabilities over overlaps and renormalizes per voxel.
ProbMap sliding_window_infer(const PatchPredictor& predict, const Volume& volume, const Shape& patch,
                             const Shape& stride, int channels);

/// Same, running `model` in eval mode without gradients.
ProbMap sliding_window_infer(Network& model, const Volume& volume, const Shape& patch, const Shape& stride);

}  // namespace anatomia
