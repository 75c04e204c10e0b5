#include "anatomia/nets.hpp"

#include <cmath>

#include "anatomia/error.hpp"
#include "anatomia/tensor.hpp"

namespace anatomia {

namespace {

at::Tensor tensor_from(const std::vector<double>& values, const std::vector<std::int64_t>& shape,
                       at::ScalarType dtype) {
  auto t = at::empty(shape, at::kDouble);
  std::copy(values.begin(), values.end(), t.data_ptr<double>());
  return t.to(dtype);
}

at::Tensor normal_tensor(Rng& rng, const std::vector<std::int64_t>& shape, double std, at::ScalarType dtype) {
  std::vector<double> v(static_cast<std::size_t>(num_voxels(shape)));
  for (auto& x : v) x = std * rng.normal();
  return tensor_from(v, shape, dtype);
}

std::int64_t pow2(int n) { return std::int64_t{1} << n; }

}  // namespace

void ArchConfig::validate() const {
  if (rank != 2 && rank != 3) throw ConfigError("arch: rank must be 2 or 3");
  if (in_channels < 1) throw ConfigError("arch: in_channels must be >= 1");
  if (num_classes < 1) throw ConfigError("arch: num_classes must be >= 1");
  if (base_width < 1) throw ConfigError("arch: base_width must be >= 1");
  if (depth < 2) throw ConfigError("arch: depth must be >= 2");
  if (convs_per_level < 1) throw ConfigError("arch: convs_per_level must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("arch: dropout_rate must be in [0,1)");
  if (bottleneck_dim) {
    if (*bottleneck_dim < 1) throw ConfigError("arch: bottleneck_dim must be >= 1");
    if (skip_connections) throw ConfigError("arch: an autoencoder cannot have skip connections");
    if (static_cast<int>(grid.size()) != rank) throw ConfigError("arch: autoencoder grid must match rank");
    for (auto e : grid)
      if (e <= 0 || e % pow2(depth - 1) != 0)
        throw ConfigError("arch: autoencoder grid must be divisible by 2^(depth-1)");
  }
}

Network Network::segnet(const ArchConfig& arch, Rng& rng, at::ScalarType dtype) {
  arch.validate();
  if (!arch.skip_connections || arch.bottleneck_dim)
    throw ConfigError("segnet: needs skip connections and no bottleneck_dim");
  Network net;
  net.arch_ = arch;
  net.dropout_rng_ = rng.derive(0xD50F);
  net.build(&rng, dtype);
  return net;
}

Network Network::autoencoder(const ArchConfig& arch, Rng& rng, at::ScalarType dtype) {
  arch.validate();
  if (arch.skip_connections || !arch.bottleneck_dim)
    throw ConfigError("autoencoder: needs bottleneck_dim and no skip connections");
  Network net;
  net.arch_ = arch;
  net.dropout_rng_ = rng.derive(0xD50F);
  net.build(&rng, dtype);
  return net;
}

Network Network::from_parameters(const ArchConfig& arch, const std::vector<NamedTensor>& params) {
  arch.validate();
  if (params.empty()) throw ConsistencyError("from_parameters: no parameters");
  Network net;
  net.arch_ = arch;
  net.build(nullptr, params.front().value.scalar_type());
  if (params.size() != net.params_.size())
    throw ConsistencyError("from_parameters: expected " + std::to_string(net.params_.size()) + " tensors, got " +
                           std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& slot = net.params_[i];
    if (slot.name != params[i].name || !slot.value.sizes().equals(params[i].value.sizes()))
      throw ConsistencyError("from_parameters: tensor '" + params[i].name + "' does not fit slot '" + slot.name +
                             "'");
    slot.value = params[i].value.detach().clone().set_requires_grad(true);
  }
  return net;
}

at::ScalarType Network::dtype() const { return params_.front().value.scalar_type(); }

int Network::add_param(const std::string& name, std::vector<std::int64_t> shape, double init_std, Rng* rng,
                       at::ScalarType dtype, double fill) {
  at::Tensor t = (rng && init_std > 0.0) ? normal_tensor(*rng, shape, init_std, dtype)
                                         : at::full(shape, fill, at::TensorOptions().dtype(dtype));
  t.set_requires_grad(true);
  params_.push_back({name, t});
  return static_cast<int>(params_.size()) - 1;
}

Network::Unit Network::add_unit(const std::string& prefix, int in, int out, int kernel, int stride,
                                bool transposed, Rng* rng, at::ScalarType dtype) {
  std::vector<std::int64_t> shape = transposed ? std::vector<std::int64_t>{in, out} : std::vector<std::int64_t>{out, in};
  for (int a = 0; a < arch_.rank; ++a) shape.push_back(kernel);
  // He initialization on the number of inputs feeding one output voxel.
  const double fan_in = transposed ? static_cast<double>(in)
                                   : static_cast<double>(in) * std::pow(static_cast<double>(kernel), arch_.rank);
  Unit u;
  u.conv.weight = add_param(prefix + ".weight", shape, std::sqrt(2.0 / fan_in), rng, dtype);
  u.conv.stride = stride;
  u.conv.padding = transposed ? 0 : (kernel - 1) / 2;
  u.conv.transposed = transposed;
  u.norm.gamma = add_param(prefix + ".norm.gamma", {out}, 0.0, rng, dtype, 1.0);
  u.norm.beta = add_param(prefix + ".norm.beta", {out}, 0.0, rng, dtype, 0.0);
  return u;
}

void Network::build(Rng* rng, at::ScalarType dtype) {
  const auto& a = arch_;
  encoder_.assign(a.depth, {});
  for (int l = 0; l < a.depth; ++l) {
    const int width = a.base_width << l;
    auto& level = encoder_[l];
    for (int i = 0; i < a.convs_per_level; ++i) {
      const int in = i > 0 ? width : (l == 0 ? a.in_channels : width);
      level.block.push_back(add_unit("enc" + std::to_string(l) + ".conv" + std::to_string(i), in, width, 3, 1,
                                     false, rng, dtype));
    }
    level.dropout = a.dropout_rate > 0.0 && l >= a.depth - 2;
    if (l + 1 < a.depth)
      level.resample = add_unit("enc" + std::to_string(l) + ".down", width, width * 2, 2, 2, false, rng, dtype);
  }

  if (a.bottleneck_dim) {
    const int channels = a.base_width << (a.depth - 1);
    bottleneck_shape_ = {channels};
    std::int64_t flat = channels;
    for (auto e : a.grid) {
      bottleneck_shape_.push_back(e / pow2(a.depth - 1));
      flat *= e / pow2(a.depth - 1);
    }
    const std::int64_t d = *a.bottleneck_dim;
    dense_in_w_ = add_param("latent.encode.weight", {d, flat}, std::sqrt(1.0 / static_cast<double>(flat)), rng, dtype);
    dense_in_b_ = add_param("latent.encode.bias", {d}, 0.0, rng, dtype);
    dense_out_w_ = add_param("latent.decode.weight", {flat, d}, std::sqrt(2.0 / static_cast<double>(d)), rng, dtype);
    dense_out_b_ = add_param("latent.decode.bias", {flat}, 0.0, rng, dtype);
  }

  decoder_.clear();
  for (int l = a.depth - 2; l >= 0; --l) {
    const int width = a.base_width << l;
    Level level;
    level.resample = add_unit("dec" + std::to_string(l) + ".up", width * 2, width, 2, 2, true, rng, dtype);
    for (int i = 0; i < a.convs_per_level; ++i) {
      const int in = i > 0 ? width : (a.skip_connections ? 2 * width : width);
      level.block.push_back(add_unit("dec" + std::to_string(l) + ".conv" + std::to_string(i), in, width, 3, 1,
                                     false, rng, dtype));
    }
    level.dropout = a.dropout_rate > 0.0 && l >= a.depth - 3;
    decoder_.push_back(std::move(level));
  }

  std::vector<std::int64_t> head_shape{a.num_classes + 1, a.base_width};
  for (int r = 0; r < a.rank; ++r) head_shape.push_back(1);
  head_.weight = add_param("head.weight", head_shape, std::sqrt(1.0 / a.base_width), rng, dtype);
  head_.bias = add_param("head.bias", {a.num_classes + 1}, 0.0, rng, dtype);
}

at::Tensor Network::run_conv(const Conv& c, const at::Tensor& x) const {
  const auto& w = params_[c.weight].value;
  const std::optional<at::Tensor> b = c.bias >= 0 ? std::optional<at::Tensor>(params_[c.bias].value) : std::nullopt;
  if (arch_.rank == 2) {
    return c.transposed ? at::conv_transpose2d(x, w, b, c.stride) : at::conv2d(x, w, b, c.stride, c.padding);
  }
  return c.transposed ? at::conv_transpose3d(x, w, b, c.stride) : at::conv3d(x, w, b, c.stride, c.padding);
}

at::Tensor Network::run_unit(const Unit& u, const at::Tensor& x) const {
  auto y = run_conv(u.conv, x);
  y = at::instance_norm(y, params_[u.norm.gamma].value, params_[u.norm.beta].value, {}, {}, true, 0.0, 1e-5,
                        false);
  return at::relu(y);
}

at::Tensor Network::dropout(const at::Tensor& x) {
  if (mode_ != Mode::train || arch_.dropout_rate <= 0.0) return x;
  // Channel-wise (spatial) dropout with inverted scaling.
  const double keep = 1.0 - arch_.dropout_rate;
  std::vector<double> mask(static_cast<std::size_t>(x.size(0) * x.size(1)));
  for (auto& m : mask) m = dropout_rng_.uniform() < keep ? 1.0 / keep : 0.0;
  std::vector<std::int64_t> shape{x.size(0), x.size(1)};
  for (int r = 0; r < arch_.rank; ++r) shape.push_back(1);
  return x * tensor_from(mask, shape, x.scalar_type());
}

void Network::check_input(const at::Tensor& x) const {
  if (x.dim() != arch_.rank + 2)
    throw ShapeError("network input must have rank " + std::to_string(arch_.rank + 2));
  if (x.size(1) != arch_.in_channels)
    throw ShapeError("network expects " + std::to_string(arch_.in_channels) + " input channels, got " +
                     std::to_string(x.size(1)));
  for (int a = 0; a < arch_.rank; ++a) {
    const auto e = x.size(2 + a);
    if (e % pow2(arch_.depth - 1) != 0)
      throw ShapeError("spatial extent " + std::to_string(e) + " is not divisible by " +
                       std::to_string(pow2(arch_.depth - 1)));
    if (arch_.bottleneck_dim && e != arch_.grid[a])
      throw ShapeError("autoencoder input extent " + std::to_string(e) + " differs from its grid " +
                       to_string(arch_.grid));
  }
}

at::Tensor Network::run_encoder(const at::Tensor& x, std::vector<at::Tensor>* skips) {
  check_input(x);
  at::Tensor h = x.to(dtype());
  for (auto& level : encoder_) {
    for (const auto& u : level.block) h = run_unit(u, h);
    if (level.dropout) h = dropout(h);
    if (level.resample) {
      if (skips) skips->push_back(h);
      h = run_unit(*level.resample, h);
    }
  }
  return h;
}

at::Tensor Network::run_decoder(at::Tensor h, const std::vector<at::Tensor>* skips) {
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    auto& level = decoder_[i];
    h = run_unit(*level.resample, h);
    if (skips) h = at::cat({h, (*skips)[skips->size() - 1 - i]}, 1);
    for (const auto& u : level.block) h = run_unit(u, h);
    if (level.dropout) h = dropout(h);
  }
  return run_conv(head_, h);
}

at::Tensor Network::forward(const at::Tensor& x) {
  ++forward_count_;
  if (arch_.bottleneck_dim) return decode(encode(x));
  std::vector<at::Tensor> skips;
  const auto h = run_encoder(x, &skips);
  return run_decoder(h, &skips);
}

at::Tensor Network::encode(const at::Tensor& x) {
  if (!arch_.bottleneck_dim) throw ConfigError("encode: network has no latent layer");
  const auto h = run_encoder(x, nullptr);
  return at::linear(h.flatten(1), params_[dense_in_w_].value, params_[dense_in_b_].value);
}

at::Tensor Network::decode(const at::Tensor& latent) {
  if (!arch_.bottleneck_dim) throw ConfigError("decode: network has no latent layer");
  auto h = at::relu(at::linear(latent, params_[dense_out_w_].value, params_[dense_out_b_].value));
  std::vector<std::int64_t> shape{latent.size(0)};
  shape.insert(shape.end(), bottleneck_shape_.begin(), bottleneck_shape_.end());
  return run_decoder(h.view(shape), nullptr);
}

at::Tensor Network::forward_with_latent_noise(const at::Tensor& x, double latent_noise, Rng& rng) {
  ++forward_count_;
  auto z = encode(x);
  if (latent_noise > 0.0) {
    std::vector<std::int64_t> shape(z.sizes().begin(), z.sizes().end());
    z = z + normal_tensor(rng, shape, latent_noise, z.scalar_type());
  }
  return decode(z);
}

std::int64_t Network::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

void Network::set_requires_grad(bool on) {
  for (auto& p : params_) p.value.set_requires_grad(on);
}

void Network::zero_grad() {
  for (auto& p : params_) {
    auto& g = p.value.mutable_grad();
    if (g.defined()) g = at::Tensor();
  }
}

Network Network::clone() const {
  Network out = *this;
  for (auto& p : out.params_) {
    const bool grad = p.value.requires_grad();
    p.value = p.value.detach().clone();
    p.value.set_requires_grad(grad);
  }
  out.forward_count_ = 0;
  return out;
}

at::Tensor softmax_channels(const at::Tensor& logits) { return at::softmax(logits, 1); }

namespace {

at::Tensor resample_linear(const at::Tensor& x, const Shape& size) {
  if (x.dim() == 4) return at::upsample_bilinear2d(x, size, false);
  return at::upsample_trilinear3d(x, size, false);
}

}  // namespace

at::Tensor dae_map(Network& dae, const at::Tensor& probs, double latent_noise, Rng& rng) {
  if (latent_noise < 0.0) throw InvariantError("dae_map: latent noise must be >= 0");
  const Shape spatial(probs.sizes().begin() + 2, probs.sizes().end());
  const Shape& grid = dae.arch().grid;
  const bool resized = spatial != grid;
  const auto input = resized ? resample_linear(probs, grid) : probs;
  auto out = softmax_channels(dae.forward_with_latent_noise(input, latent_noise, rng));
  if (resized) {
    out = resample_linear(out, spatial);
    out = out / out.sum(1, true);
  }
  return out;
}

AxisTiling tile_axis(std::int64_t extent, std::int64_t patch, std::int64_t stride) {
  if (patch < 1 || stride < 1 || stride > patch) throw InvariantError("tile_axis: need 1 <= stride <= patch");
  const std::int64_t n = extent <= patch ? 1 : (extent - patch + stride - 1) / stride + 1;
  AxisTiling t;
  t.padded = (n - 1) * stride + patch;
  t.pad_before = (t.padded - extent) / 2;
  for (std::int64_t i = 0; i < n; ++i) t.origins.push_back(i * stride);
  return t;
}

ProbMap sliding_window_infer(const PatchPredictor& predict, const Volume& volume, const Shape& patch,
                             const Shape& stride, int channels) {
  volume.validate();
  const int rank = volume.rank();
  if (static_cast<int>(patch.size()) != rank || static_cast<int>(stride.size()) != rank)
    throw ShapeError("sliding window: patch/stride rank differs from the volume");

  std::vector<AxisTiling> tiling;
  std::vector<std::int64_t> pads;  // constant_pad_nd wants last axis first
  Shape padded_shape;
  for (int a = 0; a < rank; ++a) tiling.push_back(tile_axis(volume.shape[a], patch[a], stride[a]));
  for (int a = rank - 1; a >= 0; --a) {
    pads.push_back(tiling[a].pad_before);
    pads.push_back(tiling[a].padded - volume.shape[a] - tiling[a].pad_before);
  }
  for (int a = 0; a < rank; ++a) padded_shape.push_back(tiling[a].padded);

  const auto image = at::constant_pad_nd(to_tensor(volume).unsqueeze(0), pads, 0.0);
  std::vector<std::int64_t> acc_shape{channels};
  acc_shape.insert(acc_shape.end(), padded_shape.begin(), padded_shape.end());
  auto acc = at::zeros(acc_shape, at::kDouble);
  auto hits = at::zeros(padded_shape, at::kDouble);

  std::array<std::size_t, 3> idx{0, 0, 0};
  std::array<std::size_t, 3> counts{1, 1, 1};
  for (int a = 0; a < rank; ++a) counts[a] = tiling[a].origins.size();
  for (idx[0] = 0; idx[0] < counts[0]; ++idx[0])
    for (idx[1] = 0; idx[1] < counts[1]; ++idx[1])
      for (idx[2] = 0; idx[2] < counts[2]; ++idx[2]) {
        at::Tensor window = image;
        at::Tensor acc_view = acc;
        at::Tensor hit_view = hits;
        for (int a = 0; a < rank; ++a) {
          const auto o = tiling[a].origins[idx[a]];
          window = window.narrow(2 + a, o, patch[a]);
          acc_view = acc_view.narrow(1 + a, o, patch[a]);
          hit_view = hit_view.narrow(a, o, patch[a]);
        }
        const auto probs = predict(window.contiguous());
        if (probs.dim() != rank + 2 || probs.size(1) != channels)
          throw ShapeError("sliding window: predictor returned an unexpected shape");
        acc_view.add_(probs[0].to(at::kDouble));
        hit_view.add_(1.0);
      }

  for (int a = 0; a < rank; ++a) {
    acc = acc.narrow(1 + a, tiling[a].pad_before, volume.shape[a]);
    hits = hits.narrow(a, tiling[a].pad_before, volume.shape[a]);
  }
  auto mean = acc / hits.unsqueeze(0);
  mean = mean / mean.sum(0, true);
  return to_probmap(mean);
}

ProbMap sliding_window_infer(Network& model, const Volume& volume, const Shape& patch, const Shape& stride) {
  const Mode previous = model.mode();
  model.set_mode(Mode::eval);
  at::NoGradGuard no_grad;
  const auto dtype = model.dtype();
  auto result = sliding_window_infer(
      [&](const at::Tensor& window) { return softmax_channels(model.forward(window.to(dtype))); }, volume, patch,
      stride, model.arch().num_classes + 1);
  model.set_mode(previous);
  return result;
}

}  // namespace anatomia
