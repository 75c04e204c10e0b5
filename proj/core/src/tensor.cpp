#include "anatomia/tensor.hpp"

#include "anatomia/error.hpp"

namespace anatomia {

namespace {

std::vector<std::int64_t> with_leading(std::int64_t lead, const Shape& shape) {
  std::vector<std::int64_t> s{lead};
  s.insert(s.end(), shape.begin(), shape.end());
  return s;
}

}  // namespace

at::Tensor to_tensor(const Volume& volume, at::ScalarType dtype) {
  auto t = at::empty(with_leading(1, volume.shape), at::kFloat);
  std::copy(volume.data.begin(), volume.data.end(), t.data_ptr<float>());
  return t.to(dtype);
}

at::Tensor to_tensor(const ProbMap& probs, at::ScalarType dtype) {
  auto t = at::empty(with_leading(probs.channels, probs.shape), at::kFloat);
  std::copy(probs.data.begin(), probs.data.end(), t.data_ptr<float>());
  return t.to(dtype);
}

at::Tensor to_label_tensor(const LabelMask& mask) {
  auto t = at::empty(mask.shape, at::kLong);
  auto* dst = t.data_ptr<std::int64_t>();
  for (std::size_t i = 0; i < mask.data.size(); ++i) dst[i] = mask.data[i];
  return t;
}

at::Tensor one_hot_tensor(const LabelMask& mask, double smoothing, at::ScalarType dtype) {
  const int channels = mask.num_classes + 1;
  auto t = at::one_hot(to_label_tensor(mask), channels).movedim(-1, 0).to(dtype);
  if (smoothing > 0.0) t = t * (1.0 - smoothing) + smoothing / channels;
  return t.contiguous();
}

ProbMap to_probmap(const at::Tensor& probs) {
  if (probs.dim() < 3) throw ShapeError("to_probmap: expected [C, *spatial]");
  const auto p = probs.detach().to(at::kFloat).contiguous();
  ProbMap out(static_cast<int>(p.size(0)), Shape(p.sizes().begin() + 1, p.sizes().end()));
  std::copy(p.data_ptr<float>(), p.data_ptr<float>() + p.numel(), out.data.begin());
  return out;
}

UncertaintyMap to_uncertainty_map(const at::Tensor& values) {
  const auto u = values.detach().to(at::kFloat).contiguous();
  UncertaintyMap out;
  out.shape.assign(u.sizes().begin(), u.sizes().end());
  out.data.assign(u.data_ptr<float>(), u.data_ptr<float>() + u.numel());
  return out;
}

at::Tensor apply_dihedral(const at::Tensor& x, const DihedralTransform& t, int leading) {
  const int rank = static_cast<int>(x.dim()) - leading;
  std::vector<std::int64_t> dims;
  for (int a = 0; a < rank; ++a)
    if (t.flip[a]) dims.push_back(leading + a);
  at::Tensor y = dims.empty() ? x : at::flip(x, dims);
  const int k = ((t.quarter_turns % 4) + 4) % 4;
  if (k != 0) y = at::rot90(y, k, {leading, leading + 1});
  return y;
}

at::Tensor apply_dihedral_inverse(const at::Tensor& x, const DihedralTransform& t, int leading) {
  const int rank = static_cast<int>(x.dim()) - leading;
  const int k = ((t.quarter_turns % 4) + 4) % 4;
  at::Tensor y = k == 0 ? x : at::rot90(x, -k, {leading, leading + 1});
  std::vector<std::int64_t> dims;
  for (int a = 0; a < rank; ++a)
    if (t.flip[a]) dims.push_back(leading + a);
  return dims.empty() ? y : at::flip(y, dims);
}

at::Tensor stack(const std::vector<at::Tensor>& items) { return at::stack(items, 0); }

}  // namespace anatomia
