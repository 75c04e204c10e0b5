#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <ATen/ATen.h>
#include <ATen/core/grad_mode.h>

namespace oracle {

struct GradientCheck {
  double relative_error = 0;  // |g_fd - g_ad| / |g_ad| over the smooth elements
  double autograd_norm = 0;
  std::int64_t elements = 0;
  std::int64_t kinked = 0;  // elements whose stencil straddles a ReLU kink
};

// Central differences of the scalar `f` with respect to every element of the
// double-precision leaves, compared with autograd. An element whose
// difference at `step` disagrees with the one at `step / 2` by more than 1e-5
// of the RMS gradient has a non-differentiable point inside its stencil; it is
// counted in `kinked` and left out of the error norm.
inline GradientCheck check_gradients(const std::function<at::Tensor()>& f, const std::vector<at::Tensor>& leaves,
                                     double step = 1e-3) {
  for (const auto& l : leaves) {
    auto& g = const_cast<at::Tensor&>(l).mutable_grad();
    if (g.defined()) g = at::Tensor();
  }
  f().backward();
  struct Sample {
    double fd, fd_half, ad;
  };
  std::vector<Sample> samples;
  for (const auto& leaf : leaves) {
    const auto grad = leaf.grad().defined() ? leaf.grad() : at::zeros_like(leaf);
    at::NoGradGuard no_grad;
    auto flat = leaf.view({-1});
    for (std::int64_t i = 0; i < flat.numel(); ++i) {
      const double x0 = flat[i].item<double>();
      flat[i].fill_(x0 + step);
      const double up = f().item<double>();
      flat[i].fill_(x0 - step);
      const double down = f().item<double>();
      flat[i].fill_(x0 + step / 2);
      const double up_half = f().item<double>();
      flat[i].fill_(x0 - step / 2);
      const double down_half = f().item<double>();
      flat[i].fill_(x0);
      samples.push_back({(up - down) / (2 * step), (up_half - down_half) / step, grad.view({-1})[i].item<double>()});
    }
  }
  double all2 = 0;
  for (const auto& s : samples) all2 += s.ad * s.ad;
  const double rms = std::sqrt(all2 / std::max<std::size_t>(samples.size(), 1));
  GradientCheck out;
  out.elements = static_cast<std::int64_t>(samples.size());
  double diff2 = 0, ref2 = 0;
  for (const auto& s : samples) {
    if (std::abs(s.fd - s.fd_half) > 1e-5 * rms) {
      ++out.kinked;
      continue;
    }
    diff2 += (s.fd - s.ad) * (s.fd - s.ad);
    ref2 += s.ad * s.ad;
  }
  out.autograd_norm = std::sqrt(ref2);
  out.relative_error = std::sqrt(diff2) / std::max(out.autograd_norm, 1e-300);
  return out;
}

}  // namespace oracle
