#pragma once

#include <ATen/ATen.h>

namespace anatomia {

inline constexpr double kDiceEpsilon = 1e-5;

/// 1 - mean over foreground channels c >= 1 of
/// (2 sum(p q) + eps) / (sum(p^2) + sum(q^2) + eps), sums over batch and
/// space. `probs` and `target` are [B, C+1, *spatial].
at::Tensor soft_dice_loss(const at::Tensor& probs, const at::Tensor& target, double eps = kDiceEpsilon);

/// Mean over every voxel and channel of (probs - target)^2.
at::Tensor mse_loss(const at::Tensor& probs, const at::Tensor& target);

}  // namespace anatomia
