#include "anatomia/losses.hpp"

#include <vector>

namespace anatomia {

at::Tensor soft_dice_loss(const at::Tensor& probs, const at::Tensor& target, double eps) {
  const auto fg_p = probs.narrow(1, 1, probs.size(1) - 1);
  const auto fg_q = target.narrow(1, 1, target.size(1) - 1).to(probs.scalar_type());
  std::vector<std::int64_t> dims{0};
  for (std::int64_t d = 2; d < probs.dim(); ++d) dims.push_back(d);
  const auto inter = (fg_p * fg_q).sum(dims);
  const auto denom = (fg_p * fg_p).sum(dims) + (fg_q * fg_q).sum(dims);
  const auto dice = (2.0 * inter + eps) / (denom + eps);
  return 1.0 - dice.mean();
}

at::Tensor mse_loss(const at::Tensor& probs, const at::Tensor& target) {
  return (probs - target.to(probs.scalar_type())).pow(2).mean();
}

}  // namespace anatomia
