#pragma once

#include <vector>

#include "anatomia/nets.hpp"

namespace anatomia {

/// SGD with heavy-ball momentum (buf = m * buf + g; p -= lr * buf).
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum = 0.9) : momentum_(momentum) {}

  /// Applies one update to every parameter that has a gradient.
  void step(Network& net, double lr);

  [[nodiscard]] double momentum() const { return momentum_; }
  [[nodiscard]] const std::vector<NamedTensor>& state() const { return buffers_; }
  void load_state(std::vector<NamedTensor> buffers) { buffers_ = std::move(buffers); }

 private:
  double momentum_;
  std::vector<NamedTensor> buffers_;
};

/// theta_T <- alpha * theta_T + (1 - alpha) * theta_S, elementwise. Throws
/// ConsistencyError when the parameter lists are not congruent.
void ema_update(Network& teacher, const Network& student, double alpha);

}  // namespace anatomia
