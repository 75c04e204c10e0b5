#include "anatomia/optim.hpp"

#include "anatomia/error.hpp"

namespace anatomia {

void SgdMomentum::step(Network& net, double lr) {
  at::NoGradGuard no_grad;
  auto& params = net.parameters();
  if (buffers_.empty()) {
    for (const auto& p : params) buffers_.push_back({p.name, at::zeros_like(p.value)});
  }
  if (buffers_.size() != params.size()) throw ConsistencyError("optimizer state does not match the network");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].value;
    const auto& g = p.grad();
    if (!g.defined()) continue;
    auto& buf = buffers_[i].value;
    buf.mul_(momentum_).add_(g);
    p.sub_(buf, lr);
  }
}

void ema_update(Network& teacher, const Network& student, double alpha) {
  auto& t = teacher.parameters();
  const auto& s = student.parameters();
  if (t.size() != s.size()) throw ConsistencyError("ema_update: parameter lists differ in length");
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i].name != s[i].name || !t[i].value.sizes().equals(s[i].value.sizes()))
      throw ConsistencyError("ema_update: parameter '" + t[i].name + "' does not match '" + s[i].name + "'");
  at::NoGradGuard no_grad;
  for (std::size_t i = 0; i < t.size(); ++i) t[i].value.mul_(alpha).add_(s[i].value.detach(), 1.0 - alpha);
}

}  // namespace anatomia
