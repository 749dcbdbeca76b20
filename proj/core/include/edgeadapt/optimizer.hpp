#pragma once

#include <vector>

#include "edgeadapt/error.hpp"
#include "edgeadapt/model.hpp"

namespace edgeadapt {

/// SGD with heavy-ball momentum:  v <- momentum * v + g;  p <- p - lr * v.
/// Velocity buffers are created on the first step and must keep matching the
/// masked slot set afterwards.
template <typename Real>
class BasicSgdMomentum {
 public:
  BasicSgdMomentum(Real learning_rate, Real momentum)
      : learning_rate_(learning_rate), momentum_(momentum) {
    if (!(learning_rate > Real(0))) throw ConfigError("learning rate must be positive");
    if (!(momentum >= Real(0) && momentum < Real(1))) {
      throw ConfigError("momentum must lie in [0, 1)");
    }
  }

  void step(BasicModelParams<Real>& params, const BasicGradients<Real>& grads) {
    if (velocity_.empty()) {
      for (const auto& e : grads.entries) {
        velocity_.push_back({e.slot, std::vector<Real>(e.values.size(), Real(0))});
      }
    }
    if (velocity_.size() != grads.entries.size()) {
      throw ConfigError("optimizer state does not match gradient slots");
    }
    for (std::size_t s = 0; s < grads.entries.size(); ++s) {
      const auto& g = grads.entries[s];
      auto& v = velocity_[s];
      auto p = param_slot(params, g.slot);
      if (!(v.slot == g.slot) || v.values.size() != g.values.size() || p.size() != g.values.size()) {
        throw ConfigError("optimizer state does not match gradient slot " + slot_name(g.slot));
      }
      for (std::size_t i = 0; i < p.size(); ++i) {
        v.values[i] = momentum_ * v.values[i] + g.values[i];
        p[i] -= learning_rate_ * v.values[i];
      }
    }
  }

  Real learning_rate() const { return learning_rate_; }
  Real momentum() const { return momentum_; }
  const std::vector<GradEntry<Real>>& velocity() const { return velocity_; }

 private:
  Real learning_rate_;
  Real momentum_;
  std::vector<GradEntry<Real>> velocity_;
};

using SgdMomentum = BasicSgdMomentum<float>;

}  // namespace edgeadapt
