#pragma once

#include <cmath>

#include "specmesh/autodiff/parameter_store.hpp"
#include "specmesh/core/error.hpp"

namespace specmesh {

/// Classic momentum: v <- momentum * v + g; p <- p - lr * v; then g <- 0.
/// All gradients are checked before anything is modified.
template <typename T>
void sgd_momentum_step(ParameterStore<T>& store, double lr, double momentum) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Parameter<T>& p = store[i];
    if (p.trainable && !p.grad.all_finite()) throw NumericError("non-finite gradient in parameter '" + p.name + "'");
  }
  const T lr_t = static_cast<T>(lr), mom_t = static_cast<T>(momentum);
  for (std::size_t i = 0; i < store.size(); ++i) {
    Parameter<T>& p = store[i];
    if (p.trainable) {
      T* v = p.velocity.data();
      T* w = p.value.data();
      const T* g = p.grad.data();
      for (std::size_t k = 0; k < p.value.size(); ++k) {
        v[k] = mom_t * v[k] + g[k];
        w[k] -= lr_t * v[k];
      }
    }
    p.grad.fill(T(0));
  }
}

/// base * decay^epoch.
inline double lr_schedule(double base, double decay, long long epoch) {
  require(decay > 0.0 && decay <= 1.0, "lr_schedule: decay must lie in (0, 1]");
  require(epoch >= 0, "lr_schedule: negative epoch");
  return base * std::pow(decay, static_cast<double>(epoch));
}

}  // namespace specmesh
